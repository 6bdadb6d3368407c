/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

// On-disk formats.
//
// Tensors: flat little-endian signed 8/16/32-bit elements in `<file>`, with a
// sidecar `<file>.hdr` of key=value lines:
//
//   layout=flat
//   shape=64,255
//   dtype=int8
//   format=twos:4
//
// Packed input vectors: raw little-endian 32-bit words (see io_frontend.hpp)
// with a sidecar `layout=packed32`, `count=N`, `format=...`.
//
// Reports: key=value text, one metric per line.

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cimu/io_frontend.hpp"
#include "cimu/tensor.hpp"

namespace cimu {

using KeyValues = std::vector<std::pair<std::string, std::string>>;

std::filesystem::path header_path(const std::filesystem::path& data);

/// Writes via a temporary file and rename. Throws IoError.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);
/// Throws IoError.
std::string read_file(const std::filesystem::path& path);

/// Parses key=value lines; blank lines and '#' comments are skipped.
/// Throws ParseError on malformed lines or duplicate keys.
std::map<std::string, std::string> parse_key_values(std::string_view text);
std::string format_key_values(const KeyValues& kv);

/// Smallest of 8/16/32 that holds every element.
int tensor_dtype_bits(const QuantizedTensor& t);
void write_tensor(const std::filesystem::path& path, const QuantizedTensor& t, int dtype_bits = 0);
/// Reads either layout; a packed vector is returned unpacked and decoded.
/// Throws IoError, ParseError or ShapeMismatch.
QuantizedTensor read_tensor(const std::filesystem::path& path);

/// Result values (datapath outputs, references): flat layout with
/// `format=raw` and the narrowest dtype that holds them. Throws
/// InvariantViolation for values beyond 32 bits.
void write_values(const std::filesystem::path& path, const std::vector<size_t>& shape,
                  std::span<const int64_t> values);
/// Reads any flat file as plain integers, ignoring the declared format.
std::vector<int64_t> read_values(const std::filesystem::path& path, std::vector<size_t>* shape = nullptr);

void write_packed(const std::filesystem::path& path, const PackedWordStream& stream,
                  const NumberFormat& fmt);

}  // namespace cimu
