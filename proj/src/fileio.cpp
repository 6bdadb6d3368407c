/* SPDX-License-Identifier: Apache-2.0 */
#include "cimu/fileio.hpp"

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>

#include "cimu/error.hpp"

namespace fs = std::filesystem;

namespace cimu {

fs::path header_path(const fs::path& data) {
  fs::path p = data;
  p += ".hdr";
  return p;
}

void write_file_atomic(const fs::path& path, const std::string& bytes) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::IoError, "cannot open '" + tmp.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorCode::IoError, "write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) fail(ErrorCode::IoError, "cannot rename onto '" + path.string() + "': " + ec.message());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

long long parse_int(std::string_view text, const std::string& what) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    fail(ErrorCode::ParseError, "bad integer '" + std::string(text) + "' for " + what);
  }
  return v;
}

std::vector<size_t> parse_shape(std::string_view text) {
  std::vector<size_t> shape;
  size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto part = trim(text.substr(start, comma == std::string_view::npos ? text.npos : comma - start));
    const long long v = parse_int(part, "shape");
    if (v <= 0) fail(ErrorCode::ParseError, "shape dimensions must be positive");
    shape.push_back(static_cast<size_t>(v));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return shape;
}

const std::string& require(const std::map<std::string, std::string>& kv, const std::string& key,
                           const fs::path& where) {
  const auto it = kv.find(key);
  if (it == kv.end()) {
    fail(ErrorCode::ParseError, "header '" + where.string() + "' lacks '" + key + "'");
  }
  return it->second;
}

}  // namespace

std::map<std::string, std::string> parse_key_values(std::string_view text) {
  std::map<std::string, std::string> kv;
  size_t line_no = 0;
  size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const auto line = trim(text.substr(start, end - start));
    start = end + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      fail(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": expected key=value");
    }
    std::string key(trim(line.substr(0, eq)));
    std::string value(trim(line.substr(eq + 1)));
    if (!kv.emplace(key, value).second) {
      fail(ErrorCode::ParseError, "duplicate key '" + key + "'");
    }
  }
  return kv;
}

std::string format_key_values(const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

int tensor_dtype_bits(const QuantizedTensor& t) {
  int bits = 8;
  for (const int32_t v : t.data) {
    if (v < -32768 || v > 32767) return 32;
    if (v < -128 || v > 127) bits = 16;
  }
  return bits;
}

void write_tensor(const fs::path& path, const QuantizedTensor& t, int dtype_bits) {
  if (dtype_bits == 0) dtype_bits = tensor_dtype_bits(t);
  if (dtype_bits != 8 && dtype_bits != 16 && dtype_bits != 32) {
    fail(ErrorCode::InvalidConfig, "dtype must be 8, 16 or 32 bits");
  }
  const size_t bytes_per = static_cast<size_t>(dtype_bits / 8);
  std::string bytes(t.data.size() * bytes_per, '\0');
  for (size_t k = 0; k < t.data.size(); ++k) {
    const auto u = static_cast<uint32_t>(t.data[k]);
    for (size_t b = 0; b < bytes_per; ++b) bytes[k * bytes_per + b] = static_cast<char>((u >> (8 * b)) & 0xffu);
  }
  std::string shape;
  for (size_t d = 0; d < t.shape.size(); ++d) shape += (d ? "," : "") + std::to_string(t.shape[d]);
  const KeyValues header{{"layout", "flat"},
                         {"shape", shape},
                         {"dtype", "int" + std::to_string(dtype_bits)},
                         {"format", t.format.to_string()}};
  write_file_atomic(path, bytes);
  write_file_atomic(header_path(path), format_key_values(header));
}

void write_packed(const fs::path& path, const PackedWordStream& stream, const NumberFormat& fmt) {
  std::string bytes(stream.words.size() * 4, '\0');
  for (size_t k = 0; k < stream.words.size(); ++k) {
    for (size_t b = 0; b < 4; ++b) bytes[k * 4 + b] = static_cast<char>((stream.words[k] >> (8 * b)) & 0xffu);
  }
  const KeyValues header{{"layout", "packed32"},
                         {"count", std::to_string(stream.element_count)},
                         {"format", fmt.to_string()}};
  write_file_atomic(path, bytes);
  write_file_atomic(header_path(path), format_key_values(header));
}

namespace {

std::vector<int32_t> decode_flat(const std::string& bytes, const std::string& dtype, size_t count,
                                 const fs::path& path) {
  size_t bytes_per = 0;
  if (dtype == "int8") bytes_per = 1;
  else if (dtype == "int16") bytes_per = 2;
  else if (dtype == "int32") bytes_per = 4;
  else fail(ErrorCode::ParseError, "unknown dtype '" + dtype + "'");
  if (bytes.size() != count * bytes_per) {
    fail(ErrorCode::ShapeMismatch, "'" + path.string() + "' holds " + std::to_string(bytes.size()) +
                                       " bytes, shape implies " + std::to_string(count * bytes_per));
  }
  std::vector<int32_t> out(count);
  for (size_t k = 0; k < count; ++k) {
    uint32_t u = 0;
    for (size_t b = 0; b < bytes_per; ++b) u |= static_cast<uint32_t>(static_cast<unsigned char>(bytes[k * bytes_per + b])) << (8 * b);
    const int shift = static_cast<int>(32 - 8 * bytes_per);
    out[k] = static_cast<int32_t>(u << shift) >> shift;  // sign-extend
  }
  return out;
}

void check_header_keys(const std::map<std::string, std::string>& kv, const fs::path& hdr) {
  for (const auto& [key, value] : kv) {
    if (key != "layout" && key != "shape" && key != "dtype" && key != "format" && key != "count") {
      fail(ErrorCode::ParseError, "unknown header key '" + key + "' in '" + hdr.string() + "'");
    }
  }
}

}  // namespace

void write_values(const fs::path& path, const std::vector<size_t>& shape, std::span<const int64_t> values) {
  QuantizedTensor t;
  t.shape = shape;
  if (t.size() != values.size()) fail(ErrorCode::ShapeMismatch, "shape does not match value count");
  for (const int64_t v : values) {
    if (v < INT32_MIN || v > INT32_MAX) fail(ErrorCode::InvariantViolation, "result value exceeds 32 bits");
    t.data.push_back(static_cast<int32_t>(v));
  }
  const int dtype_bits = tensor_dtype_bits(t);
  const size_t bytes_per = static_cast<size_t>(dtype_bits / 8);
  std::string bytes(t.data.size() * bytes_per, '\0');
  for (size_t k = 0; k < t.data.size(); ++k) {
    const auto u = static_cast<uint32_t>(t.data[k]);
    for (size_t b = 0; b < bytes_per; ++b) bytes[k * bytes_per + b] = static_cast<char>((u >> (8 * b)) & 0xffu);
  }
  std::string shape_text;
  for (size_t d = 0; d < shape.size(); ++d) shape_text += (d ? "," : "") + std::to_string(shape[d]);
  const KeyValues header{{"layout", "flat"}, {"shape", shape_text}, {"dtype", "int" + std::to_string(dtype_bits)}, {"format", "raw"}};
  write_file_atomic(path, bytes);
  write_file_atomic(header_path(path), format_key_values(header));
}

std::vector<int64_t> read_values(const fs::path& path, std::vector<size_t>* shape) {
  const fs::path hdr = header_path(path);
  const auto kv = parse_key_values(read_file(hdr));
  check_header_keys(kv, hdr);
  if (require(kv, "layout", hdr) != "flat") fail(ErrorCode::ParseError, "'" + path.string() + "' is not a flat tensor");
  QuantizedTensor t;
  t.shape = parse_shape(require(kv, "shape", hdr));
  const auto data = decode_flat(read_file(path), require(kv, "dtype", hdr), t.size(), path);
  if (shape) *shape = t.shape;
  return {data.begin(), data.end()};
}

QuantizedTensor read_tensor(const fs::path& path) {
  const fs::path hdr = header_path(path);
  const auto kv = parse_key_values(read_file(hdr));
  check_header_keys(kv, hdr);
  const std::string bytes = read_file(path);
  const NumberFormat fmt = NumberFormat::parse(require(kv, "format", hdr));
  const std::string& layout = require(kv, "layout", hdr);

  QuantizedTensor t;
  t.format = fmt;
  if (layout == "packed32") {
    const long long count = parse_int(require(kv, "count", hdr), "count");
    if (count < 0) fail(ErrorCode::ParseError, "negative element count");
    PackedWordStream stream;
    stream.element_bits = fmt.width();
    stream.element_count = static_cast<size_t>(count);
    if (bytes.size() % 4 != 0 || bytes.size() / 4 != words_for(stream.element_count, fmt.width())) {
      fail(ErrorCode::ShapeMismatch, "'" + path.string() + "' holds " + std::to_string(bytes.size()) +
                                         " bytes, expected " +
                                         std::to_string(4 * words_for(stream.element_count, fmt.width())));
    }
    stream.words.resize(bytes.size() / 4);
    for (size_t k = 0; k < stream.words.size(); ++k) {
      uint32_t w = 0;
      for (size_t b = 0; b < 4; ++b) w |= static_cast<uint32_t>(static_cast<unsigned char>(bytes[k * 4 + b])) << (8 * b);
      stream.words[k] = w;
    }
    t.shape = {stream.element_count};
    for (const uint8_t code : unpack(stream)) t.data.push_back(decode_code(code, fmt));
    return t;
  }
  if (layout != "flat") fail(ErrorCode::ParseError, "unknown layout '" + layout + "'");

  t.shape = parse_shape(require(kv, "shape", hdr));
  t.data = decode_flat(bytes, require(kv, "dtype", hdr), t.size(), path);
  return t;
}

}  // namespace cimu
