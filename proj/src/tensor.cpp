/* SPDX-License-Identifier: Apache-2.0 */
#include "cimu/tensor.hpp"

#include <functional>
#include <numeric>
#include <string>

#include "cimu/error.hpp"

namespace cimu {

QuantizedTensor QuantizedTensor::matrix(size_t rows, size_t cols, NumberFormat fmt) {
  return {{rows, cols}, std::vector<int32_t>(rows * cols, 0), fmt};
}

QuantizedTensor QuantizedTensor::vector(std::vector<int32_t> values, NumberFormat fmt) {
  const size_t n = values.size();
  return {{n}, std::move(values), fmt};
}

size_t QuantizedTensor::size() const noexcept {
  if (shape.empty()) return 0;
  return std::accumulate(shape.begin(), shape.end(), size_t{1}, std::multiplies<>());
}

size_t QuantizedTensor::cols() const noexcept {
  if (shape.size() < 2) return shape.empty() ? 0 : shape.front();
  return std::accumulate(shape.begin() + 1, shape.end(), size_t{1}, std::multiplies<>());
}

namespace {

void check(const QuantizedTensor& t, bool allow_zero) {
  if (t.data.size() != t.size()) {
    fail(ErrorCode::ShapeMismatch, "tensor holds " + std::to_string(t.data.size()) +
                                       " elements but shape implies " + std::to_string(t.size()));
  }
  for (const int32_t v : t.data) {
    if (allow_zero && v == 0) continue;
    if (!t.format.representable(v)) {
      fail(ErrorCode::UnrepresentableValue,
           std::to_string(v) + " is not representable in " + t.format.to_string());
    }
  }
}

}  // namespace

void QuantizedTensor::validate() const { check(*this, false); }

void QuantizedTensor::validate_allowing_zero() const { check(*this, true); }

}  // namespace cimu
