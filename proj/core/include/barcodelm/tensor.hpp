#pragma once

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "barcodelm/errors.hpp"

namespace barcodelm {

// Dense row-major tensor of rank 0..4. Value type, no view semantics.
template <typename T>
struct TensorData {
  std::vector<std::int64_t> shape;
  std::vector<T> v;

  TensorData() = default;
  explicit TensorData(std::vector<std::int64_t> s) : shape(std::move(s)) {
    v.assign(static_cast<std::size_t>(element_count(shape)), T(0));
  }
  TensorData(std::vector<std::int64_t> s, std::vector<T> values)
      : shape(std::move(s)), v(std::move(values)) {
    if (static_cast<std::int64_t>(v.size()) != element_count(shape)) {
      throw MathError("tensor: value count " + std::to_string(v.size()) +
                      " does not match shape " + shape_string(shape));
    }
  }

  static std::int64_t element_count(const std::vector<std::int64_t>& s) {
    std::int64_t n = 1;
    for (std::int64_t d : s) n *= d;
    return n;
  }

  static std::string shape_string(const std::vector<std::int64_t>& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ']';
    return os.str();
  }

  std::int64_t size() const { return static_cast<std::int64_t>(v.size()); }
  std::int64_t dim(std::size_t i) const { return shape.at(i); }
  std::size_t rank() const { return shape.size(); }

  T& at2(std::int64_t i, std::int64_t j) { return v[static_cast<std::size_t>(i * shape[1] + j)]; }
  const T& at2(std::int64_t i, std::int64_t j) const {
    return v[static_cast<std::size_t>(i * shape[1] + j)];
  }
  T& at3(std::int64_t i, std::int64_t j, std::int64_t k) {
    return v[static_cast<std::size_t>((i * shape[1] + j) * shape[2] + k)];
  }
  const T& at3(std::int64_t i, std::int64_t j, std::int64_t k) const {
    return v[static_cast<std::size_t>((i * shape[1] + j) * shape[2] + k)];
  }

  std::string shape_string() const { return shape_string(shape); }

  template <typename U>
  TensorData<U> cast() const {
    TensorData<U> out;
    out.shape = shape;
    out.v.resize(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out.v[i] = static_cast<U>(v[i]);
    return out;
  }

  static TensorData zeros(std::vector<std::int64_t> s) { return TensorData(std::move(s)); }

  static TensorData full(std::vector<std::int64_t> s, T value) {
    TensorData t(std::move(s));
    for (auto& x : t.v) x = value;
    return t;
  }
};

inline bool same_shape(const std::vector<std::int64_t>& a, const std::vector<std::int64_t>& b) {
  return a == b;
}

// Integer matrix used for token ids and class targets.
struct IntMatrix {
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  std::vector<std::int32_t> v;

  IntMatrix() = default;
  IntMatrix(std::int64_t r, std::int64_t c, std::int32_t fill = 0)
      : rows(r), cols(c), v(static_cast<std::size_t>(r * c), fill) {}
  std::int32_t& at(std::int64_t i, std::int64_t j) { return v[static_cast<std::size_t>(i * cols + j)]; }
  std::int32_t at(std::int64_t i, std::int64_t j) const { return v[static_cast<std::size_t>(i * cols + j)]; }
};

struct BoolMatrix {
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  std::vector<std::uint8_t> v;

  BoolMatrix() = default;
  BoolMatrix(std::int64_t r, std::int64_t c, bool fill = false)
      : rows(r), cols(c), v(static_cast<std::size_t>(r * c), fill ? 1 : 0) {}
  void set(std::int64_t i, std::int64_t j, bool b) { v[static_cast<std::size_t>(i * cols + j)] = b ? 1 : 0; }
  bool at(std::int64_t i, std::int64_t j) const { return v[static_cast<std::size_t>(i * cols + j)] != 0; }
};

}  // namespace barcodelm
