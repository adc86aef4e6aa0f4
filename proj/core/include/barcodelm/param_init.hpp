#pragma once

#include <cstdint>
#include <vector>

#include "barcodelm/rng.hpp"
#include "barcodelm/tensor.hpp"

namespace barcodelm::detail {

template <typename T>
TensorData<T> gaussian_tensor(std::vector<std::int64_t> shape, Rng& rng, double stddev) {
  TensorData<T> t(std::move(shape));
  for (auto& v : t.v) v = static_cast<T>(rng.normal(0.0, stddev));
  return t;
}

inline constexpr double kInitStd = 0.02;

}  // namespace barcodelm::detail
