#pragma once

#include <string>

#include "barcodelm/autodiff.hpp"
#include "barcodelm/kvconfig.hpp"

namespace barcodelm {

// Disk-facing model bundle: architecture tag, a flat config snapshot, and
// every tensor (trainable parameters plus batch-norm running statistics).
// Values are stored double-width regardless of the training precision.
struct ModelParameters {
  std::string architecture;  // "transformer" | "cnn"
  KvMap config;
  NamedTensors<double> tensors;

  // Writes <path> (binary checkpoint), <path>.manifest and <path>.config.
  void save(const std::string& path) const;
  static ModelParameters load(const std::string& path);
};

// Batch-norm running statistics are buffers, not parameters: their names
// contain ".running_".
bool is_buffer_name(const std::string& name);

template <typename T>
void split_buffers(const NamedTensors<T>& all, NamedTensors<T>& params, NamedTensors<T>& buffers) {
  for (const auto& [name, tensor] : all) {
    (is_buffer_name(name) ? buffers : params)[name] = tensor;
  }
}

}  // namespace barcodelm
