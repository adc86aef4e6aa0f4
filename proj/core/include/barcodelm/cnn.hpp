#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "barcodelm/kvconfig.hpp"
#include "barcodelm/nn_ops.hpp"
#include "barcodelm/param_init.hpp"
#include "barcodelm/rng.hpp"

namespace barcodelm {

// Supervised baseline over one-hot nucleotide input: three conv stages
// (conv1d -> batch norm -> max pool), flatten, batch norm, a 500-unit
// linear layer, and the output layer.
struct CnnConfig {
  struct ConvSpec {
    int filters;
    int kernel_width;
    int pool_width;
  };
  std::array<ConvSpec, 3> conv = {{{64, 5, 2}, {32, 5, 2}, {16, 5, 2}}};
  int hidden_units = 500;
  int input_len = 660;  // covers the 658-bp barcode
  int n_classes = 0;

  // Length after the pooling cascade; every stage must keep at least one
  // position.
  std::int64_t flattened_size() const {
    std::int64_t len = input_len;
    for (const auto& spec : conv) len /= spec.pool_width;
    return len * conv[2].filters;
  }

  void validate() const {
    if (n_classes < 1) throw ConfigError("cnn: n_classes must be >= 1");
    std::int64_t len = input_len;
    std::int64_t min_len = 1;
    for (const auto& spec : conv) min_len *= spec.pool_width;
    for (const auto& spec : conv) {
      len /= spec.pool_width;
      if (len < 1) {
        throw ConfigError("cnn: input_len " + std::to_string(input_len) +
                          " too short for the pooling cascade; minimum is " +
                          std::to_string(min_len));
      }
      if (spec.kernel_width % 2 == 0) throw ConfigError("cnn: kernel width must be odd");
    }
  }

  KvMap to_kv() const {
    KvMap kv;
    for (std::size_t i = 0; i < conv.size(); ++i) {
      const std::string p = "cnn.conv" + std::to_string(i + 1) + ".";
      kv.set(p + "filters", static_cast<std::int64_t>(conv[i].filters));
      kv.set(p + "kernel", static_cast<std::int64_t>(conv[i].kernel_width));
      kv.set(p + "pool", static_cast<std::int64_t>(conv[i].pool_width));
    }
    kv.set("cnn.hidden_units", static_cast<std::int64_t>(hidden_units));
    kv.set("cnn.input_len", static_cast<std::int64_t>(input_len));
    kv.set("cnn.n_classes", static_cast<std::int64_t>(n_classes));
    return kv;
  }

  static CnnConfig from_kv(const KvMap& kv) {
    CnnConfig c;
    for (std::size_t i = 0; i < c.conv.size(); ++i) {
      const std::string p = "cnn.conv" + std::to_string(i + 1) + ".";
      c.conv[i].filters = static_cast<int>(kv.get_int(p + "filters"));
      c.conv[i].kernel_width = static_cast<int>(kv.get_int(p + "kernel"));
      c.conv[i].pool_width = static_cast<int>(kv.get_int(p + "pool"));
    }
    c.hidden_units = static_cast<int>(kv.get_int("cnn.hidden_units"));
    c.input_len = static_cast<int>(kv.get_int("cnn.input_len"));
    c.n_classes = static_cast<int>(kv.get_int("cnn.n_classes"));
    c.validate();
    return c;
  }
};

// Trainable tensors under their names; batch-norm running statistics are
// returned separately in `buffers` (not optimized, saved with checkpoints).
template <typename T>
void init_cnn_parameters(const CnnConfig& config, std::uint64_t seed, NamedTensors<T>& params,
                         NamedTensors<T>& buffers) {
  config.validate();
  Rng rng(mix_seed(seed, fnv1a64("cnn_init")));
  int in_channels = 5;
  for (std::size_t i = 0; i < config.conv.size(); ++i) {
    const std::string p = "conv" + std::to_string(i + 1) + ".";
    const std::string bn = "bn" + std::to_string(i + 1) + ".";
    const auto& spec = config.conv[i];
    const double stddev = std::sqrt(2.0 / (spec.kernel_width * in_channels));
    params[p + "w"] = detail::gaussian_tensor<T>({spec.kernel_width, in_channels, spec.filters},
                                                 rng, stddev);
    params[p + "b"] = TensorData<T>::zeros({spec.filters});
    params[bn + "gamma"] = TensorData<T>::full({spec.filters}, T(1));
    params[bn + "beta"] = TensorData<T>::zeros({spec.filters});
    buffers[bn + "running_mean"] = TensorData<T>::zeros({spec.filters});
    buffers[bn + "running_var"] = TensorData<T>::full({spec.filters}, T(1));
    in_channels = spec.filters;
  }
  const std::int64_t flat = config.flattened_size();
  params["bn_flat.gamma"] = TensorData<T>::full({flat}, T(1));
  params["bn_flat.beta"] = TensorData<T>::zeros({flat});
  buffers["bn_flat.running_mean"] = TensorData<T>::zeros({flat});
  buffers["bn_flat.running_var"] = TensorData<T>::full({flat}, T(1));
  params["fc.w"] = detail::gaussian_tensor<T>({flat, config.hidden_units}, rng,
                                              std::sqrt(2.0 / static_cast<double>(flat)));
  params["fc.b"] = TensorData<T>::zeros({config.hidden_units});
  params["out.w"] = detail::gaussian_tensor<T>(
      {config.hidden_units, config.n_classes}, rng,
      std::sqrt(2.0 / static_cast<double>(config.hidden_units)));
  params["out.b"] = TensorData<T>::zeros({config.n_classes});
}

// one_hot: [B, input_len, 5] -> logits [B, n_classes]. Batch statistics in
// training mode, running statistics in evaluation mode.
template <typename T>
nn::Value<T> cnn_forward(Tape<T>& tape, const std::map<std::string, nn::Value<T>>& params,
                         NamedTensors<T>& buffers, nn::Value<T> one_hot, const CnnConfig& config,
                         bool training) {
  config.validate();
  const auto& shape = one_hot.data().shape;
  if (shape.size() != 3 || shape[1] != config.input_len || shape[2] != 5) {
    throw MathError("cnn: expected input [B," + std::to_string(config.input_len) +
                    ",5], got " + one_hot.data().shape_string());
  }
  auto p = [&params](const std::string& name) -> nn::Value<T> {
    const auto it = params.find(name);
    if (it == params.end()) throw MathError("cnn: missing parameter '" + name + "'");
    return it->second;
  };
  auto x = one_hot;
  for (std::size_t i = 0; i < config.conv.size(); ++i) {
    const std::string cp = "conv" + std::to_string(i + 1) + ".";
    const std::string bn = "bn" + std::to_string(i + 1) + ".";
    x = nn::conv1d_same(x, p(cp + "w"), p(cp + "b"));
    x = nn::batch_norm(x, p(bn + "gamma"), p(bn + "beta"), buffers.at(bn + "running_mean"),
                       buffers.at(bn + "running_var"), training);
    x = nn::max_pool1d(x, config.conv[i].pool_width);
  }
  x = nn::flatten(x);
  x = nn::batch_norm(x, p("bn_flat.gamma"), p("bn_flat.beta"),
                     buffers.at("bn_flat.running_mean"), buffers.at("bn_flat.running_var"),
                     training);
  x = nn::linear(x, p("fc.w"), p("fc.b"));
  return nn::linear(x, p("out.w"), p("out.b"));
}

}  // namespace barcodelm
