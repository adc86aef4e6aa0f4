#pragma once

#include <cstdint>
#include <string>

#include "barcodelm/kvconfig.hpp"
#include "barcodelm/nn_ops.hpp"
#include "barcodelm/tokenize.hpp"

namespace barcodelm {

// Transformer encoder with learned absolute positions, pre-norm blocks and
// a final layer norm. Sequence representation is masked global average
// pooling over token outputs; there is no CLS token.
struct EncoderConfig {
  int layers = 2;
  int heads = 4;
  int model_dim = 64;
  int ff_dim = 256;
  int max_len = 128;
  std::int64_t vocab_size = 0;  // reported size, 4^k + 2
  double dropout = 0.0;
  int k = 4;
  TokenizeMode mode = TokenizeMode::kNonOverlapping;

  static EncoderConfig desk_preset(int k);
  static EncoderConfig paper_preset(int k);
  static EncoderConfig from_preset_name(const std::string& name, int k);

  void validate() const;
  std::int64_t embedding_rows() const { return vocab_size + 1; }  // + pad row

  KvMap to_kv() const;
  static EncoderConfig from_kv(const KvMap& kv);
};

// Gaussian(0, 0.02) weights, zero biases, unit layer-norm gains.
// Deterministic in seed; iteration is in sorted parameter-name order.
template <typename T>
NamedTensors<T> init_encoder_parameters(const EncoderConfig& config, std::uint64_t seed);

// Adds the single-linear MLM head (model_dim -> reported vocab size).
template <typename T>
void add_mlm_head(NamedTensors<T>& params, const EncoderConfig& config, std::uint64_t seed);

// Adds the two-layer classification head: linear -> tanh -> dropout(0.2)
// -> linear. Hidden width equals model_dim.
template <typename T>
void add_classifier_head(NamedTensors<T>& params, int input_dim, int n_classes,
                         std::uint64_t seed);

// Token outputs [B, L, model_dim]. Padded keys are excluded from attention,
// so right-padding never influences real positions.
template <typename T>
nn::Value<T> encoder_forward(Tape<T>& tape, const std::map<std::string, nn::Value<T>>& params,
                             const TokenizedBatch& batch, const EncoderConfig& config,
                             bool training, std::uint64_t seed);

template <typename T>
nn::Value<T> mlm_logits(Tape<T>& tape, const std::map<std::string, nn::Value<T>>& params,
                        nn::Value<T> token_outputs, const EncoderConfig& config);

struct MlmLossValue {
  double loss = 0.0;
  double masked_accuracy = 0.0;
  std::int64_t masked_count = 0;
};

// Cross-entropy over loss-mask-true positions only.
template <typename T>
nn::CrossEntropyResult<T> mlm_loss(Tape<T>& tape,
                                   const std::map<std::string, nn::Value<T>>& params,
                                   nn::Value<T> token_outputs, const MaskedBatch& masked,
                                   const EncoderConfig& config);

// Masked mean over real positions; [B, model_dim].
template <typename T>
nn::Value<T> pool_embeddings(nn::Value<T> token_outputs, const BoolMatrix& padding_mask) {
  return nn::masked_mean_pool(token_outputs, padding_mask);
}

template <typename T>
nn::Value<T> classifier_head(Tape<T>& tape, const std::map<std::string, nn::Value<T>>& params,
                             nn::Value<T> pooled, bool training, std::uint64_t seed);

}  // namespace barcodelm

#include "barcodelm/encoder_impl.hpp"
