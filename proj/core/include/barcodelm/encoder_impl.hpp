#pragma once

#include "barcodelm/errors.hpp"
#include "barcodelm/param_init.hpp"
#include "barcodelm/rng.hpp"

namespace barcodelm {

inline EncoderConfig EncoderConfig::desk_preset(int k) {
  EncoderConfig c;
  c.layers = 2;
  c.heads = 4;
  c.model_dim = 64;
  c.ff_dim = 256;
  c.max_len = 128;
  c.dropout = 0.0;
  c.k = k;
  c.vocab_size = Vocabulary::build(k).reported_size();
  return c;
}

inline EncoderConfig EncoderConfig::paper_preset(int k) {
  EncoderConfig c;
  c.layers = 12;
  c.heads = 12;
  c.model_dim = 768;
  c.ff_dim = 3072;
  c.max_len = 512;
  c.dropout = 0.1;
  c.k = k;
  c.vocab_size = Vocabulary::build(k).reported_size();
  return c;
}

inline EncoderConfig EncoderConfig::from_preset_name(const std::string& name, int k) {
  if (name == "desk") return desk_preset(k);
  if (name == "paper") return paper_preset(k);
  throw ConfigError("unknown preset '" + name + "' (expected desk or paper)");
}

inline void EncoderConfig::validate() const {
  if (layers < 1) throw ConfigError("encoder: layers must be >= 1");
  if (heads < 1 || model_dim % heads != 0) {
    throw ConfigError("encoder: model_dim " + std::to_string(model_dim) +
                      " must be divisible by heads " + std::to_string(heads));
  }
  if (max_len < 1) throw ConfigError("encoder: max_len must be >= 1");
  if (vocab_size < 3) throw ConfigError("encoder: vocab_size not set");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("encoder: dropout must be in [0, 1)");
}

inline KvMap EncoderConfig::to_kv() const {
  KvMap kv;
  kv.set("encoder.layers", static_cast<std::int64_t>(layers));
  kv.set("encoder.heads", static_cast<std::int64_t>(heads));
  kv.set("encoder.model_dim", static_cast<std::int64_t>(model_dim));
  kv.set("encoder.ff_dim", static_cast<std::int64_t>(ff_dim));
  kv.set("encoder.max_len", static_cast<std::int64_t>(max_len));
  kv.set("encoder.vocab_size", vocab_size);
  kv.set("encoder.dropout", dropout);
  kv.set("encoder.k", static_cast<std::int64_t>(k));
  kv.set("encoder.mode", std::string(to_string(mode)));
  return kv;
}

inline EncoderConfig EncoderConfig::from_kv(const KvMap& kv) {
  EncoderConfig c;
  c.layers = static_cast<int>(kv.get_int("encoder.layers"));
  c.heads = static_cast<int>(kv.get_int("encoder.heads"));
  c.model_dim = static_cast<int>(kv.get_int("encoder.model_dim"));
  c.ff_dim = static_cast<int>(kv.get_int("encoder.ff_dim"));
  c.max_len = static_cast<int>(kv.get_int("encoder.max_len"));
  c.vocab_size = kv.get_int("encoder.vocab_size");
  c.dropout = kv.get_double("encoder.dropout");
  c.k = static_cast<int>(kv.get_int("encoder.k"));
  c.mode = tokenize_mode_from_string(kv.get_or("encoder.mode", "non-overlapping"));
  c.validate();
  return c;
}

template <typename T>
NamedTensors<T> init_encoder_parameters(const EncoderConfig& config, std::uint64_t seed) {
  config.validate();
  NamedTensors<T> params;
  const std::int64_t d = config.model_dim;
  const std::int64_t ff = config.ff_dim;
  Rng rng(mix_seed(seed, fnv1a64("encoder_init")));

  params["embed.token"] = detail::gaussian_tensor<T>({config.embedding_rows(), d}, rng,
                                                     detail::kInitStd);
  params["embed.position"] =
      detail::gaussian_tensor<T>({config.max_len, d}, rng, detail::kInitStd);
  for (int layer = 0; layer < config.layers; ++layer) {
    const std::string prefix = "layer" + std::to_string(layer) + ".";
    for (const char* name : {"attn.wq", "attn.wk", "attn.wv", "attn.wo"}) {
      params[prefix + name] = detail::gaussian_tensor<T>({d, d}, rng, detail::kInitStd);
    }
    for (const char* name : {"attn.bq", "attn.bk", "attn.bv", "attn.bo"}) {
      params[prefix + name] = TensorData<T>::zeros({d});
    }
    params[prefix + "ln1.gamma"] = TensorData<T>::full({d}, T(1));
    params[prefix + "ln1.beta"] = TensorData<T>::zeros({d});
    params[prefix + "ffn.w1"] = detail::gaussian_tensor<T>({d, ff}, rng, detail::kInitStd);
    params[prefix + "ffn.b1"] = TensorData<T>::zeros({ff});
    params[prefix + "ffn.w2"] = detail::gaussian_tensor<T>({ff, d}, rng, detail::kInitStd);
    params[prefix + "ffn.b2"] = TensorData<T>::zeros({d});
    params[prefix + "ln2.gamma"] = TensorData<T>::full({d}, T(1));
    params[prefix + "ln2.beta"] = TensorData<T>::zeros({d});
  }
  params["final_ln.gamma"] = TensorData<T>::full({d}, T(1));
  params["final_ln.beta"] = TensorData<T>::zeros({d});
  return params;
}

template <typename T>
void add_mlm_head(NamedTensors<T>& params, const EncoderConfig& config, std::uint64_t seed) {
  Rng rng(mix_seed(seed, fnv1a64("mlm_head_init")));
  params["mlm.w"] = detail::gaussian_tensor<T>({config.model_dim, config.vocab_size}, rng,
                                               detail::kInitStd);
  params["mlm.b"] = TensorData<T>::zeros({config.vocab_size});
}

template <typename T>
void add_classifier_head(NamedTensors<T>& params, int input_dim, int n_classes,
                         std::uint64_t seed) {
  Rng rng(mix_seed(seed, fnv1a64("classifier_head_init")));
  const std::int64_t hidden = input_dim;
  params["head.w1"] = detail::gaussian_tensor<T>({input_dim, hidden}, rng, detail::kInitStd);
  params["head.b1"] = TensorData<T>::zeros({hidden});
  params["head.w2"] = detail::gaussian_tensor<T>({hidden, n_classes}, rng, detail::kInitStd);
  params["head.b2"] = TensorData<T>::zeros({n_classes});
}

template <typename T>
nn::Value<T> encoder_forward(Tape<T>& tape, const std::map<std::string, nn::Value<T>>& params,
                             const TokenizedBatch& batch, const EncoderConfig& config,
                             bool training, std::uint64_t seed) {
  const std::int64_t batch_size = batch.batch_size();
  const std::int64_t len = batch.max_len();
  if (len > config.max_len) {
    throw MathError("encoder: sequence length " + std::to_string(len) +
                    " exceeds max_len " + std::to_string(config.max_len));
  }
  auto p = [&params](const std::string& name) -> nn::Value<T> {
    const auto it = params.find(name);
    if (it == params.end()) throw MathError("encoder: missing parameter '" + name + "'");
    return it->second;
  };

  IntMatrix position_ids(batch_size, len);
  for (std::int64_t b = 0; b < batch_size; ++b) {
    for (std::int64_t j = 0; j < len; ++j) position_ids.at(b, j) = static_cast<std::int32_t>(j);
  }
  auto x = nn::add(nn::embedding_lookup(p("embed.token"), batch.ids),
                   nn::embedding_lookup(p("embed.position"), position_ids));

  // Key mask replicated per head: [B*H, L].
  BoolMatrix head_mask(batch_size * config.heads, len);
  for (std::int64_t b = 0; b < batch_size; ++b) {
    for (int h = 0; h < config.heads; ++h) {
      for (std::int64_t j = 0; j < len; ++j) {
        head_mask.set(b * config.heads + h, j, batch.padding_mask.at(b, j));
      }
    }
  }

  const double keep_prob = 1.0 - config.dropout;
  std::uint64_t dropout_site = 0;
  auto site_seed = [&]() { return mix_seed(seed, fnv1a64("dropout"), dropout_site++); };

  for (int layer = 0; layer < config.layers; ++layer) {
    const std::string prefix = "layer" + std::to_string(layer) + ".";
    auto normed = nn::layer_norm(x, p(prefix + "ln1.gamma"), p(prefix + "ln1.beta"));
    auto q = nn::split_heads(
        nn::linear(normed, p(prefix + "attn.wq"), p(prefix + "attn.bq")), config.heads);
    auto k = nn::split_heads(
        nn::linear(normed, p(prefix + "attn.wk"), p(prefix + "attn.bk")), config.heads);
    auto v = nn::split_heads(
        nn::linear(normed, p(prefix + "attn.wv"), p(prefix + "attn.bv")), config.heads);
    auto attended = nn::merge_heads(nn::scaled_dot_product_attention(q, k, v, head_mask),
                                    config.heads);
    auto projected = nn::linear(attended, p(prefix + "attn.wo"), p(prefix + "attn.bo"));
    x = nn::add(x, nn::dropout(projected, keep_prob, training, site_seed()));

    auto normed2 = nn::layer_norm(x, p(prefix + "ln2.gamma"), p(prefix + "ln2.beta"));
    auto hidden = nn::gelu(nn::linear(normed2, p(prefix + "ffn.w1"), p(prefix + "ffn.b1")));
    auto ffn_out = nn::linear(hidden, p(prefix + "ffn.w2"), p(prefix + "ffn.b2"));
    x = nn::add(x, nn::dropout(ffn_out, keep_prob, training, site_seed()));
  }
  return nn::layer_norm(x, p("final_ln.gamma"), p("final_ln.beta"));
}

template <typename T>
nn::Value<T> mlm_logits(Tape<T>& tape, const std::map<std::string, nn::Value<T>>& params,
                        nn::Value<T> token_outputs, const EncoderConfig& config) {
  (void)tape;
  const auto it = params.find("mlm.w");
  if (it == params.end()) throw MathError("mlm head parameters not present");
  if (it->second.data().shape[1] != config.vocab_size) {
    throw MathError("mlm head maps to " + std::to_string(it->second.data().shape[1]) +
                    " classes, expected reported vocabulary " + std::to_string(config.vocab_size));
  }
  return nn::linear(token_outputs, it->second, params.at("mlm.b"));
}

template <typename T>
nn::CrossEntropyResult<T> mlm_loss(Tape<T>& tape,
                                   const std::map<std::string, nn::Value<T>>& params,
                                   nn::Value<T> token_outputs, const MaskedBatch& masked,
                                   const EncoderConfig& config) {
  auto logits = mlm_logits(tape, params, token_outputs, config);
  std::vector<std::int32_t> targets(masked.target_ids.v.begin(), masked.target_ids.v.end());
  return nn::masked_cross_entropy(logits, targets, masked.loss_mask.v);
}

template <typename T>
nn::Value<T> classifier_head(Tape<T>& tape, const std::map<std::string, nn::Value<T>>& params,
                             nn::Value<T> pooled, bool training, std::uint64_t seed) {
  (void)tape;
  const auto it = params.find("head.w1");
  if (it == params.end()) throw MathError("classifier head parameters not present");
  if (pooled.data().shape.back() != it->second.data().shape[0]) {
    throw MathError("classifier head expects input dim " +
                    std::to_string(it->second.data().shape[0]) + ", got " +
                    std::to_string(pooled.data().shape.back()));
  }
  auto hidden = nn::tanh_act(nn::linear(pooled, it->second, params.at("head.b1")));
  auto dropped = nn::dropout(hidden, 0.8, training, mix_seed(seed, fnv1a64("head_dropout")));
  return nn::linear(dropped, params.at("head.w2"), params.at("head.b2"));
}

}  // namespace barcodelm
