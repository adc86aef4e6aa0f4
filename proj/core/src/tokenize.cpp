#include "barcodelm/tokenize.hpp"

#include <cmath>

#include "barcodelm/errors.hpp"
#include "barcodelm/rng.hpp"

namespace barcodelm {

TokenizeMode tokenize_mode_from_string(const std::string& s) {
  if (s == "non-overlapping" || s == "nonoverlapping") return TokenizeMode::kNonOverlapping;
  if (s == "overlapping") return TokenizeMode::kOverlapping;
  throw ConfigError("unknown tokenize mode '" + s +
                    "' (expected non-overlapping or overlapping)");
}

const char* to_string(TokenizeMode mode) {
  return mode == TokenizeMode::kNonOverlapping ? "non-overlapping" : "overlapping";
}

std::vector<std::int32_t> tokenize(const std::string& sequence, const Vocabulary& vocab,
                                   TokenizeMode mode) {
  const std::size_t k = static_cast<std::size_t>(vocab.k());
  std::vector<std::int32_t> out;
  if (sequence.size() < k) return out;
  const std::size_t stride = mode == TokenizeMode::kNonOverlapping ? k : 1;
  out.reserve((sequence.size() - k) / stride + 1);
  for (std::size_t off = 0; off + k <= sequence.size(); off += stride) {
    out.push_back(vocab.window_id(sequence.data() + off));
  }
  return out;
}

std::string detokenize(const std::vector<std::int32_t>& ids, const Vocabulary& vocab) {
  std::string out;
  out.reserve(ids.size() * static_cast<std::size_t>(vocab.k()));
  for (std::int32_t id : ids) out += vocab.token_string(id);
  return out;
}

TokenizedBatch batch_from_token_lists(const std::vector<std::vector<std::int32_t>>& lists,
                                      const Vocabulary& vocab, std::int64_t max_len) {
  if (max_len <= 0) throw ConfigError("max_len must be positive");
  TokenizedBatch batch;
  const std::int64_t n = static_cast<std::int64_t>(lists.size());
  batch.ids = IntMatrix(n, max_len, vocab.pad_id());
  batch.padding_mask = BoolMatrix(n, max_len, false);
  batch.lengths.resize(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    const auto& tokens = lists[static_cast<std::size_t>(i)];
    if (tokens.empty()) {
      throw DataError("sequence at index " + std::to_string(i) + " tokenizes to zero tokens");
    }
    const std::int64_t len = std::min<std::int64_t>(max_len, static_cast<std::int64_t>(tokens.size()));
    batch.lengths[static_cast<std::size_t>(i)] = len;
    for (std::int64_t j = 0; j < len; ++j) {
      batch.ids.at(i, j) = tokens[static_cast<std::size_t>(j)];
      batch.padding_mask.set(i, j, true);
    }
  }
  return batch;
}

TokenizedBatch encode_batch(const std::vector<std::string>& sequences, const Vocabulary& vocab,
                            TokenizeMode mode, std::int64_t max_len) {
  std::vector<std::vector<std::int32_t>> lists;
  lists.reserve(sequences.size());
  for (const auto& s : sequences) lists.push_back(tokenize(s, vocab, mode));
  return batch_from_token_lists(lists, vocab, max_len);
}

std::int64_t mask_count_for(std::int64_t real_tokens, double ratio) {
  // round half up, per-row exact
  return static_cast<std::int64_t>(std::floor(ratio * static_cast<double>(real_tokens) + 0.5));
}

MaskedBatch apply_mlm_mask(const TokenizedBatch& batch, const Vocabulary& vocab, double ratio,
                           std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio <= 1.0)) {
    throw ConfigError("mask ratio must be in (0, 1], got " + std::to_string(ratio));
  }
  MaskedBatch out;
  out.ids = batch.ids;
  out.target_ids = batch.ids;
  out.loss_mask = BoolMatrix(batch.ids.rows, batch.ids.cols, false);

  for (std::int64_t row = 0; row < batch.ids.rows; ++row) {
    const std::int64_t real = batch.lengths[static_cast<std::size_t>(row)];
    const std::int64_t want = mask_count_for(real, ratio);
    if (want == 0) continue;
    // Partial Fisher-Yates over the real positions of this row.
    std::vector<std::int64_t> positions(static_cast<std::size_t>(real));
    for (std::int64_t j = 0; j < real; ++j) positions[static_cast<std::size_t>(j)] = j;
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(row)));
    for (std::int64_t i = 0; i < want; ++i) {
      const std::int64_t j =
          i + static_cast<std::int64_t>(rng.bounded(static_cast<std::uint64_t>(real - i)));
      std::swap(positions[static_cast<std::size_t>(i)], positions[static_cast<std::size_t>(j)]);
      const std::int64_t pos = positions[static_cast<std::size_t>(i)];
      out.ids.at(row, pos) = vocab.mask_id();
      out.loss_mask.set(row, pos, true);
    }
  }
  return out;
}

template <typename T>
TensorData<T> one_hot_encode(const std::string& sequence, std::int64_t fixed_len) {
  TensorData<T> out({fixed_len, 5});
  const std::int64_t n = std::min<std::int64_t>(fixed_len, static_cast<std::int64_t>(sequence.size()));
  for (std::int64_t i = 0; i < n; ++i) {
    int channel;
    switch (sequence[static_cast<std::size_t>(i)]) {
      case 'A': channel = 0; break;
      case 'C': channel = 1; break;
      case 'G': channel = 2; break;
      case 'T': channel = 3; break;
      default: channel = 4; break;
    }
    out.at2(i, channel) = T(1);
  }
  return out;
}

template TensorData<float> one_hot_encode<float>(const std::string&, std::int64_t);
template TensorData<double> one_hot_encode<double>(const std::string&, std::int64_t);

}  // namespace barcodelm
