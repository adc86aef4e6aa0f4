#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "barcodelm/tensor.hpp"
#include "barcodelm/vocab.hpp"

namespace barcodelm {

enum class TokenizeMode {
  kNonOverlapping,  // windows at offsets 0, k, 2k, ...; trailing fragment dropped
  kOverlapping,     // stride-1 windows
};

TokenizeMode tokenize_mode_from_string(const std::string& s);
const char* to_string(TokenizeMode mode);

// Windows containing any symbol outside {A,C,G,T} map to <UNK>. A sequence
// shorter than k yields an empty list.
std::vector<std::int32_t> tokenize(const std::string& sequence, const Vocabulary& vocab,
                                   TokenizeMode mode);

// Inverse of non-overlapping tokenization for UNK-free token lists.
std::string detokenize(const std::vector<std::int32_t>& ids, const Vocabulary& vocab);

struct TokenizedBatch {
  IntMatrix ids;             // batch x max_len, pad_id at padded positions
  BoolMatrix padding_mask;   // true = real token
  std::vector<std::int64_t> lengths;

  std::int64_t batch_size() const { return ids.rows; }
  std::int64_t max_len() const { return ids.cols; }
};

// Token lists are truncated to max_len and right-padded with the pad id.
// A sequence that tokenizes to zero tokens is an error naming its index.
TokenizedBatch encode_batch(const std::vector<std::string>& sequences, const Vocabulary& vocab,
                            TokenizeMode mode, std::int64_t max_len);

TokenizedBatch batch_from_token_lists(const std::vector<std::vector<std::int32_t>>& lists,
                                      const Vocabulary& vocab, std::int64_t max_len);

struct MaskedBatch {
  IntMatrix ids;         // <MASK> substituted at selected positions
  IntMatrix target_ids;  // originals
  BoolMatrix loss_mask;  // true where the loss applies
};

// Per row, selects exactly round(ratio * real_token_count) real positions
// (round half up) uniformly without replacement and replaces them with the
// mask id. Row streams derive from (seed, row), so the result is independent
// of any parallel schedule.
MaskedBatch apply_mlm_mask(const TokenizedBatch& batch, const Vocabulary& vocab, double ratio,
                           std::uint64_t seed);

std::int64_t mask_count_for(std::int64_t real_tokens, double ratio);

// One-hot over channel order (A,C,G,T,N); truncated or zero-padded to
// fixed_len rows. Real rows sum to 1, padded rows to 0.
template <typename T>
TensorData<T> one_hot_encode(const std::string& sequence, std::int64_t fixed_len);

extern template TensorData<float> one_hot_encode<float>(const std::string&, std::int64_t);
extern template TensorData<double> one_hot_encode<double>(const std::string&, std::int64_t);

}  // namespace barcodelm
