#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

namespace barcodelm {

// k-mer vocabulary: the 4^k strings over {A,C,G,T} in lexicographic order,
// then <MASK> and <UNK>. A padding id sits one past the reported size; it is
// never attended, predicted, or counted.
class Vocabulary {
 public:
  static Vocabulary build(int k);

  int k() const { return k_; }
  // 4^k + 2.
  std::int64_t reported_size() const { return kmer_count_ + 2; }
  // reported_size() + 1: embedding tables need a row for padding.
  std::int64_t embedding_rows() const { return kmer_count_ + 3; }

  std::int32_t mask_id() const { return static_cast<std::int32_t>(kmer_count_); }
  std::int32_t unk_id() const { return static_cast<std::int32_t>(kmer_count_ + 1); }
  std::int32_t pad_id() const { return static_cast<std::int32_t>(kmer_count_ + 2); }

  // Id of a k-length window over {A,C,G,T}; unk_id() if any other symbol
  // occurs. `window` must have exactly k characters.
  std::int32_t window_id(const char* window) const;
  std::int32_t id_of(const std::string& token) const;
  std::string token_string(std::int32_t id) const;

  void save(std::ostream& out) const;
  static Vocabulary load(std::istream& in);

 private:
  explicit Vocabulary(int k);

  int k_ = 0;
  std::int64_t kmer_count_ = 0;
};

}  // namespace barcodelm
