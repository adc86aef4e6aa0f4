#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sstream>

#include "barcodelm/errors.hpp"
#include "barcodelm/rng.hpp"
#include "barcodelm/tokenize.hpp"
#include "barcodelm/vocab.hpp"

using namespace barcodelm;

TEST_CASE("vocabulary sizes follow 4^k + 2") {
  CHECK(Vocabulary::build(4).reported_size() == 258);
  CHECK(Vocabulary::build(5).reported_size() == 1026);
  CHECK(Vocabulary::build(6).reported_size() == 4098);
  CHECK(Vocabulary::build(1).reported_size() == 6);
  CHECK_THROWS_AS(Vocabulary::build(0), ConfigError);
  CHECK_THROWS_AS(Vocabulary::build(9), ConfigError);
}

TEST_CASE("vocabulary id assignment is lexicographic with specials at the end") {
  auto vocab = Vocabulary::build(1);
  CHECK(vocab.id_of("A") == 0);
  CHECK(vocab.id_of("C") == 1);
  CHECK(vocab.id_of("G") == 2);
  CHECK(vocab.id_of("T") == 3);
  CHECK(vocab.mask_id() == 4);
  CHECK(vocab.unk_id() == 5);
  CHECK(vocab.pad_id() == 6);

  auto v4 = Vocabulary::build(4);
  CHECK(v4.id_of("AAAA") == 0);
  CHECK(v4.id_of("AAAC") == 1);
  CHECK(v4.id_of("TTTT") == 255);
  CHECK(v4.token_string(255) == "TTTT");
  CHECK(v4.token_string(v4.mask_id()) == "<MASK>");
}

TEST_CASE("vocabulary ids are a bijection on k-mers") {
  auto vocab = Vocabulary::build(3);
  for (std::int32_t id = 0; id < 64; ++id) {
    CHECK(vocab.id_of(vocab.token_string(id)) == id);
  }
}

TEST_CASE("vocabulary round-trips through its text form") {
  auto vocab = Vocabulary::build(4);
  std::ostringstream out;
  vocab.save(out);
  std::istringstream in(out.str());
  auto again = Vocabulary::load(in);
  CHECK(again.k() == 4);
  CHECK(again.reported_size() == 258);
}

TEST_CASE("non-overlapping tokenization windows and UNK rule") {
  auto vocab = Vocabulary::build(4);
  auto ids = tokenize("ACGTACGT", vocab, TokenizeMode::kNonOverlapping);
  REQUIRE(ids.size() == 2);
  CHECK(ids[0] == vocab.id_of("ACGT"));
  CHECK(ids[1] == vocab.id_of("ACGT"));

  ids = tokenize("ACGTNNGT", vocab, TokenizeMode::kNonOverlapping);
  REQUIRE(ids.size() == 2);
  CHECK(ids[0] == vocab.id_of("ACGT"));
  CHECK(ids[1] == vocab.unk_id());

  // trailing fragment dropped
  CHECK(tokenize("ACGTAC", vocab, TokenizeMode::kNonOverlapping).size() == 1);
  // shorter than k
  CHECK(tokenize("ACG", vocab, TokenizeMode::kNonOverlapping).empty());
}

TEST_CASE("overlapping tokenization slides by one") {
  auto vocab = Vocabulary::build(4);
  auto ids = tokenize("ACGTAC", vocab, TokenizeMode::kOverlapping);
  REQUIRE(ids.size() == 3);
  CHECK(ids[0] == vocab.id_of("ACGT"));
  CHECK(ids[1] == vocab.id_of("CGTA"));
  CHECK(ids[2] == vocab.id_of("GTAC"));
}

TEST_CASE("token counts match the window arithmetic") {
  Rng rng(5);
  const char bases[] = {'A', 'C', 'G', 'T'};
  for (int trial = 0; trial < 20; ++trial) {
    const int k = 1 + static_cast<int>(rng.bounded(6));
    const std::size_t len = k + rng.bounded(200);
    std::string seq;
    for (std::size_t i = 0; i < len; ++i) seq += bases[rng.bounded(4)];
    auto vocab = Vocabulary::build(k);
    CHECK(tokenize(seq, vocab, TokenizeMode::kNonOverlapping).size() == len / k);
    CHECK(tokenize(seq, vocab, TokenizeMode::kOverlapping).size() == len - k + 1);
    // detokenize reconstructs the covered prefix
    auto ids = tokenize(seq, vocab, TokenizeMode::kNonOverlapping);
    CHECK(detokenize(ids, vocab) == seq.substr(0, (len / k) * k));
  }
}

TEST_CASE("encode_batch pads to max_len and masks correctly") {
  auto vocab = Vocabulary::build(4);
  auto batch = encode_batch({"ACGTACGT", "ACGT"}, vocab, TokenizeMode::kNonOverlapping, 3);
  CHECK(batch.ids.rows == 2);
  CHECK(batch.ids.cols == 3);
  CHECK(batch.lengths == std::vector<std::int64_t>{2, 1});
  CHECK(batch.padding_mask.at(0, 0));
  CHECK(batch.padding_mask.at(0, 1));
  CHECK_FALSE(batch.padding_mask.at(0, 2));
  CHECK(batch.ids.at(0, 2) == vocab.pad_id());
  CHECK_FALSE(batch.padding_mask.at(1, 1));
  CHECK(batch.ids.at(1, 1) == vocab.pad_id());
}

TEST_CASE("a 658-bp barcode fits the paper-scale budget at k=4") {
  std::string seq;
  Rng rng(1);
  const char bases[] = {'A', 'C', 'G', 'T'};
  for (int i = 0; i < 658; ++i) seq += bases[rng.bounded(4)];
  auto vocab = Vocabulary::build(4);
  auto ids = tokenize(seq, vocab, TokenizeMode::kNonOverlapping);
  CHECK(ids.size() == 164);
  CHECK(ids.size() <= 512);
}

TEST_CASE("encode_batch rejects zero-token sequences, allows empty batch") {
  auto vocab = Vocabulary::build(4);
  CHECK_THROWS_WITH_AS(
      encode_batch({"ACGTACGT", "AC"}, vocab, TokenizeMode::kNonOverlapping, 8),
      doctest::Contains("index 1"), DataError);
  auto batch = encode_batch({}, vocab, TokenizeMode::kNonOverlapping, 8);
  CHECK(batch.ids.rows == 0);
}

TEST_CASE("mlm masking hits the exact per-row count and only real tokens") {
  auto vocab = Vocabulary::build(4);
  Rng rng(123);
  const char bases[] = {'A', 'C', 'G', 'T'};
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::string> seqs;
    const std::size_t rows = 1 + rng.bounded(6);
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t len = 4 + rng.bounded(120);
      std::string s;
      for (std::size_t i = 0; i < len; ++i) s += bases[rng.bounded(4)];
      seqs.push_back(s);
    }
    auto batch = encode_batch(seqs, vocab, TokenizeMode::kNonOverlapping, 32);
    auto masked = apply_mlm_mask(batch, vocab, 0.5, trial);
    for (std::int64_t r = 0; r < batch.ids.rows; ++r) {
      std::int64_t n_masked = 0;
      for (std::int64_t c = 0; c < batch.ids.cols; ++c) {
        if (masked.loss_mask.at(r, c)) {
          ++n_masked;
          CHECK(batch.padding_mask.at(r, c));           // never a pad
          CHECK(masked.ids.at(r, c) == vocab.mask_id());  // replaced
        } else {
          CHECK(masked.ids.at(r, c) == batch.ids.at(r, c));  // untouched
        }
        CHECK(masked.target_ids.at(r, c) == batch.ids.at(r, c));
      }
      CHECK(n_masked == mask_count_for(batch.lengths[static_cast<std::size_t>(r)], 0.5));
    }
  }
}

TEST_CASE("mlm masking is deterministic given the seed") {
  auto vocab = Vocabulary::build(4);
  auto batch = encode_batch({"ACGTACGTACGTACGT", "ACGTACGT"}, vocab,
                            TokenizeMode::kNonOverlapping, 8);
  auto a = apply_mlm_mask(batch, vocab, 0.5, 7);
  auto b = apply_mlm_mask(batch, vocab, 0.5, 7);
  CHECK(a.ids.v == b.ids.v);
  CHECK(a.loss_mask.v == b.loss_mask.v);
  auto c = apply_mlm_mask(batch, vocab, 0.5, 8);
  CHECK(a.loss_mask.v != c.loss_mask.v);
}

TEST_CASE("mlm masking at ratio 1 masks every real token") {
  auto vocab = Vocabulary::build(2);
  auto batch = encode_batch({"ACGTAC", "AC"}, vocab, TokenizeMode::kNonOverlapping, 4);
  auto masked = apply_mlm_mask(batch, vocab, 1.0, 3);
  for (std::int64_t r = 0; r < batch.ids.rows; ++r) {
    for (std::int64_t c = 0; c < batch.ids.cols; ++c) {
      CHECK(masked.loss_mask.at(r, c) == batch.padding_mask.at(r, c));
    }
  }
}

TEST_CASE("mask_count_for rounds half up") {
  CHECK(mask_count_for(164, 0.5) == 82);
  CHECK(mask_count_for(3, 0.5) == 2);   // 1.5 rounds up
  CHECK(mask_count_for(1, 0.5) == 1);   // 0.5 rounds up
  CHECK(mask_count_for(0, 0.5) == 0);
}

TEST_CASE("one-hot encoding over A,C,G,T,N with padding rows") {
  auto m = one_hot_encode<double>("AC", 3);
  REQUIRE(m.shape == std::vector<std::int64_t>{3, 5});
  CHECK(m.at2(0, 0) == 1.0);
  CHECK(m.at2(1, 1) == 1.0);
  for (int c = 0; c < 5; ++c) CHECK(m.at2(2, c) == 0.0);

  auto n = one_hot_encode<double>("N", 1);
  CHECK(n.at2(0, 4) == 1.0);

  // row sums are 0 or 1, truncation applies
  auto t = one_hot_encode<double>("ACGTN", 4);
  for (std::int64_t r = 0; r < 4; ++r) {
    double sum = 0;
    for (int c = 0; c < 5; ++c) sum += t.at2(r, c);
    CHECK(sum == 1.0);
  }
}
