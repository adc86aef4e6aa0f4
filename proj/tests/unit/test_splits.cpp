#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <set>
#include <sstream>
#include <string>

#include "barcodelm/errors.hpp"
#include "barcodelm/splits.hpp"

using namespace barcodelm;

namespace {

BarcodeRecord specimen(std::string id, std::string genus, std::string species,
                       std::string seq = "ACGTACGT") {
  BarcodeRecord r;
  r.record_id = std::move(id);
  r.sequence = std::move(seq);
  r.rank(Rank::kGenus) = std::move(genus);
  r.rank(Rank::kSpecies) = std::move(species);
  return r;
}

// n_genera genera, each with `species_per_genus` species of `per_species`
// specimens, plus optional rare species.
std::vector<BarcodeRecord> synthetic_corpus(int n_genera, int species_per_genus, int per_species,
                                            int rare_species_per_genus = 0, int rare_count = 5) {
  std::vector<BarcodeRecord> records;
  int counter = 0;
  for (int g = 0; g < n_genera; ++g) {
    const std::string genus = "G" + std::to_string(g);
    for (int s = 0; s < species_per_genus; ++s) {
      const std::string species = genus + "_sp" + std::to_string(s);
      for (int i = 0; i < per_species; ++i) {
        records.push_back(specimen("rec" + std::to_string(counter++), genus, species));
      }
    }
    for (int s = 0; s < rare_species_per_genus; ++s) {
      const std::string species = genus + "_rare" + std::to_string(s);
      for (int i = 0; i < rare_count; ++i) {
        records.push_back(specimen("rec" + std::to_string(counter++), genus, species));
      }
    }
  }
  return records;
}

std::set<std::string> to_set(const std::vector<std::string>& v) { return {v.begin(), v.end()}; }

}  // namespace

TEST_CASE("largest remainder apportionment") {
  CHECK(largest_remainder_counts(90, {0.7, 0.2, 0.1}) == std::vector<std::size_t>{63, 18, 9});
  CHECK(largest_remainder_counts(1, {0.7, 0.2, 0.1}) == std::vector<std::size_t>{1, 0, 0});
  CHECK(largest_remainder_counts(2, {0.7, 0.2, 0.1}) == std::vector<std::size_t>{1, 1, 0});
  CHECK(largest_remainder_counts(10, {0.8, 0.2}) == std::vector<std::size_t>{8, 2});
}

TEST_CASE("taxonomic splits: per-genus bounds and 70/20/10 sizes") {
  // 3 genera x 1 species x 30 barcodes
  auto records = synthetic_corpus(3, 1, 30);
  SplitParams params;
  params.n_genera = 3;
  auto spec = make_taxonomic_splits(records, params, 7);

  const std::size_t finetune_total = spec.finetune_train_ids.size() +
                                     spec.finetune_val_ids.size() +
                                     spec.finetune_test_ids.size();
  CHECK(finetune_total == 90);  // each genus contributes all 30 (20 <= 30 <= 50)
  CHECK(spec.finetune_train_ids.size() == 63);
  CHECK(spec.finetune_test_ids.size() == 18);
  CHECK(spec.finetune_val_ids.size() == 9);
  CHECK(spec.unseen_ids.empty());
  CHECK(spec.pretrain_ids.empty());
}

TEST_CASE("taxonomic splits: five sets are pairwise disjoint, rare species only unseen") {
  auto records = synthetic_corpus(4, 2, 25, /*rare_species_per_genus=*/2, /*rare_count=*/5);
  SplitParams params;
  params.n_genera = 4;
  auto spec = make_taxonomic_splits(records, params, 11);

  const std::vector<const std::vector<std::string>*> sets = {
      &spec.pretrain_ids, &spec.finetune_train_ids, &spec.finetune_val_ids,
      &spec.finetune_test_ids, &spec.unseen_ids};
  std::set<std::string> all;
  std::size_t total = 0;
  for (const auto* s : sets) {
    auto ss = to_set(*s);
    CHECK(ss.size() == s->size());
    all.insert(ss.begin(), ss.end());
    total += s->size();
  }
  CHECK(all.size() == total);  // pairwise disjoint

  // Rare species (5 < 20 barcodes) never appear in fine-tuning or pretraining.
  std::set<std::string> unseen_species;
  std::map<std::string, const BarcodeRecord*> by_id;
  for (const auto& r : records) by_id[r.record_id] = &r;
  for (const auto& id : spec.unseen_ids) {
    unseen_species.insert(by_id[id]->species_key());
    CHECK(by_id[id]->species_key().find("rare") != std::string::npos);
  }
  for (const auto* s : {&spec.finetune_train_ids, &spec.finetune_val_ids,
                        &spec.finetune_test_ids, &spec.pretrain_ids}) {
    for (const auto& id : *s) {
      CHECK(unseen_species.count(by_id[id]->species_key()) == 0);
    }
  }
  // All rare records of this corpus belong to species capped at 20/genus: 2x5=10 <= 20.
  CHECK(spec.unseen_ids.size() == 4 * 2 * 5);
}

TEST_CASE("taxonomic splits: per-genus cap and unseen cap are honored") {
  auto records = synthetic_corpus(2, 3, 30, /*rare_species_per_genus=*/6, /*rare_count=*/5);
  SplitParams params;
  params.n_genera = 2;
  auto spec = make_taxonomic_splits(records, params, 3);
  // Pool per genus = 90 > 50, so each contributes exactly 50.
  const std::size_t finetune_total = spec.finetune_train_ids.size() +
                                     spec.finetune_val_ids.size() +
                                     spec.finetune_test_ids.size();
  CHECK(finetune_total == 100);
  // 30 rare per genus but capped at 20.
  CHECK(spec.unseen_ids.size() == 40);
  // Leftover finetune-pool records go to pretraining (rare species excluded).
  CHECK(spec.pretrain_ids.size() == 2 * 90 - 100);
}

TEST_CASE("taxonomic splits: determinism and seed sensitivity") {
  auto records = synthetic_corpus(5, 2, 25, 1, 5);
  SplitParams params;
  params.n_genera = 3;
  auto a = make_taxonomic_splits(records, params, 42);
  auto b = make_taxonomic_splits(records, params, 42);
  CHECK(a.pretrain_ids == b.pretrain_ids);
  CHECK(a.finetune_train_ids == b.finetune_train_ids);
  CHECK(a.finetune_val_ids == b.finetune_val_ids);
  CHECK(a.finetune_test_ids == b.finetune_test_ids);
  CHECK(a.unseen_ids == b.unseen_ids);
  auto c = make_taxonomic_splits(records, params, 43);
  CHECK(a.finetune_train_ids != c.finetune_train_ids);
}

TEST_CASE("taxonomic splits: too few eligible genera errors with shortfall") {
  auto records = synthetic_corpus(2, 1, 30);
  SplitParams params;
  params.n_genera = 5;
  CHECK_THROWS_AS(make_taxonomic_splits(records, params, 1), DataError);
}

TEST_CASE("taxonomic splits: undersized genus is skipped with a warning") {
  auto records = synthetic_corpus(3, 1, 30);
  // Genus with only 10 barcodes of one species: ineligible.
  for (int i = 0; i < 10; ++i) {
    records.push_back(specimen("tiny" + std::to_string(i), "Gtiny", "Gtiny_sp0"));
  }
  SplitParams params;
  params.n_genera = 3;
  auto spec = make_taxonomic_splits(records, params, 5);
  REQUIRE(spec.warnings.size() == 1);
  CHECK(spec.warnings[0].find("Gtiny") != std::string::npos);
}

TEST_CASE("split spec round-trips through text form") {
  auto records = synthetic_corpus(3, 2, 25, 1, 5);
  SplitParams params;
  params.n_genera = 3;
  auto spec = make_taxonomic_splits(records, params, 19);
  std::ostringstream out;
  write_split_spec(out, spec);
  std::istringstream in(out.str());
  auto again = read_split_spec(in);
  CHECK(again.seed == spec.seed);
  CHECK(again.pretrain_ids == spec.pretrain_ids);
  CHECK(again.finetune_train_ids == spec.finetune_train_ids);
  CHECK(again.finetune_val_ids == spec.finetune_val_ids);
  CHECK(again.finetune_test_ids == spec.finetune_test_ids);
  CHECK(again.unseen_ids == spec.unseen_ids);
}

TEST_CASE("zsl splits: 100 species gives 10/9/81 and exactly-one-split membership") {
  std::vector<BarcodeRecord> records;
  int counter = 0;
  for (int s = 0; s < 100; ++s) {
    for (int i = 0; i < 7; ++i) {
      records.push_back(specimen("z" + std::to_string(counter++), "G" + std::to_string(s % 10),
                                 "sp" + std::to_string(s)));
    }
  }
  auto spec = make_zsl_splits(records, ZslSplitParams{}, 99);
  CHECK(spec.unseen_test_species.size() == 10);
  CHECK(spec.unseen_val_species.size() == 9);
  CHECK(spec.seen_species.size() == 81);

  std::set<std::string> all;
  std::size_t total = 0;
  for (const auto* s : {&spec.seen_train_ids, &spec.seen_test_ids, &spec.unseen_val_ids,
                        &spec.unseen_test_ids}) {
    all.insert(s->begin(), s->end());
    total += s->size();
  }
  CHECK(total == records.size());
  CHECK(all.size() == total);

  auto again = make_zsl_splits(records, ZslSplitParams{}, 99);
  CHECK(again.seen_train_ids == spec.seen_train_ids);
  CHECK(again.unseen_test_ids == spec.unseen_test_ids);
}

TEST_CASE("zsl splits: fewer than 10 species is an error") {
  std::vector<BarcodeRecord> records;
  for (int s = 0; s < 9; ++s) records.push_back(specimen("r" + std::to_string(s), "G", "sp" + std::to_string(s)));
  CHECK_THROWS_AS(make_zsl_splits(records, ZslSplitParams{}, 1), DataError);
}
