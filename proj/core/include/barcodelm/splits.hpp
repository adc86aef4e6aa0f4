#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "barcodelm/records.hpp"

namespace barcodelm {

struct SplitParams {
  std::size_t n_genera = 0;
  std::size_t per_genus_min = 20;
  std::size_t per_genus_max = 50;
  std::size_t unseen_cap = 20;
  double train_frac = 0.7;
  double test_frac = 0.2;
  double val_frac = 0.1;
};

// Disjoint record-id sets for pretraining, supervised fine-tuning and the
// unseen-species evaluation pool.
struct SplitSpec {
  std::vector<std::string> pretrain_ids;
  std::vector<std::string> finetune_train_ids;
  std::vector<std::string> finetune_val_ids;
  std::vector<std::string> finetune_test_ids;
  std::vector<std::string> unseen_ids;
  std::uint64_t seed = 0;
  SplitParams params;
  std::vector<std::string> warnings;  // e.g. genera skipped for being too small
};

// Draws the fine-tuning subset from n_genera genera (between per_genus_min
// and per_genus_max barcodes each, species with at least per_genus_min
// barcodes overall), splits it train/test/val stratified by species with
// largest-remainder rounding, builds the unseen pool from species rarer than
// per_genus_min (capped at unseen_cap per genus), and assigns every other
// record to pretraining unless its species occurs in the unseen pool.
// Deterministic in (records, params, seed).
SplitSpec make_taxonomic_splits(const std::vector<BarcodeRecord>& records,
                                const SplitParams& params, std::uint64_t seed);

struct ZslSplitParams {
  double unseen_test_frac = 0.10;
  double unseen_val_frac = 0.10;
  double seen_train_frac = 0.80;
};

struct ZslSplitSpec {
  std::vector<std::string> seen_train_ids;
  std::vector<std::string> seen_test_ids;
  std::vector<std::string> unseen_val_ids;
  std::vector<std::string> unseen_test_ids;
  std::vector<std::string> seen_species;
  std::vector<std::string> unseen_val_species;
  std::vector<std::string> unseen_test_species;
  std::uint64_t seed = 0;
  ZslSplitParams params;
};

// Holds out unseen_test_frac of species for the test set and unseen_val_frac
// of the remainder for validation; specimens of the remaining (seen) species
// are split seen_train_frac / (1 - seen_train_frac) per species. Every
// specimen lands in exactly one split.
ZslSplitSpec make_zsl_splits(const std::vector<BarcodeRecord>& records,
                             const ZslSplitParams& params, std::uint64_t seed);

// `record_id<TAB>split_name` lines behind a header comment that records the
// seed and parameters.
void write_split_spec(std::ostream& out, const SplitSpec& spec);
SplitSpec read_split_spec(std::istream& in);

void write_zsl_split_spec(std::ostream& out, const ZslSplitSpec& spec);
ZslSplitSpec read_zsl_split_spec(std::istream& in);

// Largest-remainder apportionment of n items over fractions (ties favor the
// earlier fraction). Exposed for tests.
std::vector<std::size_t> largest_remainder_counts(std::size_t n,
                                                  const std::vector<double>& fractions);

}  // namespace barcodelm
