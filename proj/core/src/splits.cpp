#include "barcodelm/splits.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "barcodelm/errors.hpp"
#include "barcodelm/rng.hpp"

namespace barcodelm {

namespace {

constexpr const char* kSplitNames[5] = {"pretrain", "train", "val", "test", "unseen"};

std::string format_fraction(double f) {
  std::ostringstream os;
  os << f;
  return os.str();
}

}  // namespace

std::vector<std::size_t> largest_remainder_counts(std::size_t n,
                                                  const std::vector<double>& fractions) {
  const std::size_t m = fractions.size();
  std::vector<std::size_t> counts(m, 0);
  std::vector<std::pair<double, std::size_t>> remainders(m);
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const double quota = static_cast<double>(n) * fractions[i];
    counts[i] = static_cast<std::size_t>(std::floor(quota));
    remainders[i] = {quota - std::floor(quota), i};
    assigned += counts[i];
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) {
    counts[remainders[i % m].second] += 1;
  }
  return counts;
}

SplitSpec make_taxonomic_splits(const std::vector<BarcodeRecord>& records,
                                const SplitParams& params, std::uint64_t seed) {
  if (params.n_genera == 0) throw ConfigError("n_genera must be positive");
  const double frac_sum = params.train_frac + params.test_frac + params.val_frac;
  if (std::abs(frac_sum - 1.0) > 1e-9) {
    throw ConfigError("split fractions must sum to 1, got " + format_fraction(frac_sum));
  }

  SplitSpec spec;
  spec.seed = seed;
  spec.params = params;

  std::unordered_map<std::string, std::size_t> index_of_id;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!index_of_id.emplace(records[i].record_id, i).second) {
      throw DataError("duplicate record id '" + records[i].record_id + "' in corpus");
    }
  }

  // Species totals over the whole corpus decide rare vs. fine-tunable.
  std::unordered_map<std::string, std::size_t> species_total;
  for (const auto& rec : records) {
    if (rec.has_rank(Rank::kGenus) && rec.has_rank(Rank::kSpecies)) {
      ++species_total[rec.species_key()];
    }
  }

  // Genus pools, keyed by genus name in sorted order for determinism.
  std::map<std::string, std::vector<std::size_t>> finetune_pool;  // species >= min
  std::map<std::string, std::vector<std::size_t>> rare_pool;      // species < min
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& rec = records[i];
    if (!rec.has_rank(Rank::kGenus) || !rec.has_rank(Rank::kSpecies)) continue;
    if (species_total[rec.species_key()] >= params.per_genus_min) {
      finetune_pool[*rec.rank(Rank::kGenus)].push_back(i);
    } else {
      rare_pool[*rec.rank(Rank::kGenus)].push_back(i);
    }
  }

  std::set<std::string> all_genera;
  for (const auto& [genus, pool] : finetune_pool) all_genera.insert(genus);
  for (const auto& [genus, pool] : rare_pool) all_genera.insert(genus);

  std::vector<std::string> eligible;
  for (const auto& genus : all_genera) {
    const auto it = finetune_pool.find(genus);
    const std::size_t usable = it == finetune_pool.end() ? 0 : it->second.size();
    if (usable >= params.per_genus_min) {
      eligible.push_back(genus);
    } else {
      spec.warnings.push_back("genus '" + genus + "' skipped: only " +
                              std::to_string(usable) + " usable barcodes (< " +
                              std::to_string(params.per_genus_min) + ")");
    }
  }
  if (eligible.size() < params.n_genera) {
    throw DataError("requested " + std::to_string(params.n_genera) +
                    " genera but only " + std::to_string(eligible.size()) +
                    " are eligible (shortfall of " +
                    std::to_string(params.n_genera - eligible.size()) + ")");
  }

  Rng genus_rng(mix_seed(seed, fnv1a64("genera")));
  genus_rng.shuffle(eligible);
  eligible.resize(params.n_genera);
  std::sort(eligible.begin(), eligible.end());

  // Per-genus subsample to at most per_genus_max barcodes.
  std::vector<std::size_t> finetune_indices;
  for (const auto& genus : eligible) {
    auto pool = finetune_pool[genus];
    Rng rng(mix_seed(seed, fnv1a64("genus"), fnv1a64(genus)));
    rng.shuffle(pool);
    const std::size_t take = std::min(pool.size(), params.per_genus_max);
    finetune_indices.insert(finetune_indices.end(), pool.begin(), pool.begin() + take);
  }
  std::sort(finetune_indices.begin(), finetune_indices.end());

  // Stratified split by species, largest-remainder over (train, test, val).
  std::map<std::string, std::vector<std::size_t>> by_species;
  for (std::size_t idx : finetune_indices) by_species[records[idx].species_key()].push_back(idx);

  for (auto& [species, members] : by_species) {
    Rng rng(mix_seed(seed, fnv1a64("stratify"), fnv1a64(species)));
    rng.shuffle(members);
    const auto counts = largest_remainder_counts(
        members.size(), {params.train_frac, params.test_frac, params.val_frac});
    std::size_t pos = 0;
    for (std::size_t i = 0; i < counts[0]; ++i) spec.finetune_train_ids.push_back(records[members[pos++]].record_id);
    for (std::size_t i = 0; i < counts[1]; ++i) spec.finetune_test_ids.push_back(records[members[pos++]].record_id);
    for (std::size_t i = 0; i < counts[2]; ++i) spec.finetune_val_ids.push_back(records[members[pos++]].record_id);
  }

  // Unseen pool: rare species from the selected genera, capped per genus.
  std::set<std::string> unseen_species;
  for (const auto& genus : eligible) {
    const auto it = rare_pool.find(genus);
    if (it == rare_pool.end()) continue;
    auto pool = it->second;
    Rng rng(mix_seed(seed, fnv1a64("unseen"), fnv1a64(genus)));
    rng.shuffle(pool);
    const std::size_t take = std::min(pool.size(), params.unseen_cap);
    for (std::size_t i = 0; i < take; ++i) {
      spec.unseen_ids.push_back(records[pool[i]].record_id);
      unseen_species.insert(records[pool[i]].species_key());
    }
  }

  // Pretraining keeps everything else, minus all records of unseen species.
  std::unordered_set<std::string> taken;
  for (const auto* ids : {&spec.finetune_train_ids, &spec.finetune_val_ids,
                          &spec.finetune_test_ids, &spec.unseen_ids}) {
    taken.insert(ids->begin(), ids->end());
  }
  for (const auto& rec : records) {
    if (taken.count(rec.record_id)) continue;
    if (rec.has_rank(Rank::kGenus) && rec.has_rank(Rank::kSpecies) &&
        unseen_species.count(rec.species_key())) {
      continue;
    }
    spec.pretrain_ids.push_back(rec.record_id);
  }

  std::sort(spec.finetune_train_ids.begin(), spec.finetune_train_ids.end());
  std::sort(spec.finetune_val_ids.begin(), spec.finetune_val_ids.end());
  std::sort(spec.finetune_test_ids.begin(), spec.finetune_test_ids.end());
  std::sort(spec.unseen_ids.begin(), spec.unseen_ids.end());
  return spec;
}

ZslSplitSpec make_zsl_splits(const std::vector<BarcodeRecord>& records,
                             const ZslSplitParams& params, std::uint64_t seed) {
  ZslSplitSpec spec;
  spec.seed = seed;
  spec.params = params;

  std::map<std::string, std::vector<std::size_t>> by_species;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!records[i].has_rank(Rank::kSpecies)) continue;
    by_species[records[i].species_key()].push_back(i);
  }
  const std::size_t n_species = by_species.size();
  if (n_species < 10) {
    throw DataError("zero-shot split needs at least 10 species, got " +
                    std::to_string(n_species));
  }

  std::vector<std::string> species;
  species.reserve(n_species);
  for (const auto& [key, members] : by_species) species.push_back(key);
  Rng rng(mix_seed(seed, fnv1a64("zsl_species")));
  rng.shuffle(species);

  const std::size_t n_unseen_test = static_cast<std::size_t>(
      std::llround(params.unseen_test_frac * static_cast<double>(n_species)));
  const std::size_t n_remaining = n_species - n_unseen_test;
  const std::size_t n_unseen_val = static_cast<std::size_t>(
      std::llround(params.unseen_val_frac * static_cast<double>(n_remaining)));

  spec.unseen_test_species.assign(species.begin(), species.begin() + n_unseen_test);
  spec.unseen_val_species.assign(species.begin() + n_unseen_test,
                                 species.begin() + n_unseen_test + n_unseen_val);
  spec.seen_species.assign(species.begin() + n_unseen_test + n_unseen_val, species.end());
  std::sort(spec.unseen_test_species.begin(), spec.unseen_test_species.end());
  std::sort(spec.unseen_val_species.begin(), spec.unseen_val_species.end());
  std::sort(spec.seen_species.begin(), spec.seen_species.end());

  for (const auto& sp : spec.unseen_test_species) {
    for (std::size_t idx : by_species[sp]) {
      spec.unseen_test_ids.push_back(records[idx].record_id);
    }
  }
  for (const auto& sp : spec.unseen_val_species) {
    for (std::size_t idx : by_species[sp]) {
      spec.unseen_val_ids.push_back(records[idx].record_id);
    }
  }
  for (const auto& sp : spec.seen_species) {
    auto members = by_species[sp];
    Rng srng(mix_seed(seed, fnv1a64("zsl_seen"), fnv1a64(sp)));
    srng.shuffle(members);
    const auto counts = largest_remainder_counts(
        members.size(), {params.seen_train_frac, 1.0 - params.seen_train_frac});
    for (std::size_t i = 0; i < counts[0]; ++i) {
      spec.seen_train_ids.push_back(records[members[i]].record_id);
    }
    for (std::size_t i = counts[0]; i < members.size(); ++i) {
      spec.seen_test_ids.push_back(records[members[i]].record_id);
    }
  }

  std::sort(spec.seen_train_ids.begin(), spec.seen_train_ids.end());
  std::sort(spec.seen_test_ids.begin(), spec.seen_test_ids.end());
  std::sort(spec.unseen_val_ids.begin(), spec.unseen_val_ids.end());
  std::sort(spec.unseen_test_ids.begin(), spec.unseen_test_ids.end());
  return spec;
}

void write_split_spec(std::ostream& out, const SplitSpec& spec) {
  out << "# barcodelm-split seed=" << spec.seed << " n_genera=" << spec.params.n_genera
      << " per_genus_min=" << spec.params.per_genus_min
      << " per_genus_max=" << spec.params.per_genus_max
      << " unseen_cap=" << spec.params.unseen_cap << " fractions="
      << format_fraction(spec.params.train_frac) << ','
      << format_fraction(spec.params.test_frac) << ','
      << format_fraction(spec.params.val_frac) << '\n';
  const std::vector<std::string>* sets[5] = {&spec.pretrain_ids, &spec.finetune_train_ids,
                                             &spec.finetune_val_ids, &spec.finetune_test_ids,
                                             &spec.unseen_ids};
  for (int s = 0; s < 5; ++s) {
    for (const auto& id : *sets[s]) out << id << '\t' << kSplitNames[s] << '\n';
  }
}

SplitSpec read_split_spec(std::istream& in) {
  SplitSpec spec;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream hdr(line.substr(1));
      std::string token;
      while (hdr >> token) {
        const std::size_t eq = token.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = token.substr(0, eq);
        const std::string value = token.substr(eq + 1);
        if (key == "seed") spec.seed = std::stoull(value);
        if (key == "n_genera") spec.params.n_genera = std::stoul(value);
        if (key == "per_genus_min") spec.params.per_genus_min = std::stoul(value);
        if (key == "per_genus_max") spec.params.per_genus_max = std::stoul(value);
        if (key == "unseen_cap") spec.params.unseen_cap = std::stoul(value);
      }
      continue;
    }
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw DataError("split file line " + std::to_string(line_number) + ": expected id<TAB>split");
    }
    const std::string id = line.substr(0, tab);
    const std::string name = line.substr(tab + 1);
    if (name == "pretrain") spec.pretrain_ids.push_back(id);
    else if (name == "train") spec.finetune_train_ids.push_back(id);
    else if (name == "val") spec.finetune_val_ids.push_back(id);
    else if (name == "test") spec.finetune_test_ids.push_back(id);
    else if (name == "unseen") spec.unseen_ids.push_back(id);
    else throw DataError("split file line " + std::to_string(line_number) +
                         ": unknown split name '" + name + "'");
  }
  return spec;
}

void write_zsl_split_spec(std::ostream& out, const ZslSplitSpec& spec) {
  out << "# barcodelm-zsl-split seed=" << spec.seed
      << " unseen_test_frac=" << format_fraction(spec.params.unseen_test_frac)
      << " unseen_val_frac=" << format_fraction(spec.params.unseen_val_frac)
      << " seen_train_frac=" << format_fraction(spec.params.seen_train_frac) << '\n';
  for (const auto& id : spec.seen_train_ids) out << id << "\tseen_train\n";
  for (const auto& id : spec.seen_test_ids) out << id << "\tseen_test\n";
  for (const auto& id : spec.unseen_val_ids) out << id << "\tunseen_val\n";
  for (const auto& id : spec.unseen_test_ids) out << id << "\tunseen_test\n";
}

ZslSplitSpec read_zsl_split_spec(std::istream& in) {
  ZslSplitSpec spec;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream hdr(line.substr(1));
      std::string token;
      while (hdr >> token) {
        const std::size_t eq = token.find('=');
        if (eq != std::string::npos && token.substr(0, eq) == "seed") {
          spec.seed = std::stoull(token.substr(eq + 1));
        }
      }
      continue;
    }
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw DataError("zsl split file line " + std::to_string(line_number) +
                      ": expected id<TAB>split");
    }
    const std::string id = line.substr(0, tab);
    const std::string name = line.substr(tab + 1);
    if (name == "seen_train") spec.seen_train_ids.push_back(id);
    else if (name == "seen_test") spec.seen_test_ids.push_back(id);
    else if (name == "unseen_val") spec.unseen_val_ids.push_back(id);
    else if (name == "unseen_test") spec.unseen_test_ids.push_back(id);
    else throw DataError("zsl split file line " + std::to_string(line_number) +
                         ": unknown split name '" + name + "'");
  }
  return spec;
}

}  // namespace barcodelm
