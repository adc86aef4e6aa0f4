#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace barcodelm {

// Taxonomic ranks carried per record, most to least inclusive.
enum class Rank : int {
  kPhylum = 0,
  kClass = 1,
  kOrder = 2,
  kFamily = 3,
  kSubfamily = 4,
  kGenus = 5,
  kSpecies = 6,
};

inline constexpr int kRankCount = 7;

const char* rank_name(Rank r);
std::optional<Rank> rank_from_name(const std::string& name);

// One specimen: identifier, nucleotide string, taxonomy, optional BIN cluster.
struct BarcodeRecord {
  std::string record_id;
  std::string sequence;  // cleaned: characters in {A,C,G,T,N}, no trailing N
  std::array<std::optional<std::string>, kRankCount> taxonomy;
  std::optional<std::string> bin_id;

  const std::optional<std::string>& rank(Rank r) const {
    return taxonomy[static_cast<std::size_t>(r)];
  }
  std::optional<std::string>& rank(Rank r) { return taxonomy[static_cast<std::size_t>(r)]; }
  bool has_rank(Rank r) const { return rank(r).has_value() && !rank(r)->empty(); }
  // Genus-qualified species key; species epithets may repeat across genera.
  std::string species_key() const;
};

// Maps logical fields to input column names. Defaults follow the common
// barcode-export header. Taxonomy entries may be absent (e.g. no subfamily
// column): the rank is then left unset on every record.
struct ColumnMap {
  std::string id = "processid";
  std::string sequence = "nucleotides";
  std::map<Rank, std::string> taxonomy = {
      {Rank::kPhylum, "phylum"},   {Rank::kClass, "class"},
      {Rank::kOrder, "order"},     {Rank::kFamily, "family"},
      {Rank::kSubfamily, "subfamily"}, {Rank::kGenus, "genus"},
      {Rank::kSpecies, "species"},
  };
  std::string bin = "bin_uri";
  // Ranks whose column may be missing from the header without error.
  static bool optional_rank(Rank r) { return r == Rank::kSubfamily; }
};

struct RowError {
  std::size_t line_number = 0;
  std::string message;
};

struct ParseReport {
  std::size_t rows_read = 0;
  std::size_t records_parsed = 0;
  std::size_t dropped_empty_sequence = 0;
  std::vector<RowError> row_errors;
};

// Reads a tab-separated file with a header row. Raw sequences are kept as-is
// (not yet cleaned); rows with an empty sequence cell are dropped and counted.
// Malformed rows are reported with their line number and skipped.
std::vector<BarcodeRecord> parse_records(std::istream& source, const ColumnMap& columns,
                                         ParseReport* report = nullptr);

// FASTA alternative: taxonomy is read from `rank=value` pairs on the
// description line, e.g. `>ID1 genus=Aedes species=Aedes_aegypti`.
std::vector<BarcodeRecord> parse_fasta_records(std::istream& source,
                                               ParseReport* report = nullptr);

// Uppercases, replaces every symbol outside {A,C,G,T} (alignment gaps
// included) with N, then strips trailing Ns. nullopt when nothing is left.
std::optional<std::string> clean_sequence(const std::string& raw);

struct CleaningReport {
  std::size_t input_records = 0;
  std::size_t dropped_degenerate = 0;  // empty after cleaning
  std::size_t dropped_duplicate = 0;
  std::size_t dropped_short = 0;
  std::size_t dropped_n_content = 0;
  std::size_t survivors = 0;

  std::string to_text() const;
};

// Cleans every sequence in place and drops degenerate records. Output order
// follows input order.
std::vector<BarcodeRecord> clean_records(std::vector<BarcodeRecord> records,
                                         CleaningReport& report);

// Removes exact-duplicate sequences (first occurrence wins), sequences
// shorter than min_len, and sequences whose N fraction exceeds max_n_frac.
// Expects cleaned sequences.
std::vector<BarcodeRecord> sanitize_corpus(std::vector<BarcodeRecord> records,
                                           CleaningReport& report, std::size_t min_len = 200,
                                           double max_n_frac = 0.5);

double n_fraction(const std::string& sequence);

// Corpus TSV in the default column schema (subfamily column included).
void write_corpus_tsv(std::ostream& out, const std::vector<BarcodeRecord>& records);
std::vector<BarcodeRecord> read_corpus_tsv(std::istream& in, ParseReport* report = nullptr);

}  // namespace barcodelm
