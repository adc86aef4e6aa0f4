#include "barcodelm/records.hpp"

#include <algorithm>
#include <cctype>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "barcodelm/errors.hpp"

namespace barcodelm {

namespace {

const char* kRankNames[kRankCount] = {"phylum", "class",  "order",  "family",
                                      "subfamily", "genus", "species"};

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find('\t', start);
    if (pos == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

bool is_missing_value(const std::string& s) {
  return s.empty() || s == "None" || s == "NA" || s == "nan";
}

}  // namespace

const char* rank_name(Rank r) { return kRankNames[static_cast<int>(r)]; }

std::optional<Rank> rank_from_name(const std::string& name) {
  for (int i = 0; i < kRankCount; ++i) {
    if (name == kRankNames[i]) return static_cast<Rank>(i);
  }
  return std::nullopt;
}

std::string BarcodeRecord::species_key() const {
  const auto& g = rank(Rank::kGenus);
  const auto& s = rank(Rank::kSpecies);
  return (g ? *g : std::string()) + "|" + (s ? *s : std::string());
}

std::vector<BarcodeRecord> parse_records(std::istream& source, const ColumnMap& columns,
                                         ParseReport* report) {
  ParseReport local;
  ParseReport& rep = report ? *report : local;

  std::string header_line;
  if (!std::getline(source, header_line)) {
    throw DataError("input is empty: expected a header row");
  }
  header_line = strip_cr(header_line);
  const std::vector<std::string> header = split_tabs(header_line);

  std::unordered_map<std::string, std::size_t> col_index;
  for (std::size_t i = 0; i < header.size(); ++i) col_index.emplace(header[i], i);

  auto require_column = [&](const std::string& name) -> std::size_t {
    const auto it = col_index.find(name);
    if (it == col_index.end()) {
      throw ConfigError("mapped column '" + name + "' not found in header");
    }
    return it->second;
  };

  const std::size_t id_col = require_column(columns.id);
  const std::size_t seq_col = require_column(columns.sequence);

  std::array<std::optional<std::size_t>, kRankCount> rank_cols;
  for (const auto& [rank, name] : columns.taxonomy) {
    const auto it = col_index.find(name);
    if (it != col_index.end()) {
      rank_cols[static_cast<std::size_t>(rank)] = it->second;
    } else if (!ColumnMap::optional_rank(rank)) {
      throw ConfigError("mapped column '" + name + "' not found in header");
    }
  }
  std::optional<std::size_t> bin_col;
  if (!columns.bin.empty()) {
    const auto it = col_index.find(columns.bin);
    if (it != col_index.end()) bin_col = it->second;
  }

  std::vector<BarcodeRecord> records;
  std::unordered_set<std::string> seen_ids;
  std::string line;
  std::size_t line_number = 1;
  while (std::getline(source, line)) {
    ++line_number;
    line = strip_cr(line);
    if (line.empty()) continue;
    ++rep.rows_read;
    const std::vector<std::string> fields = split_tabs(line);
    if (fields.size() <= std::max(id_col, seq_col)) {
      rep.row_errors.push_back({line_number, "row has " + std::to_string(fields.size()) +
                                                 " fields, expected at least " +
                                                 std::to_string(std::max(id_col, seq_col) + 1)});
      continue;
    }
    if (is_missing_value(fields[seq_col])) {
      ++rep.dropped_empty_sequence;
      continue;
    }
    BarcodeRecord rec;
    rec.record_id = fields[id_col];
    if (rec.record_id.empty()) {
      rep.row_errors.push_back({line_number, "empty record id"});
      continue;
    }
    if (!seen_ids.insert(rec.record_id).second) {
      rep.row_errors.push_back({line_number, "duplicate record id '" + rec.record_id + "'"});
      continue;
    }
    rec.sequence = fields[seq_col];
    for (int r = 0; r < kRankCount; ++r) {
      if (rank_cols[r] && *rank_cols[r] < fields.size() &&
          !is_missing_value(fields[*rank_cols[r]])) {
        rec.taxonomy[r] = fields[*rank_cols[r]];
      }
    }
    if (bin_col && *bin_col < fields.size() && !is_missing_value(fields[*bin_col])) {
      rec.bin_id = fields[*bin_col];
    }
    records.push_back(std::move(rec));
    ++rep.records_parsed;
  }
  return records;
}

std::vector<BarcodeRecord> parse_fasta_records(std::istream& source, ParseReport* report) {
  ParseReport local;
  ParseReport& rep = report ? *report : local;

  std::vector<BarcodeRecord> records;
  std::unordered_set<std::string> seen_ids;
  BarcodeRecord current;
  bool in_record = false;
  std::size_t record_line = 0;

  auto flush = [&]() {
    if (!in_record) return;
    ++rep.rows_read;
    if (current.sequence.empty()) {
      ++rep.dropped_empty_sequence;
    } else if (!seen_ids.insert(current.record_id).second) {
      rep.row_errors.push_back({record_line, "duplicate record id '" + current.record_id + "'"});
    } else {
      records.push_back(current);
      ++rep.records_parsed;
    }
    current = BarcodeRecord{};
  };

  std::string line;
  std::size_t line_number = 0;
  while (std::getline(source, line)) {
    ++line_number;
    line = strip_cr(line);
    if (line.empty()) continue;
    if (line[0] == '>') {
      flush();
      in_record = true;
      record_line = line_number;
      std::istringstream hdr(line.substr(1));
      std::string token;
      hdr >> token;
      current.record_id = token;
      if (current.record_id.empty()) {
        rep.row_errors.push_back({line_number, "FASTA header with empty id"});
        in_record = false;
        continue;
      }
      while (hdr >> token) {
        const std::size_t eq = token.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = token.substr(0, eq);
        const std::string value = token.substr(eq + 1);
        if (value.empty()) continue;
        if (key == "bin") {
          current.bin_id = value;
        } else if (auto r = rank_from_name(key)) {
          current.rank(*r) = value;
        }
      }
    } else if (in_record) {
      current.sequence += line;
    } else {
      rep.row_errors.push_back({line_number, "sequence data before the first FASTA header"});
    }
  }
  flush();
  return records;
}

std::optional<std::string> clean_sequence(const std::string& raw) {
  std::string out;
  out.reserve(raw.size());
  for (char c : raw) {
    const char u = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    switch (u) {
      case 'A':
      case 'C':
      case 'G':
      case 'T':
        out.push_back(u);
        break;
      default:
        out.push_back('N');
        break;
    }
  }
  while (!out.empty() && out.back() == 'N') out.pop_back();
  if (out.empty()) return std::nullopt;
  return out;
}

std::vector<BarcodeRecord> clean_records(std::vector<BarcodeRecord> records,
                                         CleaningReport& report) {
  report.input_records += records.size();
  std::vector<BarcodeRecord> out;
  out.reserve(records.size());
  for (auto& rec : records) {
    auto cleaned = clean_sequence(rec.sequence);
    if (!cleaned) {
      ++report.dropped_degenerate;
      continue;
    }
    rec.sequence = std::move(*cleaned);
    out.push_back(std::move(rec));
  }
  return out;
}

double n_fraction(const std::string& sequence) {
  if (sequence.empty()) return 0.0;
  const auto n = std::count(sequence.begin(), sequence.end(), 'N');
  return static_cast<double>(n) / static_cast<double>(sequence.size());
}

std::vector<BarcodeRecord> sanitize_corpus(std::vector<BarcodeRecord> records,
                                           CleaningReport& report, std::size_t min_len,
                                           double max_n_frac) {
  std::vector<BarcodeRecord> out;
  out.reserve(records.size());
  std::unordered_set<std::string> seen_sequences;
  for (auto& rec : records) {
    if (!seen_sequences.insert(rec.sequence).second) {
      ++report.dropped_duplicate;
      continue;
    }
    if (rec.sequence.size() < min_len) {
      ++report.dropped_short;
      continue;
    }
    if (n_fraction(rec.sequence) > max_n_frac) {
      ++report.dropped_n_content;
      continue;
    }
    out.push_back(std::move(rec));
  }
  report.survivors = out.size();
  return out;
}

std::string CleaningReport::to_text() const {
  std::ostringstream os;
  os << "input_records=" << input_records << '\n'
     << "dropped_degenerate=" << dropped_degenerate << '\n'
     << "dropped_duplicate=" << dropped_duplicate << '\n'
     << "dropped_short=" << dropped_short << '\n'
     << "dropped_n_content=" << dropped_n_content << '\n'
     << "survivors=" << survivors << '\n';
  return os.str();
}

void write_corpus_tsv(std::ostream& out, const std::vector<BarcodeRecord>& records) {
  out << "processid\tphylum\tclass\torder\tfamily\tsubfamily\tgenus\tspecies\tbin_uri\tnucleotides\n";
  for (const auto& rec : records) {
    out << rec.record_id;
    for (int r = 0; r < kRankCount; ++r) {
      out << '\t' << (rec.taxonomy[r] ? *rec.taxonomy[r] : std::string());
    }
    out << '\t' << (rec.bin_id ? *rec.bin_id : std::string());
    out << '\t' << rec.sequence << '\n';
  }
}

std::vector<BarcodeRecord> read_corpus_tsv(std::istream& in, ParseReport* report) {
  return parse_records(in, ColumnMap{}, report);
}

}  // namespace barcodelm
