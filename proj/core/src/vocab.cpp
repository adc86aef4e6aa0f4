#include "barcodelm/vocab.hpp"

#include <istream>
#include <ostream>
#include <sstream>

#include "barcodelm/errors.hpp"

namespace barcodelm {

namespace {

constexpr const char* kMaskToken = "<MASK>";
constexpr const char* kUnkToken = "<UNK>";

int base_index(char c) {
  switch (c) {
    case 'A': return 0;
    case 'C': return 1;
    case 'G': return 2;
    case 'T': return 3;
    default: return -1;
  }
}

constexpr char kBases[4] = {'A', 'C', 'G', 'T'};

}  // namespace

Vocabulary::Vocabulary(int k) : k_(k) {
  kmer_count_ = 1;
  for (int i = 0; i < k; ++i) kmer_count_ *= 4;
}

Vocabulary Vocabulary::build(int k) {
  if (k < 1 || k > 8) {
    throw ConfigError("k must be in [1, 8], got " + std::to_string(k));
  }
  return Vocabulary(k);
}

std::int32_t Vocabulary::window_id(const char* window) const {
  std::int64_t id = 0;
  for (int i = 0; i < k_; ++i) {
    const int b = base_index(window[i]);
    if (b < 0) return unk_id();
    id = id * 4 + b;
  }
  return static_cast<std::int32_t>(id);
}

std::int32_t Vocabulary::id_of(const std::string& token) const {
  if (token == kMaskToken) return mask_id();
  if (token == kUnkToken) return unk_id();
  if (static_cast<int>(token.size()) != k_) {
    throw ConfigError("token '" + token + "' does not have length k=" + std::to_string(k_));
  }
  const std::int32_t id = window_id(token.c_str());
  if (id == unk_id()) {
    throw ConfigError("token '" + token + "' contains symbols outside {A,C,G,T}");
  }
  return id;
}

std::string Vocabulary::token_string(std::int32_t id) const {
  if (id == mask_id()) return kMaskToken;
  if (id == unk_id()) return kUnkToken;
  if (id == pad_id()) return "<PAD>";
  if (id < 0 || id >= kmer_count_) {
    throw ConfigError("token id " + std::to_string(id) + " out of range");
  }
  std::string s(static_cast<std::size_t>(k_), 'A');
  std::int64_t rest = id;
  for (int i = k_ - 1; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = kBases[rest % 4];
    rest /= 4;
  }
  return s;
}

void Vocabulary::save(std::ostream& out) const {
  out << "# k=" << k_ << " size=" << reported_size() << '\n';
  for (std::int32_t id = 0; id < static_cast<std::int32_t>(reported_size()); ++id) {
    out << token_string(id) << '\t' << id << '\n';
  }
}

Vocabulary Vocabulary::load(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.empty() || line[0] != '#') {
    throw DataError("vocabulary file: missing '# k=...' header");
  }
  int k = 0;
  {
    std::istringstream hdr(line.substr(1));
    std::string token;
    while (hdr >> token) {
      if (token.rfind("k=", 0) == 0) k = std::stoi(token.substr(2));
    }
  }
  if (k == 0) throw DataError("vocabulary file: header does not record k");
  Vocabulary vocab = build(k);
  std::size_t entries = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos) throw DataError("vocabulary file: expected token<TAB>id");
    const std::string token = line.substr(0, tab);
    const std::int32_t id = static_cast<std::int32_t>(std::stol(line.substr(tab + 1)));
    if (vocab.id_of(token) != id) {
      throw DataError("vocabulary file: token '" + token + "' has id " + std::to_string(id) +
                      ", expected " + std::to_string(vocab.id_of(token)));
    }
    ++entries;
  }
  if (entries != static_cast<std::size_t>(vocab.reported_size())) {
    throw DataError("vocabulary file: " + std::to_string(entries) + " entries, expected " +
                    std::to_string(vocab.reported_size()));
  }
  return vocab;
}

}  // namespace barcodelm
