#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "semtree/errors.hpp"

namespace semtree {

using Vec = std::vector<double>;

// Month-resolution date. Day precision is rejected at parse time.
struct YearMonth {
  int year = 0;
  int month = 0; // 1..12

  friend bool operator==(const YearMonth& a, const YearMonth& b) {
    return a.year == b.year && a.month == b.month;
  }
  friend bool operator<(const YearMonth& a, const YearMonth& b) {
    if (a.year != b.year) return a.year < b.year;
    return a.month < b.month;
  }
  friend bool operator<=(const YearMonth& a, const YearMonth& b) { return a < b || a == b; }
};

// Parses "YYYY-MM". Anything else (including "YYYY-MM-DD") is a ParseError.
YearMonth parse_year_month(const std::string& s);
std::string format_year_month(const YearMonth& ym);

struct DocRecord {
  std::string id;
  std::string title;
  std::string abstract_text;
  YearMonth date;
  Vec embedding;
};

struct Corpus {
  std::vector<DocRecord> docs;
  int dim = 0;
  std::unordered_map<std::string, int64_t> index; // id -> position in docs

  int64_t size() const { return static_cast<int64_t>(docs.size()); }
  const DocRecord& at(int64_t pos) const { return docs[static_cast<size_t>(pos)]; }
  // Returns -1 when the id is unknown.
  int64_t position_of(const std::string& id) const {
    auto it = index.find(id);
    return it == index.end() ? -1 : it->second;
  }
};

struct QueryContext {
  std::string background;
  std::optional<std::string> motivation;
  std::optional<std::string> intermediate_hypothesis;
  std::optional<Vec> query_embedding;
};

// Line-delimited JSON records: {id, title, abstract, date "YYYY-MM", embedding}.
// Blank lines ignored. Errors carry the 1-based line number.
Corpus load_corpus(const std::string& path);
void save_corpus(const Corpus& corpus, const std::string& path);

// Builds a Corpus in memory, validating the same invariants as load_corpus.
Corpus make_corpus(std::vector<DocRecord> docs);

double dot(const Vec& a, const Vec& b);
double norm(const Vec& v);
double cosine(const Vec& a, const Vec& b);
Vec normalize(const Vec& v);

// Stable content fingerprint over ids, dates and embedding bit patterns (FNV-1a, hex).
std::string corpus_fingerprint(const Corpus& corpus);

} // namespace semtree
