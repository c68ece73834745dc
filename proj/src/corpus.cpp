#include "semtree/corpus.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace semtree {

using nlohmann::json;

YearMonth parse_year_month(const std::string& s) {
  // Exactly "YYYY-MM": 4 digits, dash, 2 digits.
  if (s.size() != 7 || s[4] != '-')
    throw ParseError("corpus: bad date '" + s + "' (expected YYYY-MM)");
  for (size_t i : {0u, 1u, 2u, 3u, 5u, 6u}) {
    if (s[i] < '0' || s[i] > '9')
      throw ParseError("corpus: bad date '" + s + "' (expected YYYY-MM)");
  }
  YearMonth ym;
  ym.year = std::stoi(s.substr(0, 4));
  ym.month = std::stoi(s.substr(5, 2));
  if (ym.month < 1 || ym.month > 12)
    throw ParseError("corpus: bad month in date '" + s + "'");
  return ym;
}

std::string format_year_month(const YearMonth& ym) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "%04d-%02d", ym.year, ym.month);
  return std::string(buf);
}

namespace {

DocRecord parse_record(const json& j, int64_t line_no) {
  auto fail = [&](const std::string& what) -> ParseError {
    return ParseError("corpus: line " + std::to_string(line_no) + ": " + what);
  };
  if (!j.is_object()) throw fail("record is not an object");
  for (const char* key : {"id", "title", "abstract", "date", "embedding"}) {
    if (!j.contains(key)) throw fail(std::string("missing field '") + key + "'");
  }
  DocRecord rec;
  if (!j["id"].is_string()) throw fail("'id' must be a string");
  rec.id = j["id"].get<std::string>();
  if (rec.id.empty()) throw fail("'id' must be non-empty");
  if (!j["title"].is_string()) throw fail("'title' must be a string");
  rec.title = j["title"].get<std::string>();
  if (!j["abstract"].is_string()) throw fail("'abstract' must be a string");
  rec.abstract_text = j["abstract"].get<std::string>();
  if (!j["date"].is_string()) throw fail("'date' must be a string");
  rec.date = parse_year_month(j["date"].get<std::string>());
  if (!j["embedding"].is_array() || j["embedding"].empty())
    throw fail("'embedding' must be a non-empty array");
  rec.embedding.reserve(j["embedding"].size());
  for (const auto& v : j["embedding"]) {
    if (!v.is_number()) throw fail("'embedding' components must be numbers");
    double x = v.get<double>();
    if (!std::isfinite(x)) throw fail("'embedding' components must be finite");
    rec.embedding.push_back(x);
  }
  return rec;
}

void validate_and_index(Corpus& corpus) {
  if (corpus.docs.empty()) throw ValidationError("corpus: empty corpus");
  corpus.dim = static_cast<int>(corpus.docs.front().embedding.size());
  corpus.index.clear();
  corpus.index.reserve(corpus.docs.size());
  for (size_t i = 0; i < corpus.docs.size(); ++i) {
    const DocRecord& rec = corpus.docs[i];
    if (static_cast<int>(rec.embedding.size()) != corpus.dim)
      throw ValidationError("corpus: dimension mismatch for id '" + rec.id + "' (" +
                            std::to_string(rec.embedding.size()) + " vs " +
                            std::to_string(corpus.dim) + ")");
    auto [it, inserted] = corpus.index.emplace(rec.id, static_cast<int64_t>(i));
    (void)it;
    if (!inserted) throw ValidationError("corpus: duplicate id '" + rec.id + "'");
  }
}

} // namespace

Corpus load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("corpus: cannot open " + path);
  Corpus corpus;
  std::string line;
  int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    // Tolerate trailing CR and skip blank lines.
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t'))
      line.pop_back();
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw ParseError("corpus: line " + std::to_string(line_no) + ": malformed record");
    corpus.docs.push_back(parse_record(j, line_no));
  }
  validate_and_index(corpus);
  return corpus;
}

void save_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("corpus: cannot write " + path);
  for (const DocRecord& rec : corpus.docs) {
    json j;
    j["id"] = rec.id;
    j["title"] = rec.title;
    j["abstract"] = rec.abstract_text;
    j["date"] = format_year_month(rec.date);
    j["embedding"] = rec.embedding;
    out << j.dump() << "\n";
  }
  if (!out) throw IoError("corpus: write failed for " + path);
}

Corpus make_corpus(std::vector<DocRecord> docs) {
  Corpus corpus;
  corpus.docs = std::move(docs);
  validate_and_index(corpus);
  return corpus;
}

double dot(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw ValidationError("corpus: vector length mismatch");
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(const Vec& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double cosine(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw ValidationError("corpus: vector length mismatch");
  double na = norm(a);
  double nb = norm(b);
  if (na == 0.0 || nb == 0.0) throw ValidationError("corpus: zero-norm vector in cosine");
  return dot(a, b) / (na * nb);
}

Vec normalize(const Vec& v) {
  double n = norm(v);
  if (n == 0.0) throw ValidationError("corpus: cannot normalize zero vector");
  Vec out(v.size());
  for (size_t i = 0; i < v.size(); ++i) out[i] = v[i] / n;
  return out;
}

std::string corpus_fingerprint(const Corpus& corpus) {
  uint64_t h = 1469598103934665603ull; // FNV offset basis
  auto mix_bytes = [&h](const void* data, size_t n) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 1099511628211ull; // FNV prime
    }
  };
  auto mix_str = [&](const std::string& s) {
    uint64_t len = s.size();
    mix_bytes(&len, sizeof(len));
    mix_bytes(s.data(), s.size());
  };
  uint64_t n = corpus.docs.size();
  mix_bytes(&n, sizeof(n));
  for (const DocRecord& rec : corpus.docs) {
    mix_str(rec.id);
    int32_t y = rec.date.year, m = rec.date.month;
    mix_bytes(&y, sizeof(y));
    mix_bytes(&m, sizeof(m));
    for (double x : rec.embedding) {
      uint64_t bits;
      std::memcpy(&bits, &x, sizeof(bits));
      mix_bytes(&bits, sizeof(bits));
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

} // namespace semtree
