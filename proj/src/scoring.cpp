#include "semtree/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "json.hpp"

namespace semtree {

using nlohmann::json;

CoverState parse_cover_state(const std::string& name) {
  if (name == "covered") return CoverState::covered;
  if (name == "missing") return CoverState::missing;
  if (name == "wrong") return CoverState::wrong;
  throw ValidationError("scoring: unknown coverage state '" + name + "'");
}

double recall_fraction(const ElementCoverage& coverage) {
  if (coverage.elements.empty())
    throw ValidationError("scoring: recall over zero elements");
  int64_t covered = 0;
  for (const CoverageElement& e : coverage.elements)
    if (e.state == CoverState::covered) ++covered;
  return static_cast<double>(covered) / static_cast<double>(coverage.elements.size());
}

namespace {

int quarter_score(double r) {
  if (!(r >= 0.0 && r <= 1.0))
    throw ValidationError("scoring: recall " + std::to_string(r) + " outside [0,1]");
  return static_cast<int>(std::floor(4.0 * r + 0.5));
}

} // namespace

M3Score m3_from_recalls(double r_motivation, double r_mechanism, double r_methodology) {
  M3Score s;
  s.motivation = quarter_score(r_motivation);
  s.mechanism = quarter_score(r_mechanism);
  s.methodology = quarter_score(r_methodology);
  return s;
}

bool rft_pass(const M3Score& score) { return score.total() >= 8; }

PairOutcome parse_pair_outcome(const std::string& name) {
  if (name == "A") return PairOutcome::A;
  if (name == "B") return PairOutcome::B;
  if (name == "tie") return PairOutcome::tie;
  throw ValidationError("scoring: unknown outcome '" + name + "'");
}

std::string pair_outcome_name(PairOutcome outcome) {
  switch (outcome) {
    case PairOutcome::A: return "A";
    case PairOutcome::B: return "B";
    case PairOutcome::tie: return "tie";
  }
  return "?";
}

PairOutcome map_positional(bool swapped, const std::string& positional_outcome) {
  if (positional_outcome == "tie") return PairOutcome::tie;
  if (positional_outcome == "first") return swapped ? PairOutcome::B : PairOutcome::A;
  if (positional_outcome == "second") return swapped ? PairOutcome::A : PairOutcome::B;
  throw ValidationError("scoring: unknown positional outcome '" + positional_outcome + "'");
}

PairOutcome pairwise_aggregate(const std::vector<PairOutcome>& judgments) {
  if (judgments.size() != 4)
    throw ValidationError("scoring: pairwise aggregation needs exactly 4 judgments, got " +
                          std::to_string(judgments.size()));
  int a = 0, b = 0;
  for (PairOutcome j : judgments) {
    if (j == PairOutcome::A) ++a;
    if (j == PairOutcome::B) ++b;
  }
  if (a > b) return PairOutcome::A;
  if (b > a) return PairOutcome::B;
  return PairOutcome::tie;
}

std::map<std::string, SampleCoverage> load_coverage(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("scoring: cannot open " + path);
  std::map<std::string, SampleCoverage> out;
  std::string line;
  int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw ParseError("scoring: line " + std::to_string(line_no) + ": malformed record");
    auto fail = [&](const std::string& what) -> ParseError {
      return ParseError("scoring: line " + std::to_string(line_no) + ": " + what);
    };
    if (!j.is_object() || !j.contains("sample_id") || !j.contains("dimension") ||
        !j.contains("elements") || !j["elements"].is_array())
      throw fail("record needs sample_id, dimension and elements");
    std::string sample_id = j["sample_id"].get<std::string>();
    std::string dimension = j["dimension"].get<std::string>();
    ElementCoverage cov;
    for (const auto& je : j["elements"]) {
      if (!je.is_object() || !je.contains("name") || !je.contains("state"))
        throw fail("element needs name and state");
      cov.elements.push_back(
          CoverageElement{je["name"].get<std::string>(),
                          parse_cover_state(je["state"].get<std::string>())});
    }
    SampleCoverage& sc = out[sample_id];
    std::optional<ElementCoverage>* slot = nullptr;
    if (dimension == "motivation") slot = &sc.motivation;
    else if (dimension == "mechanism") slot = &sc.mechanism;
    else if (dimension == "methodology") slot = &sc.methodology;
    else throw fail("unknown dimension '" + dimension + "'");
    if (slot->has_value())
      throw ValidationError("scoring: duplicate " + dimension + " coverage for sample '" +
                            sample_id + "'");
    *slot = std::move(cov);
  }
  for (const auto& [sample_id, sc] : out) {
    if (!sc.motivation || !sc.mechanism || !sc.methodology)
      throw ValidationError("scoring: sample '" + sample_id +
                            "' is missing one of the three dimensions");
  }
  return out;
}

std::vector<ScoredSample> score_coverage(const std::map<std::string, SampleCoverage>& coverage) {
  std::vector<ScoredSample> out;
  out.reserve(coverage.size());
  for (const auto& [sample_id, sc] : coverage) {
    ScoredSample s;
    s.sample_id = sample_id;
    s.score = m3_from_recalls(recall_fraction(*sc.motivation), recall_fraction(*sc.mechanism),
                              recall_fraction(*sc.methodology));
    out.push_back(std::move(s));
  }
  return out;
}

std::string scores_to_csv(const std::vector<ScoredSample>& scored) {
  std::string out = "sample_id,motivation,mechanism,methodology,total,rft_pass\n";
  for (const ScoredSample& s : scored) {
    out += s.sample_id;
    out += "," + std::to_string(s.score.motivation);
    out += "," + std::to_string(s.score.mechanism);
    out += "," + std::to_string(s.score.methodology);
    out += "," + std::to_string(s.score.total());
    out += rft_pass(s.score) ? ",true" : ",false";
    out += "\n";
  }
  return out;
}

std::vector<JudgmentRecord> load_judgments(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("scoring: cannot open " + path);
  std::vector<JudgmentRecord> out;
  std::string line;
  int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw ParseError("scoring: line " + std::to_string(line_no) + ": malformed record");
    if (!j.is_object() || !j.contains("pair_id") || !j.contains("trial") ||
        !j.contains("order") || !j.contains("outcome"))
      throw ParseError("scoring: line " + std::to_string(line_no) +
                       ": record needs pair_id, trial, order, outcome");
    JudgmentRecord rec;
    rec.pair_id = j["pair_id"].get<std::string>();
    rec.trial = j["trial"].get<int>();
    std::string order = j["order"].get<std::string>();
    if (order == "original") rec.swapped = false;
    else if (order == "swapped") rec.swapped = true;
    else
      throw ParseError("scoring: line " + std::to_string(line_no) + ": unknown order '" + order +
                       "'");
    rec.outcome = map_positional(rec.swapped, j["outcome"].get<std::string>());
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<PairVerdict> aggregate_judgments(const std::vector<JudgmentRecord>& records) {
  std::map<std::string, std::vector<PairOutcome>> by_pair;
  for (const JudgmentRecord& r : records) by_pair[r.pair_id].push_back(r.outcome);
  std::vector<PairVerdict> out;
  out.reserve(by_pair.size());
  for (const auto& [pair_id, judgments] : by_pair) {
    if (judgments.size() != 4)
      throw ValidationError("scoring: pair '" + pair_id + "' has " +
                            std::to_string(judgments.size()) +
                            " judgments, expected 4 (2 trials x 2 orders)");
    out.push_back(PairVerdict{pair_id, pairwise_aggregate(judgments)});
  }
  return out;
}

std::string verdicts_to_csv(const std::vector<PairVerdict>& verdicts) {
  std::string out = "pair_id,winner\n";
  for (const PairVerdict& v : verdicts) out += v.pair_id + "," + pair_outcome_name(v.winner) + "\n";
  return out;
}

std::vector<JointCell> joint_success_table(
    const std::vector<std::optional<int64_t>>& ranks, const std::vector<int>& totals,
    const std::vector<int64_t>& rank_thresholds, const std::vector<int>& score_thresholds) {
  if (ranks.size() != totals.size())
    throw ValidationError("scoring: rank and score sets are misaligned (" +
                          std::to_string(ranks.size()) + " vs " + std::to_string(totals.size()) +
                          ")");
  if (ranks.empty()) throw ValidationError("scoring: joint table over zero samples");
  std::vector<JointCell> cells;
  const double n = static_cast<double>(ranks.size());
  for (int64_t K : rank_thresholds) {
    int64_t retrieved = 0;
    for (const auto& r : ranks)
      if (r && *r <= K) ++retrieved;
    cells.push_back(JointCell{K, std::nullopt, static_cast<double>(retrieved) / n});
    for (int S : score_thresholds) {
      int64_t hits = 0;
      for (size_t i = 0; i < ranks.size(); ++i)
        if (ranks[i] && *ranks[i] <= K && totals[i] >= S) ++hits;
      cells.push_back(JointCell{K, S, static_cast<double>(hits) / n});
    }
  }
  return cells;
}

std::string joint_table_to_csv(const std::vector<JointCell>& cells) {
  std::string out = "rank_le,score_ge,success_fraction\n";
  char buf[64];
  for (const JointCell& cell : cells) {
    out += std::to_string(cell.rank_le);
    out += ",";
    if (cell.score_ge) out += std::to_string(*cell.score_ge);
    std::snprintf(buf, sizeof(buf), "%.10g", cell.fraction);
    out += ",";
    out += buf;
    out += "\n";
  }
  return out;
}

} // namespace semtree
