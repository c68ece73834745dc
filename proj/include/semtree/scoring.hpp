#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "semtree/errors.hpp"

namespace semtree {

enum class CoverState { covered, missing, wrong };

CoverState parse_cover_state(const std::string& name);

struct CoverageElement {
  std::string name;
  CoverState state = CoverState::missing;
};

struct ElementCoverage {
  std::vector<CoverageElement> elements;
};

// covered / total; MISSING and WRONG both count as not covered.
double recall_fraction(const ElementCoverage& coverage);

struct M3Score {
  int motivation = 0;
  int mechanism = 0;
  int methodology = 0;
  int total() const { return motivation + mechanism + methodology; }
};

// Per dimension, score = round-half-up(4r); anchors 0/25/50/75/100% land on
// 0..4 exactly.
M3Score m3_from_recalls(double r_motivation, double r_mechanism, double r_methodology);

// Rejection-sampling gate: total >= 8 qualifies.
bool rft_pass(const M3Score& score);

enum class PairOutcome { A, B, tie };

PairOutcome parse_pair_outcome(const std::string& name);
std::string pair_outcome_name(PairOutcome outcome);

// A judgment file records positional outcomes (first/second/tie) per trial
// and order; swapped order flips which side "first" names.
PairOutcome map_positional(bool swapped, const std::string& positional_outcome);

// Strict majority of A vs B wins across the four judgments; ties in the
// count give a tie verdict.
PairOutcome pairwise_aggregate(const std::vector<PairOutcome>& judgments);

// Per-sample coverage across the three dimensions, keyed by sample id.
struct SampleCoverage {
  std::optional<ElementCoverage> motivation;
  std::optional<ElementCoverage> mechanism;
  std::optional<ElementCoverage> methodology;
};

// Line format: {sample_id, dimension, elements: [{name, state}]}.
// Every sample must end up with all three dimensions.
std::map<std::string, SampleCoverage> load_coverage(const std::string& path);

struct ScoredSample {
  std::string sample_id;
  M3Score score;
};

std::vector<ScoredSample> score_coverage(const std::map<std::string, SampleCoverage>& coverage);

// Header: sample_id,motivation,mechanism,methodology,total,rft_pass.
std::string scores_to_csv(const std::vector<ScoredSample>& scored);

struct JudgmentRecord {
  std::string pair_id;
  int trial = 0;
  bool swapped = false;
  PairOutcome outcome = PairOutcome::tie; // canonical (A/B/tie)
};

// Line format: {pair_id, trial, order: original|swapped, outcome:
// first|second|tie}; exactly 2 trials x 2 orders per pair.
std::vector<JudgmentRecord> load_judgments(const std::string& path);

struct PairVerdict {
  std::string pair_id;
  PairOutcome winner = PairOutcome::tie;
};

std::vector<PairVerdict> aggregate_judgments(const std::vector<JudgmentRecord>& records);
std::string verdicts_to_csv(const std::vector<PairVerdict>& verdicts);

// Fraction of samples with rank <= K and total >= S for every threshold
// pair, plus a retrieval-only row per K. Ranks may be absent (never
// retrieved); such samples fail every rank cut.
struct JointCell {
  int64_t rank_le = 0;
  std::optional<int> score_ge; // absent for the retrieval-only row
  double fraction = 0.0;
};

std::vector<JointCell> joint_success_table(
    const std::vector<std::optional<int64_t>>& ranks, const std::vector<int>& totals,
    const std::vector<int64_t>& rank_thresholds, const std::vector<int>& score_thresholds);

std::string joint_table_to_csv(const std::vector<JointCell>& cells);

} // namespace semtree
