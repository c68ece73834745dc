#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "semtree/corpus.hpp"
#include "semtree/hier_index.hpp"
#include "semtree/router.hpp"

namespace semtree {

// Length-normalized path priority: the geometric mean of the accumulated
// probabilities, exp(log_prob_sum / n_probs). A path that has accumulated
// nothing scores 1.
inline double geo_mean_score(double log_prob_sum, int64_t n_probs) {
  if (n_probs == 0) return 1.0;
  return std::exp(log_prob_sum / static_cast<double>(n_probs));
}

struct TraceEntry {
  int64_t node_id;
  std::vector<double> probs;
};

struct SearchResult {
  std::vector<int64_t> proposed; // doc positions in emission order
  int64_t ir_calls = 0;
  std::optional<int64_t> ir_calls_to_target;
  std::optional<int64_t> proposed_rank; // 1-based
  bool budget_exhausted = false;
  std::vector<TraceEntry> trace;
};

// Best-first traversal: a priority queue ordered by geometric-mean path
// score (ties broken by insertion order). Expanding an internal node costs
// one router call and pushes every child once; popping a document emits it
// at zero cost. Stops when the target document is popped, when an internal
// expansion would exceed budget (budget_exhausted), or when the queue runs
// dry. search_key decorrelates stochastic routing across searches; corpus
// may be null when the router works from target flags alone.
SearchResult best_first_search(const SearchTree& tree, Router& router,
                               const QueryContext& query, int64_t budget,
                               std::optional<int64_t> target_pos, uint64_t search_key = 0,
                               const Corpus* corpus = nullptr);

// Bottom-up exhaustive baseline: round 1 runs one router call per level-1
// node over its documents; each later round runs one call per node of that
// level over the winner documents of its children; the final call crowns a
// champion. ir_calls is the fixed sum of level sizes. Proposed order:
// champion, then eliminated docs by (round desc, router prob desc, doc
// position asc).
SearchResult tournament_search(const SearchTree& tree, Router& router,
                               const QueryContext& query, std::optional<int64_t> target_pos,
                               uint64_t search_key = 0, const Corpus* corpus = nullptr);

inline int64_t default_budget(const SearchTree& tree) {
  return 4 * static_cast<int64_t>(tree.depth) * tree.branching;
}

enum class SearchMethod { best_first, tournament };

struct EvalRow {
  std::string target_id;
  std::optional<int64_t> ir_calls_to_target;
  std::optional<int64_t> proposed_rank;
  bool budget_exhausted = false;
};

struct EvalTable {
  std::vector<EvalRow> rows;
  // Aggregates over rows where the value is present; NaN when none are.
  double mean_calls = 0.0;
  double median_calls = 0.0;
  double mean_rank = 0.0;
  double median_rank = 0.0;
};

// One self-query search: the query carries the target document's own title
// and embedding, so the similarity router has a true signal; the planted
// router only needs the target flags. search_key decorrelates stochastic
// routing across targets.
EvalRow eval_single(const SearchTree& tree, const Corpus& corpus, Router& router,
                    const std::string& target_id, int64_t budget, SearchMethod method,
                    uint64_t search_key);

// Fills the aggregate fields from the given rows.
EvalTable aggregate_eval(std::vector<EvalRow> rows);

// One search per target id, aggregated.
EvalTable eval_retrieval(const SearchTree& tree, const Corpus& corpus, Router& router,
                         const std::vector<std::string>& target_ids, int64_t budget,
                         SearchMethod method);

inline constexpr const char* kEvalCsvHeader =
    "target_id,ir_calls_to_target,proposed_rank,budget_exhausted\n";

std::string eval_row_to_csv(const EvalRow& row); // one line, newline-terminated
std::string eval_to_csv(const EvalTable& table); // kEvalCsvHeader plus all rows

} // namespace semtree
