#include "semtree/search.hpp"

#include <algorithm>
#include <queue>
#include <unordered_set>

#include "semtree/csv.hpp"
#include "semtree/rng.hpp"
#include "semtree/stats.hpp"

namespace semtree {

namespace {

struct QueueEntry {
  double score;
  uint64_t seq;
  bool is_doc;
  int64_t idx; // node id or doc position
  double log_sum;
  int64_t n_probs;
};

struct EntryOrder {
  // max-heap on score; FIFO among equals
  bool operator()(const QueueEntry& a, const QueueEntry& b) const {
    if (a.score != b.score) return a.score < b.score;
    return a.seq > b.seq;
  }
};

ChildCandidate make_doc_candidate(int64_t doc_pos, const Corpus* corpus, bool contains_target) {
  ChildCandidate cand;
  if (corpus != nullptr) {
    const DocRecord& rec = corpus->at(doc_pos);
    cand.id = rec.id;
    cand.title = rec.title;
    cand.abstract_text = rec.abstract_text;
    cand.representative = rec.embedding;
  } else {
    cand.id = "doc:" + std::to_string(doc_pos);
  }
  cand.contains_target = contains_target;
  return cand;
}

ChildCandidate make_node_candidate(const TreeNode& node, bool contains_target) {
  ChildCandidate cand;
  cand.id = "node:" + std::to_string(node.node_id);
  cand.representative = node.centroid;
  cand.contains_target = contains_target;
  return cand;
}

} // namespace

SearchResult best_first_search(const SearchTree& tree, Router& router,
                               const QueryContext& query, int64_t budget,
                               std::optional<int64_t> target_pos, uint64_t search_key,
                               const Corpus* corpus) {
  if (budget < 1) throw ValidationError("search: budget must be >= 1");
  std::unordered_set<int64_t> target_path;
  if (target_pos) {
    for (int64_t id : tree.path_to_doc(*target_pos)) target_path.insert(id);
  }

  SearchResult res;
  std::priority_queue<QueueEntry, std::vector<QueueEntry>, EntryOrder> queue;
  uint64_t seq = 0;
  queue.push(QueueEntry{1.0, seq++, false, tree.root_id, 0.0, 0});

  while (!queue.empty()) {
    QueueEntry top = queue.top();
    queue.pop();
    if (top.is_doc) {
      res.proposed.push_back(top.idx);
      if (target_pos && top.idx == *target_pos) {
        res.ir_calls_to_target = res.ir_calls;
        res.proposed_rank = static_cast<int64_t>(res.proposed.size());
        return res;
      }
      continue;
    }
    if (res.ir_calls >= budget) {
      res.budget_exhausted = true;
      return res;
    }
    const TreeNode& node = tree.node(top.idx);
    std::vector<ChildCandidate> cands;
    cands.reserve(node.children.size());
    const bool doc_children = node.level == 1;
    for (int64_t ch : node.children) {
      bool contains = doc_children ? (target_pos && ch == *target_pos)
                                   : (target_path.count(ch) > 0);
      cands.push_back(doc_children ? make_doc_candidate(ch, corpus, contains)
                                   : make_node_candidate(tree.node(ch), contains));
    }
    RouterDistribution dist =
        router.route(query, derive_seed(search_key, static_cast<uint64_t>(node.node_id)), cands);
    dist.probs = validate_distribution(std::move(dist.probs), cands.size(), false);
    res.ir_calls += 1;
    res.trace.push_back(TraceEntry{node.node_id, dist.probs});
    for (size_t i = 0; i < node.children.size(); ++i) {
      double log_sum = top.log_sum + std::log(dist.probs[i]);
      int64_t n_probs = top.n_probs + 1;
      queue.push(QueueEntry{geo_mean_score(log_sum, n_probs), seq++, doc_children,
                            node.children[i], log_sum, n_probs});
    }
  }
  return res;
}

SearchResult tournament_search(const SearchTree& tree, Router& router,
                               const QueryContext& query, std::optional<int64_t> target_pos,
                               uint64_t search_key, const Corpus* corpus) {
  struct Standing {
    int64_t doc_pos;
    int out_round;  // round in which the doc was eliminated; 0 = champion
    double out_prob;
  };
  std::vector<Standing> standings;

  // winner_doc[node] holds the surviving document for a node whose round has
  // been played.
  std::vector<int64_t> winner_doc(tree.nodes.size(), -1);

  SearchResult res;
  for (int level = 1; level <= tree.depth; ++level) {
    for (const TreeNode& node : tree.nodes) {
      if (node.level != level) continue;
      std::vector<int64_t> contenders;
      contenders.reserve(node.children.size());
      if (level == 1) {
        contenders = node.children;
      } else {
        for (int64_t ch : node.children) contenders.push_back(winner_doc[static_cast<size_t>(ch)]);
      }
      std::vector<ChildCandidate> cands;
      cands.reserve(contenders.size());
      for (int64_t doc : contenders)
        cands.push_back(make_doc_candidate(doc, corpus, target_pos && doc == *target_pos));
      RouterDistribution dist = router.route(
          query, derive_seed(search_key, static_cast<uint64_t>(node.node_id)), cands);
      dist.probs = validate_distribution(std::move(dist.probs), cands.size(), false);
      res.ir_calls += 1;
      res.trace.push_back(TraceEntry{node.node_id, dist.probs});

      size_t best = 0;
      for (size_t i = 1; i < dist.probs.size(); ++i)
        if (dist.probs[i] > dist.probs[best]) best = i;
      winner_doc[static_cast<size_t>(node.node_id)] = contenders[best];
      for (size_t i = 0; i < contenders.size(); ++i) {
        if (i == best) continue;
        standings.push_back(Standing{contenders[i], level, dist.probs[i]});
      }
    }
  }
  int64_t champion = winner_doc[static_cast<size_t>(tree.root_id)];
  standings.push_back(Standing{champion, 0, 1.0});

  std::sort(standings.begin(), standings.end(), [](const Standing& a, const Standing& b) {
    if (a.out_round == 0 || b.out_round == 0) return a.out_round == 0 && b.out_round != 0;
    if (a.out_round != b.out_round) return a.out_round > b.out_round;
    if (a.out_prob != b.out_prob) return a.out_prob > b.out_prob;
    return a.doc_pos < b.doc_pos;
  });

  res.proposed.reserve(standings.size());
  for (const Standing& s : standings) res.proposed.push_back(s.doc_pos);
  // The baseline's cost does not depend on where the target sits.
  res.ir_calls_to_target = res.ir_calls;
  if (target_pos) {
    for (size_t i = 0; i < res.proposed.size(); ++i)
      if (res.proposed[i] == *target_pos) {
        res.proposed_rank = static_cast<int64_t>(i) + 1;
        break;
      }
  }
  return res;
}

EvalRow eval_single(const SearchTree& tree, const Corpus& corpus, Router& router,
                    const std::string& target_id, int64_t budget, SearchMethod method,
                    uint64_t search_key) {
  int64_t pos = corpus.position_of(target_id);
  if (pos < 0) throw ValidationError("search: target '" + target_id + "' is not in the corpus");
  const DocRecord& rec = corpus.at(pos);
  QueryContext query;
  query.background = rec.title;
  query.query_embedding = rec.embedding;
  SearchResult r = method == SearchMethod::best_first
                       ? best_first_search(tree, router, query, budget, pos, search_key, &corpus)
                       : tournament_search(tree, router, query, pos, search_key, &corpus);
  EvalRow row;
  row.target_id = target_id;
  row.ir_calls_to_target = r.ir_calls_to_target;
  row.proposed_rank = r.proposed_rank;
  row.budget_exhausted = r.budget_exhausted;
  return row;
}

EvalTable aggregate_eval(std::vector<EvalRow> rows) {
  EvalTable table;
  std::vector<double> calls, ranks;
  for (const EvalRow& row : rows) {
    if (row.ir_calls_to_target) calls.push_back(static_cast<double>(*row.ir_calls_to_target));
    if (row.proposed_rank) ranks.push_back(static_cast<double>(*row.proposed_rank));
  }
  table.rows = std::move(rows);
  table.mean_calls = mean(calls);
  table.median_calls = median(calls);
  table.mean_rank = mean(ranks);
  table.median_rank = median(ranks);
  return table;
}

EvalTable eval_retrieval(const SearchTree& tree, const Corpus& corpus, Router& router,
                         const std::vector<std::string>& target_ids, int64_t budget,
                         SearchMethod method) {
  std::vector<EvalRow> rows;
  rows.reserve(target_ids.size());
  uint64_t search_key = 0;
  for (const std::string& id : target_ids)
    rows.push_back(eval_single(tree, corpus, router, id, budget, method, search_key++));
  return aggregate_eval(std::move(rows));
}

std::string eval_row_to_csv(const EvalRow& row) {
  std::string out = csv_escape(row.target_id);
  out += ",";
  if (row.ir_calls_to_target) out += std::to_string(*row.ir_calls_to_target);
  out += ",";
  if (row.proposed_rank) out += std::to_string(*row.proposed_rank);
  out += ",";
  out += row.budget_exhausted ? "true" : "false";
  out += "\n";
  return out;
}

std::string eval_to_csv(const EvalTable& table) {
  std::string out = kEvalCsvHeader;
  for (const EvalRow& row : table.rows) out += eval_row_to_csv(row);
  return out;
}

} // namespace semtree
