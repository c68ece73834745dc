#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "semtree/corpus.hpp"

namespace semtree {

// Documents live at level 0 and are referenced by corpus position; internal
// nodes start at level 1. Children of a level-1 node are doc positions,
// children of higher nodes are node ids.
struct TreeNode {
  int64_t node_id = -1;
  int level = 0;
  Vec centroid;
  std::vector<int64_t> children;
};

struct SearchTree {
  std::vector<TreeNode> nodes; // indexed by node_id
  int64_t root_id = -1;
  int64_t branching = 0;
  int depth = 0;
  std::string corpus_fp;

  // Derived, rebuilt after load/build; not serialized.
  std::vector<int64_t> doc_parent;  // doc position -> level-1 node id
  std::vector<int64_t> node_parent; // node id -> parent node id, root -> -1

  int64_t doc_count() const { return static_cast<int64_t>(doc_parent.size()); }
  const TreeNode& node(int64_t id) const { return nodes[static_cast<size_t>(id)]; }
  // Root-first chain of internal node ids ending at the doc's level-1 parent.
  std::vector<int64_t> path_to_doc(int64_t doc_pos) const;
  // Validates structure and fills doc_parent/node_parent. Throws on violation.
  void rebuild_derived(int64_t expected_docs = -1);
};

struct KmeansResult {
  std::vector<int64_t> assignments; // point -> cluster
  std::vector<Vec> centroids;       // mean of each cluster's normalized points
};

// Spherical k-means: points are normalized internally, distance is cosine.
// Deterministic given seed; empty clusters re-seeded from the point furthest
// from its own centroid. workers only splits the assignment scan; results are
// identical for any worker count.
KmeansResult kmeans(const std::vector<Vec>& points, int64_t k, uint64_t seed,
                    int max_iters = 50, int workers = 1);

struct ClusterSet {
  std::vector<Vec> centroids; // frozen during balancing
  std::vector<std::vector<int64_t>> members;
};

// Enforces every cluster size <= c by repeatedly evicting, from the largest
// over-capacity cluster, the member least similar to that cluster's frozen
// centroid, into the nearest centroid with spare room. Total membership is
// preserved. Requires |clusters|*c >= total members.
void balance_level(ClusterSet& clusters, const std::vector<Vec>& points, int64_t c);

struct BuildOptions {
  int max_iters = 50;
  int workers = 1;
};

// Bottom-up rounds of k-means with k = ceil(n/c) per round, balanced to
// capacity c, until a single root remains. Level sizes follow the exact
// ceil-division chain.
SearchTree build_tree(const Corpus& corpus, int64_t c, uint64_t seed,
                      const BuildOptions& opts = {});

void save_tree(const SearchTree& tree, const std::string& path);
// expected_corpus, when given, must match the stored fingerprint and size.
SearchTree load_tree(const std::string& path, const Corpus* expected_corpus = nullptr);

// Level sizes n_0=N, n_l=ceil(n_{l-1}/c) down to 1 (n_0 included, root last).
std::vector<int64_t> level_size_chain(int64_t n, int64_t c);

} // namespace semtree
