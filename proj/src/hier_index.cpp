#include "semtree/hier_index.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "semtree/parallel.hpp"
#include "semtree/rng.hpp"

namespace semtree {

using nlohmann::json;

namespace {

double cos_of(const Vec& a, const Vec& b) { return cosine(a, b); }

// argmax of dot(point, unit_centroids[j]); ties go to the lowest index.
int64_t nearest_centroid(const Vec& p, const std::vector<Vec>& unit_centroids) {
  int64_t best = 0;
  double best_dot = -std::numeric_limits<double>::infinity();
  for (size_t j = 0; j < unit_centroids.size(); ++j) {
    double d = dot(p, unit_centroids[j]);
    if (d > best_dot) {
      best_dot = d;
      best = static_cast<int64_t>(j);
    }
  }
  return best;
}

std::vector<Vec> normalize_all(const std::vector<Vec>& points) {
  std::vector<Vec> out;
  out.reserve(points.size());
  for (const Vec& p : points) out.push_back(normalize(p));
  return out;
}

} // namespace

KmeansResult kmeans(const std::vector<Vec>& points, int64_t k, uint64_t seed,
                    int max_iters, int workers) {
  const int64_t n = static_cast<int64_t>(points.size());
  if (k <= 0) throw ValidationError("hier_index: kmeans requires k >= 1");
  if (k > n) throw ValidationError("hier_index: kmeans requires k <= points (" +
                                   std::to_string(k) + " > " + std::to_string(n) + ")");
  if (max_iters < 1) throw ValidationError("hier_index: kmeans requires max_iters >= 1");
  const size_t dim = points[0].size();
  for (const Vec& p : points)
    if (p.size() != dim) throw ValidationError("hier_index: kmeans point dimension mismatch");

  std::vector<Vec> P = normalize_all(points);
  std::mt19937_64 rng(seed);

  // Distance-weighted greedy seeding: weight = squared cosine distance to the
  // nearest already-chosen seed.
  std::vector<Vec> centroids;
  centroids.reserve(k);
  std::vector<char> chosen(n, 0);
  std::vector<double> best_sim(n, -2.0);
  {
    int64_t first = uniform_index(rng, n);
    chosen[first] = 1;
    centroids.push_back(P[first]);
    for (int64_t i = 0; i < n; ++i) best_sim[i] = dot(P[i], P[first]);
  }
  std::vector<double> weight(n, 0.0);
  while (static_cast<int64_t>(centroids.size()) < k) {
    double total = 0.0;
    for (int64_t i = 0; i < n; ++i) {
      if (chosen[i]) {
        weight[i] = 0.0;
      } else {
        double d = 1.0 - best_sim[i];
        if (d < 0.0) d = 0.0;
        weight[i] = d * d;
      }
      total += weight[i];
    }
    int64_t pick = -1;
    if (total > 0.0) {
      double r = uniform_double(rng) * total;
      double acc = 0.0;
      for (int64_t i = 0; i < n; ++i) {
        acc += weight[i];
        if (!chosen[i] && weight[i] > 0.0 && acc > r) {
          pick = i;
          break;
        }
      }
    }
    if (pick < 0) {
      // All remaining points coincide with existing seeds; take the lowest
      // index not yet chosen.
      for (int64_t i = 0; i < n; ++i)
        if (!chosen[i]) {
          pick = i;
          break;
        }
    }
    chosen[pick] = 1;
    centroids.push_back(P[pick]);
    for (int64_t i = 0; i < n; ++i) best_sim[i] = std::max(best_sim[i], dot(P[i], P[pick]));
  }

  std::vector<int64_t> assign(n, 0);
  std::vector<int64_t> sizes(k, 0);

  auto assign_all = [&](const std::vector<Vec>& unit_c) {
    parallel_for(n, workers, [&](int64_t lo, int64_t hi) {
      for (int64_t i = lo; i < hi; ++i) assign[i] = nearest_centroid(P[i], unit_c);
    });
    std::fill(sizes.begin(), sizes.end(), 0);
    for (int64_t i = 0; i < n; ++i) sizes[assign[i]]++;
  };

  // Re-seeds each empty cluster with the point least similar to its own
  // centroid, taken only from clusters that can spare a member.
  auto fix_empties = [&](const std::vector<Vec>& unit_c) {
    for (int64_t j = 0; j < k; ++j) {
      if (sizes[j] > 0) continue;
      int64_t worst = -1;
      double worst_dot = std::numeric_limits<double>::infinity();
      for (int64_t i = 0; i < n; ++i) {
        if (sizes[assign[i]] < 2) continue;
        double d = dot(P[i], unit_c[assign[i]]);
        if (d < worst_dot) {
          worst_dot = d;
          worst = i;
        }
      }
      if (worst < 0) throw ValidationError("hier_index: cannot re-seed empty cluster");
      sizes[assign[worst]]--;
      assign[worst] = j;
      sizes[j] = 1;
    }
  };

  auto unit_of = [&](const std::vector<Vec>& cs) {
    std::vector<Vec> out;
    out.reserve(cs.size());
    for (const Vec& c : cs) {
      double nn = norm(c);
      if (nn == 0.0) throw ValidationError("hier_index: zero-norm centroid");
      Vec u(c.size());
      for (size_t t = 0; t < c.size(); ++t) u[t] = c[t] / nn;
      out.push_back(std::move(u));
    }
    return out;
  };

  for (int iter = 0; iter < max_iters; ++iter) {
    std::vector<Vec> unit_c = unit_of(centroids);
    assign_all(unit_c);
    fix_empties(unit_c);
    // Means of normalized members; a cancellation to zero falls back to the
    // lowest-index member.
    std::vector<Vec> means(k, Vec(dim, 0.0));
    for (int64_t i = 0; i < n; ++i) {
      Vec& m = means[assign[i]];
      const Vec& p = P[i];
      for (size_t t = 0; t < dim; ++t) m[t] += p[t];
    }
    for (int64_t j = 0; j < k; ++j) {
      for (size_t t = 0; t < dim; ++t) means[j][t] /= static_cast<double>(sizes[j]);
      if (norm(means[j]) == 0.0) {
        for (int64_t i = 0; i < n; ++i)
          if (assign[i] == j) {
            means[j] = P[i];
            break;
          }
      }
    }
    double shift = 0.0;
    for (int64_t j = 0; j < k; ++j) shift = std::max(shift, 1.0 - cos_of(centroids[j], means[j]));
    centroids = std::move(means);
    if (shift < 1e-6) break;
  }

  return KmeansResult{std::move(assign), std::move(centroids)};
}

void balance_level(ClusterSet& clusters, const std::vector<Vec>& points, int64_t c) {
  const int64_t k = static_cast<int64_t>(clusters.members.size());
  if (k != static_cast<int64_t>(clusters.centroids.size()))
    throw ValidationError("hier_index: balance_level centroid/member count mismatch");
  int64_t total = 0;
  for (const auto& m : clusters.members) total += static_cast<int64_t>(m.size());
  if (k * c < total)
    throw ValidationError("hier_index: balance_level capacity infeasible (" +
                          std::to_string(total) + " members, " + std::to_string(k * c) +
                          " slots)");

  std::vector<Vec> unit_c;
  unit_c.reserve(k);
  for (const Vec& cen : clusters.centroids) unit_c.push_back(normalize(cen));

  for (;;) {
    int64_t src = -1;
    int64_t src_size = c;
    for (int64_t j = 0; j < k; ++j) {
      int64_t s = static_cast<int64_t>(clusters.members[j].size());
      if (s > src_size) {
        src_size = s;
        src = j;
      }
    }
    if (src < 0) break;

    // Furthest member of src from its frozen centroid; ties to the lowest
    // member index.
    auto& mem = clusters.members[src];
    size_t worst_pos = 0;
    int64_t worst_member = std::numeric_limits<int64_t>::max();
    double worst_dot = std::numeric_limits<double>::infinity();
    for (size_t t = 0; t < mem.size(); ++t) {
      double d = dot(normalize(points[mem[t]]), unit_c[src]);
      if (d < worst_dot || (d == worst_dot && mem[t] < worst_member)) {
        worst_dot = d;
        worst_pos = t;
        worst_member = mem[t];
      }
    }
    int64_t moving = mem[worst_pos];
    mem.erase(mem.begin() + static_cast<std::ptrdiff_t>(worst_pos));

    int64_t dst = -1;
    double best_dot = -std::numeric_limits<double>::infinity();
    Vec moving_unit = normalize(points[moving]);
    for (int64_t j = 0; j < k; ++j) {
      if (j == src) continue;
      if (static_cast<int64_t>(clusters.members[j].size()) >= c) continue;
      double d = dot(moving_unit, unit_c[j]);
      if (d > best_dot) {
        best_dot = d;
        dst = j;
      }
    }
    if (dst < 0) throw ValidationError("hier_index: balance_level found no open cluster");
    clusters.members[dst].push_back(moving);
  }

  for (auto& m : clusters.members) std::sort(m.begin(), m.end());
}

std::vector<int64_t> level_size_chain(int64_t n, int64_t c) {
  if (n < 1) throw ValidationError("hier_index: level chain requires n >= 1");
  if (c < 2) throw ValidationError("hier_index: level chain requires c >= 2");
  std::vector<int64_t> chain{n};
  int64_t cur = n;
  do {
    cur = (cur + c - 1) / c;
    chain.push_back(cur);
  } while (cur > 1);
  return chain;
}

SearchTree build_tree(const Corpus& corpus, int64_t c, uint64_t seed, const BuildOptions& opts) {
  if (corpus.size() < 1) throw ValidationError("hier_index: build_tree requires N >= 1");
  if (c < 2) throw ValidationError("hier_index: build_tree requires c >= 2");

  SearchTree tree;
  tree.branching = c;
  tree.corpus_fp = corpus_fingerprint(corpus);

  // Representatives of the current level's items: normalized embeddings for
  // docs, stored centroids for internal nodes.
  std::vector<Vec> reps;
  reps.reserve(corpus.docs.size());
  for (const DocRecord& d : corpus.docs) reps.push_back(normalize(d.embedding));

  std::vector<int64_t> item_ids; // doc positions at level 0, node ids above
  item_ids.reserve(reps.size());
  for (int64_t i = 0; i < corpus.size(); ++i) item_ids.push_back(i);

  int level = 0;
  int64_t next_id = 0;
  for (;;) {
    ++level;
    const int64_t n_cur = static_cast<int64_t>(reps.size());
    const int64_t k = (n_cur + c - 1) / c;
    KmeansResult km = kmeans(reps, k, derive_seed(seed, static_cast<uint64_t>(level)),
                             opts.max_iters, opts.workers);

    ClusterSet cs;
    cs.centroids = std::move(km.centroids);
    cs.members.assign(static_cast<size_t>(k), {});
    for (int64_t i = 0; i < n_cur; ++i) cs.members[km.assignments[i]].push_back(i);
    balance_level(cs, reps, c);

    std::vector<Vec> next_reps;
    next_reps.reserve(k);
    std::vector<int64_t> next_ids;
    next_ids.reserve(k);
    for (int64_t j = 0; j < k; ++j) {
      TreeNode node;
      node.node_id = next_id++;
      node.level = level;
      const auto& mem = cs.members[j];
      if (mem.empty()) throw ValidationError("hier_index: empty cluster after balancing");
      node.children.reserve(mem.size());
      for (int64_t m : mem) node.children.push_back(item_ids[m]);
      // Centroid recomputed from final membership.
      Vec mean(reps[0].size(), 0.0);
      for (int64_t m : mem)
        for (size_t t = 0; t < mean.size(); ++t) mean[t] += reps[m][t];
      for (size_t t = 0; t < mean.size(); ++t) mean[t] /= static_cast<double>(mem.size());
      if (norm(mean) == 0.0) mean = reps[mem.front()];
      node.centroid = std::move(mean);
      next_reps.push_back(node.centroid);
      next_ids.push_back(node.node_id);
      tree.nodes.push_back(std::move(node));
    }

    if (k == 1) {
      tree.root_id = next_id - 1;
      tree.depth = level;
      break;
    }
    reps = std::move(next_reps);
    item_ids = std::move(next_ids);
  }

  tree.rebuild_derived(corpus.size());
  return tree;
}

std::vector<int64_t> SearchTree::path_to_doc(int64_t doc_pos) const {
  if (doc_pos < 0 || doc_pos >= doc_count())
    throw ValidationError("hier_index: doc position out of range");
  std::vector<int64_t> path;
  int64_t cur = doc_parent[static_cast<size_t>(doc_pos)];
  while (cur != -1) {
    path.push_back(cur);
    cur = node_parent[static_cast<size_t>(cur)];
  }
  std::reverse(path.begin(), path.end());
  return path;
}

void SearchTree::rebuild_derived(int64_t expected_docs) {
  const int64_t n_nodes = static_cast<int64_t>(nodes.size());
  if (n_nodes == 0) throw ValidationError("hier_index: tree has no nodes");
  for (int64_t i = 0; i < n_nodes; ++i) {
    if (nodes[static_cast<size_t>(i)].node_id != i)
      throw ValidationError("hier_index: node ids must be contiguous from 0");
    if (nodes[static_cast<size_t>(i)].children.empty())
      throw ValidationError("hier_index: node " + std::to_string(i) + " has no children");
    if (static_cast<int64_t>(nodes[static_cast<size_t>(i)].children.size()) > branching)
      throw ValidationError("hier_index: node " + std::to_string(i) + " exceeds capacity");
  }
  if (root_id < 0 || root_id >= n_nodes) throw ValidationError("hier_index: bad root id");

  int64_t max_doc = -1;
  for (const TreeNode& node : nodes)
    if (node.level == 1)
      for (int64_t d : node.children) max_doc = std::max(max_doc, d);
  int64_t n_docs = max_doc + 1;
  if (expected_docs >= 0 && n_docs != expected_docs)
    throw ValidationError("hier_index: tree covers " + std::to_string(n_docs) +
                          " docs, expected " + std::to_string(expected_docs));

  doc_parent.assign(static_cast<size_t>(n_docs), -1);
  node_parent.assign(static_cast<size_t>(n_nodes), -1);
  for (const TreeNode& node : nodes) {
    if (node.level == 1) {
      for (int64_t d : node.children) {
        if (d < 0 || d >= n_docs)
          throw ValidationError("hier_index: doc child out of range");
        if (doc_parent[static_cast<size_t>(d)] != -1)
          throw ValidationError("hier_index: doc " + std::to_string(d) + " has two parents");
        doc_parent[static_cast<size_t>(d)] = node.node_id;
      }
    } else {
      for (int64_t ch : node.children) {
        if (ch < 0 || ch >= n_nodes)
          throw ValidationError("hier_index: node child out of range");
        if (nodes[static_cast<size_t>(ch)].level != node.level - 1)
          throw ValidationError("hier_index: child level mismatch under node " +
                                std::to_string(node.node_id));
        if (node_parent[static_cast<size_t>(ch)] != -1)
          throw ValidationError("hier_index: node " + std::to_string(ch) + " has two parents");
        node_parent[static_cast<size_t>(ch)] = node.node_id;
      }
    }
  }
  for (int64_t d = 0; d < n_docs; ++d)
    if (doc_parent[static_cast<size_t>(d)] == -1)
      throw ValidationError("hier_index: doc " + std::to_string(d) + " not covered");
  for (int64_t i = 0; i < n_nodes; ++i)
    if (i != root_id && node_parent[static_cast<size_t>(i)] == -1)
      throw ValidationError("hier_index: node " + std::to_string(i) + " unreachable");
  if (node_parent[static_cast<size_t>(root_id)] != -1)
    throw ValidationError("hier_index: root has a parent");
  if (nodes[static_cast<size_t>(root_id)].level != depth)
    throw ValidationError("hier_index: root level disagrees with depth");
}

void save_tree(const SearchTree& tree, const std::string& path) {
  json doc;
  doc["format"] = "semtree-tree";
  doc["version"] = 1;
  doc["branching"] = tree.branching;
  doc["depth"] = tree.depth;
  doc["corpus_fingerprint"] = tree.corpus_fp;
  doc["root_id"] = tree.root_id;
  json nodes = json::array();
  for (const TreeNode& n : tree.nodes) {
    json jn;
    jn["id"] = n.node_id;
    jn["level"] = n.level;
    jn["centroid"] = n.centroid;
    jn["children"] = n.children;
    nodes.push_back(std::move(jn));
  }
  doc["nodes"] = std::move(nodes);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("hier_index: cannot write " + path);
  out << doc.dump() << "\n";
  if (!out) throw IoError("hier_index: write failed for " + path);
}

SearchTree load_tree(const std::string& path, const Corpus* expected_corpus) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("hier_index: cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  json doc;
  try {
    doc = json::parse(buf.str());
  } catch (const json::parse_error& e) {
    throw ParseError("hier_index: tree parse error at byte " + std::to_string(e.byte) + " in " +
                     path);
  }
  try {
    if (!doc.is_object() || doc.value("format", "") != std::string("semtree-tree"))
      throw ValidationError("hier_index: not a tree file: " + path);
    if (doc.value("version", -1) != 1)
      throw ValidationError("hier_index: unsupported tree version in " + path);
    SearchTree tree;
    tree.branching = doc.at("branching").get<int64_t>();
    tree.depth = doc.at("depth").get<int>();
    tree.corpus_fp = doc.at("corpus_fingerprint").get<std::string>();
    tree.root_id = doc.at("root_id").get<int64_t>();
    tree.nodes.resize(doc.at("nodes").size());
    for (const auto& jn : doc.at("nodes")) {
      TreeNode n;
      n.node_id = jn.at("id").get<int64_t>();
      n.level = jn.at("level").get<int>();
      n.centroid = jn.at("centroid").get<Vec>();
      n.children = jn.at("children").get<std::vector<int64_t>>();
      if (n.node_id < 0 || n.node_id >= static_cast<int64_t>(tree.nodes.size()))
        throw ValidationError("hier_index: node id out of range in " + path);
      tree.nodes[static_cast<size_t>(n.node_id)] = std::move(n);
    }
    if (expected_corpus != nullptr) {
      std::string fp = corpus_fingerprint(*expected_corpus);
      if (fp != tree.corpus_fp)
        throw ValidationError("hier_index: corpus fingerprint mismatch (tree " + tree.corpus_fp +
                              ", corpus " + fp + ")");
      tree.rebuild_derived(expected_corpus->size());
    } else {
      tree.rebuild_derived();
    }
    return tree;
  } catch (const json::exception& e) {
    throw ParseError("hier_index: malformed tree file " + path + ": " + e.what());
  }
}

} // namespace semtree
