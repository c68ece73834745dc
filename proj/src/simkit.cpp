#include "semtree/simkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "json.hpp"
#include "semtree/parallel.hpp"
#include "semtree/rng.hpp"
#include "semtree/router.hpp"
#include "semtree/search.hpp"

namespace semtree {

using nlohmann::json;

namespace {

// Seed-stream tags: every random decision in a trial hangs off
// derive_seed(cfg.seed, trial) with a fixed per-purpose stream.
constexpr uint64_t kStreamPolicy = 1;           // policy's own draws
constexpr uint64_t kStreamStepBase = 1000;      // world: step s uses base + 2s
constexpr uint64_t kStreamSubspaceOff = 1;      // world: base + 2s + 1
constexpr uint64_t kStreamSearchBase = 500;     // router noise: base + step

bool in_sorted(const std::vector<int64_t>& xs, int64_t v) {
  return std::binary_search(xs.begin(), xs.end(), v);
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return std::string(buf);
}

// Maps a draw from [0, n - |skips|) onto [0, n) \ skips (skips sorted).
int64_t map_skipping(int64_t v, const std::vector<int64_t>& skips) {
  for (int64_t s : skips) {
    if (s <= v) ++v;
    else break;
  }
  return v;
}

void aggregate(SimResult& res) {
  int64_t total_calls = 0;
  int64_t successes = 0;
  for (const TrialRecord& t : res.trials) {
    total_calls += t.calls;
    if (t.success) ++successes;
  }
  const double n = static_cast<double>(res.trials.size());
  res.mean_calls = n == 0.0 ? 0.0 : static_cast<double>(total_calls) / n;
  res.success_rate = n == 0.0 ? 0.0 : static_cast<double>(successes) / n;
}

int64_t tree_depth_for(int64_t n, int64_t c) {
  return static_cast<int64_t>(level_size_chain(n, c).size()) - 1;
}

template <typename TrialFn>
SimResult run_trials(const std::string& policy, const SimConfig& cfg, int workers,
                     TrialFn&& trial_fn) {
  SimResult res;
  res.policy = policy;
  res.cfg = cfg;
  res.trials.assign(static_cast<size_t>(cfg.trials), TrialRecord{});
  parallel_for(cfg.trials, workers, [&](int64_t lo, int64_t hi) {
    for (int64_t t = lo; t < hi; ++t)
      res.trials[static_cast<size_t>(t)] = trial_fn(static_cast<uint64_t>(t));
  });
  aggregate(res);
  return res;
}

} // namespace

void validate_sim_config(const SimConfig& cfg) {
  if (cfg.N < 1) throw ValidationError("simkit: N must be >= 1");
  if (cfg.k < 1) throw ValidationError("simkit: k must be >= 1");
  if (cfg.M < 1 || cfg.M > cfg.N) throw ValidationError("simkit: M must satisfy 1 <= M <= N");
  int64_t nm = cfg.effective_nm();
  if (nm < cfg.M || nm > cfg.N)
    throw ValidationError("simkit: N_m must satisfy M <= N_m <= N");
  if (cfg.c < 2) throw ValidationError("simkit: c must be >= 2");
  if (!(cfg.alpha >= 0.0 && cfg.alpha <= 1.0))
    throw ValidationError("simkit: alpha must lie in [0,1]");
  if (cfg.trials < 1) throw ValidationError("simkit: trials must be >= 1");
  if (cfg.budget < 0) throw ValidationError("simkit: budget must be >= 0");
}

PlantedWorld make_world(const SimConfig& cfg, uint64_t trial) {
  uint64_t trial_seed = derive_seed(cfg.seed, trial);
  PlantedWorld world;
  world.steps.reserve(static_cast<size_t>(cfg.k));
  for (int64_t s = 0; s < cfg.k; ++s) {
    std::mt19937_64 rng(derive_seed(trial_seed, kStreamStepBase + 2 * static_cast<uint64_t>(s)));
    PlantedStep step;
    step.target = static_cast<int64_t>(uniform_index(rng, static_cast<uint64_t>(cfg.N)));
    std::vector<int64_t> others =
        sample_without_replacement(rng, cfg.N - 1, cfg.M - 1);
    step.tolerance.reserve(static_cast<size_t>(cfg.M));
    for (int64_t v : others) step.tolerance.push_back(v >= step.target ? v + 1 : v);
    step.tolerance.push_back(step.target);
    std::sort(step.tolerance.begin(), step.tolerance.end());
    world.steps.push_back(std::move(step));
  }
  return world;
}

std::vector<int64_t> materialize_subspace(const SimConfig& cfg, uint64_t trial, int64_t step,
                                          const PlantedStep& planted) {
  uint64_t trial_seed = derive_seed(cfg.seed, trial);
  std::mt19937_64 rng(derive_seed(
      trial_seed, kStreamStepBase + 2 * static_cast<uint64_t>(step) + kStreamSubspaceOff));
  int64_t nm = cfg.effective_nm();
  std::vector<int64_t> extra_raw =
      sample_without_replacement(rng, cfg.N - cfg.M, nm - cfg.M);
  std::vector<int64_t> subspace = planted.tolerance;
  subspace.reserve(static_cast<size_t>(nm));
  for (int64_t v : extra_raw) subspace.push_back(map_skipping(v, planted.tolerance));
  std::sort(subspace.begin(), subspace.end());
  return subspace;
}

SearchTree make_uniform_tree(int64_t n_docs, int64_t c) {
  if (n_docs < 1) throw ValidationError("simkit: uniform tree needs n >= 1");
  if (c < 2) throw ValidationError("simkit: uniform tree needs c >= 2");
  SearchTree tree;
  tree.branching = c;
  std::vector<int64_t> prev_ids; // previous level's ids (docs at level 0)
  int64_t cur = n_docs;
  int level = 0;
  int64_t next_id = 0;
  bool docs_below = true;
  for (;;) {
    ++level;
    int64_t k = (cur + c - 1) / c;
    std::vector<int64_t> ids;
    ids.reserve(static_cast<size_t>(k));
    for (int64_t j = 0; j < k; ++j) {
      TreeNode node;
      node.node_id = next_id++;
      node.level = level;
      node.centroid = Vec{1.0};
      int64_t lo = j * c;
      int64_t hi = std::min(cur, lo + c);
      node.children.reserve(static_cast<size_t>(hi - lo));
      for (int64_t t = lo; t < hi; ++t)
        node.children.push_back(docs_below ? t : prev_ids[static_cast<size_t>(t)]);
      ids.push_back(node.node_id);
      tree.nodes.push_back(std::move(node));
    }
    if (k == 1) {
      tree.root_id = next_id - 1;
      tree.depth = level;
      break;
    }
    prev_ids = std::move(ids);
    cur = k;
    docs_below = false;
  }
  tree.rebuild_derived(n_docs);
  return tree;
}

SimResult sim_brute_force(const SimConfig& cfg, int workers) {
  validate_sim_config(cfg);
  SimResult res = run_trials("brute-force", cfg, workers, [&](uint64_t trial) {
    PlantedWorld world = make_world(cfg, trial);
    std::mt19937_64 rng(derive_seed(derive_seed(cfg.seed, trial), kStreamPolicy));
    TrialRecord rec;
    rec.success = true;
    for (const PlantedStep& step : world.steps) {
      int64_t guess = static_cast<int64_t>(uniform_index(rng, static_cast<uint64_t>(cfg.N)));
      rec.calls += 1;
      if (!in_sorted(step.tolerance, guess)) rec.success = false;
    }
    return rec;
  });
  res.analytic_reference =
      std::pow(static_cast<double>(cfg.M) / static_cast<double>(cfg.N),
               static_cast<double>(cfg.k));
  return res;
}

SimResult sim_sequential_scan(const SimConfig& cfg, int workers) {
  validate_sim_config(cfg);
  SimResult res = run_trials("sequential-scan", cfg, workers, [&](uint64_t trial) {
    PlantedWorld world = make_world(cfg, trial);
    std::mt19937_64 rng(derive_seed(derive_seed(cfg.seed, trial), kStreamPolicy));
    TrialRecord rec;
    rec.success = true;
    for (const PlantedStep& step : world.steps) {
      for (;;) {
        if (cfg.budget > 0 && rec.calls >= cfg.budget) {
          rec.success = false;
          return rec;
        }
        int64_t draw = static_cast<int64_t>(uniform_index(rng, static_cast<uint64_t>(cfg.N)));
        rec.calls += 1;
        if (in_sorted(step.tolerance, draw)) break;
      }
    }
    return rec;
  });
  res.analytic_reference =
      static_cast<double>(cfg.k) * static_cast<double>(cfg.N) / static_cast<double>(cfg.M);
  return res;
}

namespace {

// Shared by the hierarchical and motivation policies: exact-target best-first
// search over a prebuilt uniform tree. A trial that exhausts its budget fails
// and is charged the budget it burned.
TrialRecord planted_search_trial(const SimConfig& cfg, uint64_t trial, const SearchTree& tree,
                                 Router& router, bool with_planning,
                                 const std::vector<int64_t>& targets) {
  uint64_t trial_seed = derive_seed(cfg.seed, trial);
  QueryContext query;
  TrialRecord rec;
  rec.success = true;
  // Without a cap, the whole tree can be expanded; that bounds every search.
  const int64_t unlimited = static_cast<int64_t>(tree.nodes.size()) + 1;
  for (int64_t s = 0; s < cfg.k; ++s) {
    if (with_planning) {
      if (cfg.budget > 0 && rec.calls >= cfg.budget) {
        rec.success = false;
        return rec;
      }
      rec.calls += 1; // motivation planning is a single inference
    }
    int64_t remaining = cfg.budget > 0 ? cfg.budget - rec.calls : unlimited;
    if (remaining < 1) {
      rec.success = false;
      return rec;
    }
    SearchResult sr = best_first_search(
        tree, router, query, remaining, targets[static_cast<size_t>(s)],
        derive_seed(trial_seed, kStreamSearchBase + static_cast<uint64_t>(s)));
    rec.calls += sr.ir_calls;
    if (!sr.ir_calls_to_target.has_value()) {
      rec.success = false;
      return rec;
    }
  }
  return rec;
}

} // namespace

SimResult sim_hierarchical(const SimConfig& cfg, int workers) {
  validate_sim_config(cfg);
  SearchTree tree = make_uniform_tree(cfg.N, cfg.c);
  RouterConfig rc;
  rc.kind = RouterKind::planted_oracle;
  rc.alpha = cfg.alpha;
  rc.seed = cfg.seed;
  auto router = make_router(rc);
  SimResult res = run_trials("hierarchical", cfg, workers, [&](uint64_t trial) {
    PlantedWorld world = make_world(cfg, trial);
    std::vector<int64_t> targets;
    targets.reserve(world.steps.size());
    for (const PlantedStep& step : world.steps) targets.push_back(step.target);
    return planted_search_trial(cfg, trial, tree, *router, false, targets);
  });
  if (cfg.alpha == 1.0)
    res.analytic_reference =
        static_cast<double>(cfg.k) * static_cast<double>(tree_depth_for(cfg.N, cfg.c));
  return res;
}

SimResult sim_motivation(const SimConfig& cfg, int workers) {
  validate_sim_config(cfg);
  const int64_t nm = cfg.effective_nm();
  SearchTree tree = make_uniform_tree(nm, cfg.c);
  RouterConfig rc;
  rc.kind = RouterKind::planted_oracle;
  rc.alpha = cfg.alpha;
  rc.seed = cfg.seed;
  auto router = make_router(rc);
  SimResult res = run_trials("motivation", cfg, workers, [&](uint64_t trial) {
    PlantedWorld world = make_world(cfg, trial);
    std::vector<int64_t> targets;
    targets.reserve(world.steps.size());
    for (int64_t s = 0; s < cfg.k; ++s) {
      const PlantedStep& step = world.steps[static_cast<size_t>(s)];
      if (nm == cfg.N) {
        // Degenerate subspace: the tree is the global one, labels unchanged.
        targets.push_back(step.target);
        continue;
      }
      std::vector<int64_t> subspace = materialize_subspace(cfg, trial, s, step);
      auto it = std::lower_bound(subspace.begin(), subspace.end(), step.target);
      targets.push_back(static_cast<int64_t>(it - subspace.begin()));
    }
    return planted_search_trial(cfg, trial, tree, *router, true, targets);
  });
  if (cfg.alpha == 1.0)
    res.analytic_reference = static_cast<double>(cfg.k) *
                             (1.0 + static_cast<double>(tree_depth_for(nm, cfg.c)));
  return res;
}

SimResult run_policy(const std::string& policy, const SimConfig& cfg, int workers) {
  if (policy == "brute-force") return sim_brute_force(cfg, workers);
  if (policy == "sequential-scan") return sim_sequential_scan(cfg, workers);
  if (policy == "hierarchical") return sim_hierarchical(cfg, workers);
  if (policy == "motivation") return sim_motivation(cfg, workers);
  throw ValidationError("simkit: unknown policy '" + policy + "'");
}

std::string sim_results_to_csv(const std::vector<SimResult>& results) {
  std::string out =
      "policy,N,k,M,N_m,c,alpha,trials,mean_calls,success_rate,analytic_reference\n";
  for (const SimResult& r : results) {
    out += r.policy;
    out += "," + std::to_string(r.cfg.N);
    out += "," + std::to_string(r.cfg.k);
    out += "," + std::to_string(r.cfg.M);
    out += "," + std::to_string(r.cfg.effective_nm());
    out += "," + std::to_string(r.cfg.c);
    out += "," + format_double(r.cfg.alpha);
    out += "," + std::to_string(r.cfg.trials);
    out += "," + format_double(r.mean_calls);
    out += "," + format_double(r.success_rate);
    out += ",";
    if (r.analytic_reference) out += format_double(*r.analytic_reference);
    out += "\n";
  }
  return out;
}

std::vector<CurvePoint> cumulative_curve(const SimResult& result) {
  std::vector<CurvePoint> curve;
  curve.reserve(result.trials.size());
  int64_t calls = 0, successes = 0;
  const double total = static_cast<double>(result.trials.size());
  for (size_t i = 0; i < result.trials.size(); ++i) {
    calls += result.trials[i].calls;
    if (result.trials[i].success) ++successes;
    curve.push_back(CurvePoint{static_cast<int64_t>(i) + 1, calls, successes,
                               static_cast<double>(successes) / total});
  }
  return curve;
}

std::string curve_to_csv(const SimResult& result) {
  std::string out = "policy,N,k,M,N_m,c,alpha,trial,cum_calls,cum_successes,success_fraction\n";
  std::string prefix = result.policy + "," + std::to_string(result.cfg.N) + "," +
                       std::to_string(result.cfg.k) + "," + std::to_string(result.cfg.M) + "," +
                       std::to_string(result.cfg.effective_nm()) + "," +
                       std::to_string(result.cfg.c) + "," + format_double(result.cfg.alpha);
  for (const CurvePoint& p : cumulative_curve(result)) {
    out += prefix;
    out += "," + std::to_string(p.trial);
    out += "," + std::to_string(p.cum_calls);
    out += "," + std::to_string(p.cum_successes);
    out += "," + format_double(p.success_fraction);
    out += "\n";
  }
  return out;
}

std::string success_by_k_csv(const std::vector<SimResult>& results) {
  std::string out = "policy,k,success_rate,mean_calls\n";
  for (const SimResult& r : results) {
    out += r.policy + "," + std::to_string(r.cfg.k) + "," + format_double(r.success_rate) + "," +
           format_double(r.mean_calls) + "\n";
  }
  return out;
}

SweepSpec load_sweep(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("simkit: cannot open sweep file " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError("simkit: sweep parse error at byte " + std::to_string(e.byte) + " in " +
                     path);
  }
  SweepSpec spec;
  try {
    if (!doc.contains("axes") || !doc["axes"].is_object())
      throw ValidationError("simkit: sweep file needs an 'axes' object");
    const json& axes = doc["axes"];
    if (!axes.contains("policy")) throw ValidationError("simkit: sweep needs a policy axis");
    spec.policies = axes["policy"].get<std::vector<std::string>>();
    if (!axes.contains("N")) throw ValidationError("simkit: sweep needs an N axis");
    spec.Ns = axes["N"].get<std::vector<int64_t>>();
    if (axes.contains("k")) spec.ks = axes["k"].get<std::vector<int64_t>>();
    if (axes.contains("M")) spec.Ms = axes["M"].get<std::vector<int64_t>>();
    if (axes.contains("N_m")) spec.N_ms = axes["N_m"].get<std::vector<int64_t>>();
    if (axes.contains("c")) spec.cs = axes["c"].get<std::vector<int64_t>>();
    if (axes.contains("alpha")) spec.alphas = axes["alpha"].get<std::vector<double>>();
    spec.trials = doc.value("trials", static_cast<int64_t>(1));
    spec.seed = doc.value("seed", static_cast<uint64_t>(0));
    spec.budget = doc.value("budget", static_cast<int64_t>(0));
  } catch (const json::exception& e) {
    throw ParseError("simkit: malformed sweep file " + path + ": " + e.what());
  }
  return spec;
}

std::vector<SimResult> run_sweep(const SweepSpec& spec, int workers) {
  std::vector<SimResult> results;
  for (const std::string& policy : spec.policies)
    for (int64_t N : spec.Ns)
      for (int64_t k : spec.ks)
        for (int64_t M : spec.Ms)
          for (int64_t N_m : spec.N_ms)
            for (int64_t c : spec.cs)
              for (double alpha : spec.alphas) {
                SimConfig cfg;
                cfg.N = N;
                cfg.k = k;
                cfg.M = M;
                cfg.N_m = N_m;
                cfg.c = c;
                cfg.alpha = alpha;
                cfg.trials = spec.trials;
                cfg.seed = spec.seed;
                cfg.budget = spec.budget;
                results.push_back(run_policy(policy, cfg, workers));
              }
  return results;
}

} // namespace semtree
