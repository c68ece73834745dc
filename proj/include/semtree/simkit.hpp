#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "semtree/hier_index.hpp"

namespace semtree {

struct SimConfig {
  int64_t N = 0;      // knowledge-base size
  int64_t k = 1;      // chain length
  int64_t M = 1;      // tolerance-set size
  int64_t N_m = 0;    // motivation subspace size; 0 means N
  int64_t c = 15;     // branching factor
  double alpha = 1.0; // router accuracy
  int64_t trials = 1;
  uint64_t seed = 0;
  int64_t budget = 0; // max calls per trial; 0 means unlimited

  int64_t effective_nm() const { return N_m == 0 ? N : N_m; }
};

void validate_sim_config(const SimConfig& cfg);

struct TrialRecord {
  int64_t calls = 0;
  bool success = false;
};

struct SimResult {
  std::string policy;
  SimConfig cfg;
  double mean_calls = 0.0;
  double success_rate = 0.0;
  std::optional<double> analytic_reference; // closed form, when one exists
  std::vector<TrialRecord> trials;
};

// One planted chain step: the true inspiration and its tolerance set.
struct PlantedStep {
  int64_t target = 0;
  std::vector<int64_t> tolerance; // sorted, |tolerance| = M, contains target
};

struct PlantedWorld {
  std::vector<PlantedStep> steps; // length k
};

// Deterministic world for (cfg.seed, trial).
PlantedWorld make_world(const SimConfig& cfg, uint64_t trial);

// The motivation-aligned subspace for one step: a uniform size-N_m superset
// of the step's tolerance set, sorted.
std::vector<int64_t> materialize_subspace(const SimConfig& cfg, uint64_t trial, int64_t step,
                                          const PlantedStep& planted);

// Balanced c-ary tree over n_docs synthetic leaves: contiguous children,
// ceil-division level sizes, placeholder centroids. Structure matches what
// build_tree yields on featureless data.
SearchTree make_uniform_tree(int64_t n_docs, int64_t c);

// k independent uniform draws per trial; success iff every draw lands in its
// step's tolerance set. Analytic success: (M/N)^k.
SimResult sim_brute_force(const SimConfig& cfg, int workers = 1);

// Per step, uniform draws until a tolerance-set member is hit (geometric with
// p = M/N). Analytic mean calls: k*N/M.
SimResult sim_sequential_scan(const SimConfig& cfg, int workers = 1);

// Best-first search with the planted router over a balanced c-ary tree per
// step. With alpha = 1 every step costs exactly the tree depth.
SimResult sim_hierarchical(const SimConfig& cfg, int workers = 1);

// One planning call per step, then hierarchical search restricted to the
// motivation subspace. With alpha = 1 each step costs 1 + depth(N_m).
SimResult sim_motivation(const SimConfig& cfg, int workers = 1);

SimResult run_policy(const std::string& policy, const SimConfig& cfg, int workers = 1);

// Header: policy,N,k,M,N_m,c,alpha,trials,mean_calls,success_rate,analytic_reference.
std::string sim_results_to_csv(const std::vector<SimResult>& results);

struct CurvePoint {
  int64_t trial = 0; // 1-based
  int64_t cum_calls = 0;
  int64_t cum_successes = 0;
  double success_fraction = 0.0; // cum_successes / total trials
};

std::vector<CurvePoint> cumulative_curve(const SimResult& result);
std::string curve_to_csv(const SimResult& result);
std::string success_by_k_csv(const std::vector<SimResult>& results);

struct SweepSpec {
  std::vector<std::string> policies;
  std::vector<int64_t> Ns;
  std::vector<int64_t> ks{1};
  std::vector<int64_t> Ms{1};
  std::vector<int64_t> N_ms{0};
  std::vector<int64_t> cs{15};
  std::vector<double> alphas{1.0};
  int64_t trials = 1;
  uint64_t seed = 0;
  int64_t budget = 0;
};

SweepSpec load_sweep(const std::string& path);
// Cross product over all axes, in declaration order.
std::vector<SimResult> run_sweep(const SweepSpec& spec, int workers = 1);

} // namespace semtree
