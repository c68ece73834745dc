#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "semtree/csv.hpp"
#include "semtree/simkit.hpp"
#include "testutil.hpp"

using namespace semtree;

namespace {

SimConfig cfg_of(int64_t N, int64_t k, int64_t M, int64_t trials, uint64_t seed) {
  SimConfig cfg;
  cfg.N = N;
  cfg.k = k;
  cfg.M = M;
  cfg.trials = trials;
  cfg.seed = seed;
  return cfg;
}

} // namespace

TEST_CASE("sim config validation") {
  SimConfig ok = cfg_of(100, 2, 10, 5, 1);
  CHECK_NOTHROW(validate_sim_config(ok));

  SimConfig bad = ok;
  bad.N = 0;
  CHECK_THROWS_AS(validate_sim_config(bad), ValidationError);
  bad = ok;
  bad.M = 101; // M > N
  CHECK_THROWS_AS(validate_sim_config(bad), ValidationError);
  bad = ok;
  bad.N_m = 5; // N_m < M
  CHECK_THROWS_AS(validate_sim_config(bad), ValidationError);
  bad = ok;
  bad.N_m = 200; // N_m > N
  CHECK_THROWS_AS(validate_sim_config(bad), ValidationError);
  bad = ok;
  bad.c = 1;
  CHECK_THROWS_AS(validate_sim_config(bad), ValidationError);
  bad = ok;
  bad.alpha = 1.5;
  CHECK_THROWS_AS(validate_sim_config(bad), ValidationError);
  bad = ok;
  bad.alpha = -0.1;
  CHECK_THROWS_AS(validate_sim_config(bad), ValidationError);
  bad = ok;
  bad.trials = 0;
  CHECK_THROWS_AS(validate_sim_config(bad), ValidationError);
  bad = ok;
  bad.budget = -1;
  CHECK_THROWS_AS(validate_sim_config(bad), ValidationError);
}

TEST_CASE("planted worlds satisfy their invariants") {
  SimConfig cfg = cfg_of(50, 3, 7, 1, 17);
  cfg.N_m = 20;
  for (uint64_t trial = 0; trial < 40; ++trial) {
    PlantedWorld world = make_world(cfg, trial);
    REQUIRE(world.steps.size() == 3);
    for (int64_t s = 0; s < cfg.k; ++s) {
      const PlantedStep& step = world.steps[static_cast<size_t>(s)];
      CHECK(step.tolerance.size() == 7);
      CHECK(std::is_sorted(step.tolerance.begin(), step.tolerance.end()));
      CHECK(std::adjacent_find(step.tolerance.begin(), step.tolerance.end()) ==
            step.tolerance.end());
      CHECK(step.target >= 0);
      CHECK(step.target < cfg.N);
      CHECK(std::binary_search(step.tolerance.begin(), step.tolerance.end(), step.target));
      CHECK(step.tolerance.front() >= 0);
      CHECK(step.tolerance.back() < cfg.N);

      std::vector<int64_t> sub = materialize_subspace(cfg, trial, s, step);
      CHECK(sub.size() == 20);
      CHECK(std::is_sorted(sub.begin(), sub.end()));
      CHECK(std::adjacent_find(sub.begin(), sub.end()) == sub.end());
      CHECK(sub.front() >= 0);
      CHECK(sub.back() < cfg.N);
      // The tolerance set is always inside the motivation subspace.
      CHECK(std::includes(sub.begin(), sub.end(), step.tolerance.begin(), step.tolerance.end()));
    }
  }

  // Same (seed, trial) reproduces the world; different trials move the chain.
  PlantedWorld a = make_world(cfg, 4);
  PlantedWorld b = make_world(cfg, 4);
  std::set<std::vector<int64_t>> distinct;
  for (uint64_t t = 0; t < 5; ++t) {
    std::vector<int64_t> targets;
    for (const PlantedStep& s : make_world(cfg, t).steps) targets.push_back(s.target);
    distinct.insert(targets);
  }
  for (size_t s = 0; s < a.steps.size(); ++s) {
    CHECK(a.steps[s].target == b.steps[s].target);
    CHECK(a.steps[s].tolerance == b.steps[s].tolerance);
  }
  CHECK(distinct.size() > 1);
}

TEST_CASE("uniform tree matches the level-size chain") {
  SearchTree t = make_uniform_tree(225, 15);
  CHECK(t.depth == 2);
  CHECK(t.nodes.size() == 16);
  CHECK(t.doc_count() == 225);
  CHECK(t.node(t.root_id).children.size() == 15);

  SearchTree small = make_uniform_tree(16, 15);
  CHECK(small.depth == 2);
  CHECK(small.nodes.size() == 3);
  // Children are contiguous ranges of the level below.
  CHECK(small.node(0).children.size() == 15);
  CHECK(small.node(1).children == std::vector<int64_t>{15});
  CHECK(small.node(small.root_id).children == std::vector<int64_t>{0, 1});

  CHECK_THROWS_AS(make_uniform_tree(0, 15), ValidationError);
  CHECK_THROWS_AS(make_uniform_tree(5, 1), ValidationError);
}

TEST_CASE("brute force matches its closed form") {
  SimConfig cfg = cfg_of(100, 2, 10, 20000, 3);
  SimResult res = sim_brute_force(cfg);
  REQUIRE(res.analytic_reference.has_value());
  CHECK(*res.analytic_reference == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(res.mean_calls == 2.0); // always exactly k calls
  for (const TrialRecord& t : res.trials) CHECK(t.calls == 2);
  // 4 sigma around p = 0.01 at n = 20000.
  CHECK(std::abs(res.success_rate - 0.01) < 0.003);

  SimConfig one = cfg_of(100, 1, 10, 20000, 6);
  SimResult r1 = sim_brute_force(one);
  CHECK(*r1.analytic_reference == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(std::abs(r1.success_rate - 0.1) < 0.009);
}

TEST_CASE("sequential scan matches its closed form") {
  SimConfig cfg = cfg_of(100, 3, 10, 20000, 4);
  SimResult res = sim_sequential_scan(cfg);
  REQUIRE(res.analytic_reference.has_value());
  CHECK(*res.analytic_reference == doctest::Approx(30.0));
  CHECK(res.success_rate == 1.0); // unlimited budget always finishes
  CHECK(std::abs(res.mean_calls - 30.0) / 30.0 < 0.05);
  for (const TrialRecord& t : res.trials) CHECK(t.calls >= 3);
}

TEST_CASE("sequential scan respects the budget and charges failures") {
  SimConfig cfg = cfg_of(1000, 1, 1, 500, 8);
  cfg.budget = 5;
  SimResult res = sim_sequential_scan(cfg);
  int64_t failures = 0;
  for (const TrialRecord& t : res.trials) {
    CHECK(t.calls <= 5);
    if (!t.success) {
      CHECK(t.calls == 5); // a failed trial burned its whole budget
      ++failures;
    }
  }
  CHECK(failures > 400); // p(hit in 5 draws) ~ 0.005
  CHECK(res.success_rate < 0.05);
}

TEST_CASE("hierarchical search with a perfect router costs depth per step") {
  SimConfig cfg = cfg_of(225, 2, 1, 50, 9);
  SimResult res = sim_hierarchical(cfg);
  REQUIRE(res.analytic_reference.has_value());
  CHECK(*res.analytic_reference == 4.0);
  CHECK(res.mean_calls == 4.0);
  CHECK(res.success_rate == 1.0);
  for (const TrialRecord& t : res.trials) CHECK(t.calls == 4);

  SimConfig big = cfg_of(3375, 1, 1, 20, 9);
  SimResult rb = sim_hierarchical(big);
  CHECK(rb.mean_calls == 3.0);
  CHECK(*rb.analytic_reference == 3.0);

  // 300 -> 20 -> 2 -> 1: a ragged top still counts full depth.
  SimConfig ragged = cfg_of(300, 1, 1, 20, 9);
  SimResult rr = sim_hierarchical(ragged);
  CHECK(rr.mean_calls == 3.0);

  SimConfig noisy = cfg_of(225, 1, 1, 10, 9);
  noisy.alpha = 0.5;
  CHECK_FALSE(sim_hierarchical(noisy).analytic_reference.has_value());
}

TEST_CASE("mean calls decrease as the router gets more accurate") {
  std::vector<double> means;
  for (double alpha : {0.3, 0.6, 1.0}) {
    SimConfig cfg = cfg_of(225, 1, 1, 2000, 5);
    cfg.alpha = alpha;
    means.push_back(sim_hierarchical(cfg).mean_calls);
  }
  CHECK(means[0] > means[1]);
  CHECK(means[1] > means[2]);
  CHECK(means[2] == 2.0);
}

TEST_CASE("motivation with a full-width subspace costs exactly k extra calls") {
  SimConfig cfg = cfg_of(225, 3, 1, 300, 12);
  cfg.alpha = 0.7;
  SimResult hier = sim_hierarchical(cfg);
  SimResult moti = sim_motivation(cfg);
  REQUIRE(hier.trials.size() == moti.trials.size());
  for (size_t i = 0; i < hier.trials.size(); ++i) {
    if (hier.trials[i].success) {
      CHECK(moti.trials[i].success);
      CHECK(moti.trials[i].calls == hier.trials[i].calls + 3);
    }
  }
}

TEST_CASE("motivation searches the smaller subspace tree") {
  SimConfig cfg = cfg_of(3375, 2, 15, 40, 2);
  cfg.N_m = 225;
  SimResult res = sim_motivation(cfg);
  REQUIRE(res.analytic_reference.has_value());
  CHECK(*res.analytic_reference == 6.0); // k * (1 + depth(225))
  CHECK(res.mean_calls == 6.0);
  CHECK(res.success_rate == 1.0);
}

TEST_CASE("policy dispatch") {
  SimConfig cfg = cfg_of(10, 1, 1, 3, 1);
  CHECK(run_policy("brute-force", cfg).policy == "brute-force");
  CHECK(run_policy("sequential-scan", cfg).policy == "sequential-scan");
  CHECK(run_policy("hierarchical", cfg).policy == "hierarchical");
  CHECK(run_policy("motivation", cfg).policy == "motivation");
  CHECK_THROWS_AS(run_policy("dowsing", cfg), ValidationError);
}

TEST_CASE("result CSV carries the config and the closed form") {
  SimConfig cfg = cfg_of(10, 1, 1, 4, 1);
  SimResult res = sim_brute_force(cfg);
  CsvTable table = [&] {
    std::string path = testutil::tmp_path("sim.csv");
    testutil::write_file(path, sim_results_to_csv({res}));
    return read_csv(path);
  }();
  CHECK(csv_join(table.header) ==
        "policy,N,k,M,N_m,c,alpha,trials,mean_calls,success_rate,analytic_reference");
  REQUIRE(table.rows.size() == 1);
  const auto& row = table.rows[0];
  CHECK(row[0] == "brute-force");
  CHECK(row[1] == "10");
  CHECK(row[4] == "10"); // N_m defaults to N
  CHECK(row[5] == "15");
  CHECK(row[7] == "4");
  CHECK(row[8] == "1"); // brute force always spends k = 1 call
  CHECK(row[10] == "0.1");
}

TEST_CASE("cumulative curve is monotone and ends at the aggregate") {
  SimConfig cfg = cfg_of(20, 1, 5, 50, 7);
  SimResult res = sim_sequential_scan(cfg);
  std::vector<CurvePoint> curve = cumulative_curve(res);
  REQUIRE(curve.size() == 50);
  for (size_t i = 1; i < curve.size(); ++i) {
    CHECK(curve[i].cum_calls >= curve[i - 1].cum_calls);
    CHECK(curve[i].cum_successes >= curve[i - 1].cum_successes);
    CHECK(curve[i].trial == static_cast<int64_t>(i) + 1);
  }
  CHECK(curve.back().success_fraction == res.success_rate);
  CHECK(static_cast<double>(curve.back().cum_calls) == res.mean_calls * 50.0);

  std::string csv = curve_to_csv(res);
  CHECK(csv.rfind("policy,N,k,M,N_m,c,alpha,trial,cum_calls,cum_successes,success_fraction\n",
                  0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 51);
}

TEST_CASE("success-by-k table") {
  SimConfig cfg = cfg_of(10, 2, 1, 8, 1);
  std::string csv = success_by_k_csv({sim_brute_force(cfg)});
  CHECK(csv.rfind("policy,k,success_rate,mean_calls\n", 0) == 0);
  CHECK(csv.find("brute-force,2,") != std::string::npos);
}

TEST_CASE("sweep files cross their axes in declaration order") {
  std::string path = testutil::tmp_path("sweep.json");
  testutil::write_file(path, R"({
    "axes": {"policy": ["brute-force", "sequential-scan"], "N": [100], "k": [1, 2]},
    "trials": 7, "seed": 3
  })");
  SweepSpec spec = load_sweep(path);
  CHECK(spec.policies == std::vector<std::string>{"brute-force", "sequential-scan"});
  CHECK(spec.Ns == std::vector<int64_t>{100});
  CHECK(spec.ks == std::vector<int64_t>{1, 2});
  CHECK(spec.Ms == std::vector<int64_t>{1});
  CHECK(spec.trials == 7);
  CHECK(spec.seed == 3);

  std::vector<SimResult> results = run_sweep(spec);
  REQUIRE(results.size() == 4);
  CHECK(results[0].policy == "brute-force");
  CHECK(results[0].cfg.k == 1);
  CHECK(results[1].policy == "brute-force");
  CHECK(results[1].cfg.k == 2);
  CHECK(results[2].policy == "sequential-scan");
  CHECK(results[2].cfg.trials == 7);
  CHECK(results[2].cfg.seed == 3);

  SUBCASE("a sweep needs a policy axis") {
    testutil::write_file(path, R"({"axes": {"N": [10]}})");
    CHECK_THROWS_AS(load_sweep(path), ValidationError);
  }
  SUBCASE("a sweep needs an axes object") {
    testutil::write_file(path, R"({"trials": 3})");
    CHECK_THROWS_AS(load_sweep(path), ValidationError);
  }
  SUBCASE("malformed JSON names the byte offset") {
    testutil::write_file(path, "{\"axes\": ");
    CHECK_THROWS_AS(load_sweep(path), ParseError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_sweep(testutil::tmp_path("no-such-sweep.json")), IoError);
  }
}

TEST_CASE("trial records do not depend on the worker count") {
  SimConfig cfg = cfg_of(225, 2, 1, 200, 31);
  cfg.alpha = 0.5;
  SimResult one = sim_hierarchical(cfg, 1);
  SimResult three = sim_hierarchical(cfg, 3);
  REQUIRE(one.trials.size() == three.trials.size());
  for (size_t i = 0; i < one.trials.size(); ++i) {
    CHECK(one.trials[i].calls == three.trials[i].calls);
    CHECK(one.trials[i].success == three.trials[i].success);
  }
  CHECK(one.mean_calls == three.mean_calls);

  SimResult scan1 = sim_sequential_scan(cfg_of(50, 2, 5, 100, 3), 1);
  SimResult scan4 = sim_sequential_scan(cfg_of(50, 2, 5, 100, 3), 4);
  for (size_t i = 0; i < scan1.trials.size(); ++i)
    CHECK(scan1.trials[i].calls == scan4.trials[i].calls);
}
