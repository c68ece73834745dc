// Acceptance gate: one criterion per line, [PASS]/[FAIL], nonzero exit when
// anything fails. Every tolerance is pinned here as a named constant; the
// statistical ones state their sigma budget next to the number.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "semtree/corpus.hpp"
#include "semtree/hier_index.hpp"
#include "semtree/pools.hpp"
#include "semtree/router.hpp"
#include "semtree/rng.hpp"
#include "semtree/scoring.hpp"
#include "semtree/search.hpp"
#include "semtree/simkit.hpp"
#include "semtree/stats.hpp"
#include "testutil.hpp"

using namespace semtree;

namespace {

// --- pinned tolerances and sizes -------------------------------------------

constexpr double kGeoMeanTol = 1e-12;        // exactness for constant paths
constexpr int kRetrievalTargets = 500;       // perfect-router sample size
constexpr int64_t kGuessPools = 100000;      // uniform-guess pool count
constexpr double kGuessTolAbs = 0.005;       // ~6.3 sigma at 1e5 pools
constexpr double kScanRelTol = 0.03;         // ~9 sigma at 1e4 trials
constexpr int64_t kBruteTrials = 1000000;    // per chain length
constexpr uint64_t kBruteSeed = 7;           // pinned Monte-Carlo seed
constexpr double kBruteSigmas = 3.0;         // band half-width for k = 1, 2
constexpr int64_t kLadderScanTrials = 20000; // ~13 sigma headroom at 3%
constexpr int kInvariantCorpora = 1000;      // random tree-contract sample
constexpr int64_t kCompositionPools = 10000; // pool-composition sample
constexpr double kChiSquareMinP = 0.001;     // positive-position uniformity

// Wall-clock budgets, seconds; 0 means unbounded.
constexpr double kLimitTournament = 5.0;
constexpr double kLimitRetrieval = 10.0;
constexpr double kLimitGuess = 30.0;
constexpr double kLimitScan = 60.0;
constexpr double kLimitBrute = 300.0;

// ----------------------------------------------------------------------------

double now_s() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::string strf(const char* fmt, ...) {
  char buf[1024];
  va_list args;
  va_start(args, fmt);
  std::vsnprintf(buf, sizeof(buf), fmt, args);
  va_end(args);
  return std::string(buf);
}

struct Failure : std::runtime_error {
  explicit Failure(const std::string& what) : std::runtime_error(what) {}
};

void expect(bool cond, const std::string& what) {
  if (!cond) throw Failure(what);
}

// Shared 3035-doc retrieval fixture; built once, timed inside the first
// criterion that touches it.
struct RetrievalFixture {
  Corpus corpus;
  SearchTree tree;
};

const RetrievalFixture& retrieval_fixture() {
  static RetrievalFixture fx = [] {
    RetrievalFixture f;
    f.corpus = testutil::synth_corpus(3035, 16, 1);
    f.tree = build_tree(f.corpus, 15, 1, BuildOptions{});
    return f;
  }();
  return fx;
}

// --- criterion 1: tournament bracket cost identity ---------------------------

std::string run_tournament_cost() {
  const RetrievalFixture& fx = retrieval_fixture();
  std::vector<int64_t> chain = level_size_chain(3035, 15);
  expect(chain == std::vector<int64_t>{3035, 203, 14, 1},
         "level-size chain is not 3035/203/14/1");
  expect(fx.tree.nodes.size() == 218,
         strf("tree has %zu nodes, expected 218", fx.tree.nodes.size()));
  expect(fx.tree.depth == 3, strf("tree depth %d, expected 3", fx.tree.depth));

  RouterConfig rc; // similarity router, default temperature
  auto router = make_router(rc);
  const int64_t budget = default_budget(fx.tree);
  for (int64_t pos : {int64_t{0}, int64_t{1517}, int64_t{3034}}) {
    EvalRow row = eval_single(fx.tree, fx.corpus, *router, fx.corpus.at(pos).id, budget,
                              SearchMethod::tournament, static_cast<uint64_t>(pos));
    expect(row.ir_calls_to_target.has_value() && *row.ir_calls_to_target == 218,
           strf("tournament on doc %lld cost %lld calls, expected 218",
                static_cast<long long>(pos),
                row.ir_calls_to_target ? static_cast<long long>(*row.ir_calls_to_target) : -1));
  }
  QueryContext query;
  query.background = fx.corpus.at(0).title;
  query.query_embedding = fx.corpus.at(0).embedding;
  SearchResult sr = tournament_search(fx.tree, *router, query, std::nullopt, 0, &fx.corpus);
  expect(sr.ir_calls == static_cast<int64_t>(fx.tree.nodes.size()),
         "tournament call count differs from the node count");
  return "218 calls on every target, equal to the 218-node bracket";
}

// --- criterion 2: perfect-router retrieval at depth cost ---------------------

std::string run_depth_retrieval() {
  const RetrievalFixture& fx = retrieval_fixture();
  RouterConfig rc;
  rc.kind = RouterKind::planted_oracle;
  rc.alpha = 1.0;
  rc.seed = 2;
  auto router = make_router(rc);
  const int64_t budget = default_budget(fx.tree);

  std::mt19937_64 rng(derive_seed(2, 0));
  for (int i = 0; i < kRetrievalTargets; ++i) {
    int64_t pos = static_cast<int64_t>(uniform_index(rng, 3035));
    EvalRow row = eval_single(fx.tree, fx.corpus, *router, fx.corpus.at(pos).id, budget,
                              SearchMethod::best_first, static_cast<uint64_t>(i));
    expect(row.ir_calls_to_target.has_value() && *row.ir_calls_to_target == 3,
           strf("target %lld found in %lld calls, expected the tree depth 3",
                static_cast<long long>(pos),
                row.ir_calls_to_target ? static_cast<long long>(*row.ir_calls_to_target) : -1));
    expect(row.proposed_rank.has_value() && *row.proposed_rank == 1,
           strf("target %lld ranked %lld, expected 1", static_cast<long long>(pos),
                row.proposed_rank ? static_cast<long long>(*row.proposed_rank) : -1));
  }
  return strf("%d/%d targets at 3 calls, rank 1", kRetrievalTargets, kRetrievalTargets);
}

// --- criterion 3: uniform guessing over candidate pools ----------------------

std::string run_uniform_guess() {
  Corpus corpus = testutil::synth_corpus(400, 8, 0xACC3);
  PoolBuilder builder(corpus, PoolConfig{});
  const std::string positive = corpus.at(0).id;
  int64_t hits = 0;
  for (int64_t i = 0; i < kGuessPools; ++i) {
    CandidatePool pool = builder.build("s", positive, YearMonth{2030, 1},
                                       "uniform guessing benchmark", derive_seed(0x9001, i));
    std::mt19937_64 guesser(derive_seed(999, static_cast<uint64_t>(i)));
    if (static_cast<int>(uniform_index(guesser, 15)) == pool.positive_index) ++hits;
  }
  double acc = static_cast<double>(hits) / static_cast<double>(kGuessPools);
  double expected = 1.0 / 15.0;
  expect(std::abs(acc - expected) <= kGuessTolAbs,
         strf("guess accuracy %.4f is outside 1/15 +- %.3f", acc, kGuessTolAbs));
  return strf("accuracy %.4f over %lld pools (1/15 +- %.3f)", acc,
              static_cast<long long>(kGuessPools), kGuessTolAbs);
}

// --- criterion 4: geometric-mean path score normalization --------------------

std::string run_geo_mean() {
  for (double p : {0.999, 0.9, 0.5, 0.1, 1e-3}) {
    double lp = std::log(p);
    for (int d = 1; d <= 10; ++d) {
      double got = geo_mean_score(lp * d, d);
      expect(std::abs(got - p) <= kGeoMeanTol,
             strf("constant path p=%g depth %d scored %.17g", p, d, got));
    }
  }
  std::mt19937_64 rng(4);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> probs(8);
    for (double& x : probs) x = 0.05 + 0.95 * uniform_double(rng);
    auto accumulate = [](const std::vector<double>& ps) {
      double sum = 0.0;
      for (double p : ps) sum += std::log(p);
      return geo_mean_score(sum, static_cast<int64_t>(ps.size()));
    };
    double base = accumulate(probs);
    std::vector<double> shuffled = probs;
    deterministic_shuffle(shuffled, rng);
    std::vector<double> sorted = probs;
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> reversed = sorted;
    std::reverse(reversed.begin(), reversed.end());
    for (const auto& variant : {shuffled, sorted, reversed})
      expect(std::abs(accumulate(variant) - base) <= kGeoMeanTol,
             strf("path score changed by %.3g under reordering",
                  std::abs(accumulate(variant) - base)));
  }
  return "constant paths exact to 1e-12; score invariant under reordering";
}

// --- criterion 5: sequential-scan expected draws ------------------------------

std::string run_scan_law() {
  SimConfig cfg;
  cfg.N = 10000;
  cfg.M = 10;
  cfg.k = 1;
  cfg.trials = 10000;
  cfg.seed = 5;
  SimResult res = sim_sequential_scan(cfg);
  expect(res.analytic_reference.has_value() && *res.analytic_reference == 1000.0,
         "closed form is not N/M");
  double rel = std::abs(res.mean_calls - 1000.0) / 1000.0;
  expect(rel <= kScanRelTol,
         strf("mean %.2f deviates %.2f%% from 1000", res.mean_calls, 100.0 * rel));
  return strf("mean %.1f draws vs closed form 1000 (%.2f%% off)", res.mean_calls, 100.0 * rel);
}

// --- criterion 6: brute-force success collapse --------------------------------

std::string run_brute_collapse() {
  std::vector<double> rates;
  for (int64_t k = 1; k <= 3; ++k) {
    SimConfig cfg;
    cfg.N = 1000;
    cfg.M = 10;
    cfg.k = k;
    cfg.trials = kBruteTrials;
    cfg.seed = kBruteSeed;
    rates.push_back(sim_brute_force(cfg).success_rate);
  }
  const double n = static_cast<double>(kBruteTrials);
  double p1 = 0.01, p2 = 1e-4;
  double band1 = kBruteSigmas * std::sqrt(p1 * (1.0 - p1) / n);
  double band2 = kBruteSigmas * std::sqrt(p2 * (1.0 - p2) / n);
  expect(std::abs(rates[0] - p1) <= band1,
         strf("k=1 rate %.6f outside %.6f +- %.6f", rates[0], p1, band1));
  expect(std::abs(rates[1] - p2) <= band2,
         strf("k=2 rate %.6f outside %.6f +- %.6f", rates[1], p2, band2));
  long long successes3 = std::llround(rates[2] * n);
  expect(successes3 <= 1, strf("k=3 had %lld successes, expected 0 or 1", successes3));
  expect(rates[0] > rates[1] && rates[1] >= rates[2], "rates do not collapse with k");
  return strf("pass rates %.4g -> %.4g -> %.4g over 1e6 trials each", rates[0], rates[1],
              rates[2]);
}

// --- criterion 7: policy cost ladder ------------------------------------------

std::string run_cost_ladder() {
  std::string detail;
  for (int64_t k = 1; k <= 3; ++k) {
    SimConfig base;
    base.N = 3375;
    base.c = 15;
    base.M = 15;
    base.k = k;
    base.alpha = 1.0;
    base.seed = 7;

    SimConfig moti = base;
    moti.N_m = 225;
    moti.trials = 200;
    SimResult rm = sim_motivation(moti);

    SimConfig hier = base;
    hier.trials = 200;
    SimResult rh = sim_hierarchical(hier);

    SimConfig scan = base;
    scan.trials = kLadderScanTrials;
    scan.seed = 7 + static_cast<uint64_t>(k);
    SimResult rs = sim_sequential_scan(scan);

    double dk = static_cast<double>(k);
    expect(rm.mean_calls == 3.0 * dk,
           strf("k=%lld motivation mean %.4f != %g", static_cast<long long>(k), rm.mean_calls,
                3.0 * dk));
    expect(rh.mean_calls == 3.0 * dk,
           strf("k=%lld hierarchical mean %.4f != %g", static_cast<long long>(k), rh.mean_calls,
                3.0 * dk));
    double scan_ref = 225.0 * dk;
    double rel = std::abs(rs.mean_calls - scan_ref) / scan_ref;
    expect(rel <= kScanRelTol, strf("k=%lld scan mean %.2f deviates %.2f%% from %g",
                                    static_cast<long long>(k), rs.mean_calls, 100.0 * rel,
                                    scan_ref));
    double brute_cost = std::pow(225.0, static_cast<double>(k)); // expected attempts
    expect(rm.mean_calls <= rh.mean_calls && rh.mean_calls <= rs.mean_calls,
           strf("k=%lld ladder ordering violated", static_cast<long long>(k)));
    expect(brute_cost >= scan_ref, "brute-force expected cost fails to dominate");
    if (!detail.empty()) detail += "; ";
    detail += strf("k=%lld: %g <= %g <= %.0f measured, brute %.3g analytic",
                   static_cast<long long>(k), rm.mean_calls, rh.mean_calls, rs.mean_calls,
                   brute_cost);
  }
  return detail;
}

// --- criterion 8: tree structural invariants and determinism ------------------

void verify_tree_contract(const SearchTree& tree, int64_t n_docs, int64_t c) {
  std::vector<int64_t> chain = level_size_chain(n_docs, c);
  expect(tree.depth == static_cast<int>(chain.size()) - 1, "depth differs from the level chain");
  expect(tree.doc_count() == n_docs, "doc count mismatch");

  std::vector<int64_t> per_level(chain.size(), 0);
  std::vector<int64_t> refs(tree.nodes.size(), 0);
  std::vector<char> seen(static_cast<size_t>(n_docs), 0);
  for (const TreeNode& node : tree.nodes) {
    expect(node.level >= 1 && node.level <= tree.depth, "node level out of range");
    per_level[static_cast<size_t>(node.level)] += 1;
    expect(!node.children.empty() &&
               node.children.size() <= static_cast<size_t>(c),
           strf("node %lld has %zu children, capacity %lld",
                static_cast<long long>(node.node_id), node.children.size(),
                static_cast<long long>(c)));
    for (size_t i = 1; i < node.children.size(); ++i)
      expect(node.children[i - 1] < node.children[i], "children not strictly ascending");
    if (node.level == 1) {
      for (int64_t ch : node.children) {
        expect(ch >= 0 && ch < n_docs, "doc child out of range");
        expect(!seen[static_cast<size_t>(ch)], "doc assigned twice");
        seen[static_cast<size_t>(ch)] = 1;
      }
    } else {
      for (int64_t ch : node.children) {
        expect(ch >= 0 && ch < static_cast<int64_t>(tree.nodes.size()), "node child out of range");
        expect(tree.node(ch).level == node.level - 1, "child level is not one below");
        refs[static_cast<size_t>(ch)] += 1;
      }
    }
  }
  for (int level = 1; level <= tree.depth; ++level)
    expect(per_level[static_cast<size_t>(level)] == chain[static_cast<size_t>(level)],
           strf("level %d has %lld nodes, chain says %lld", level,
                static_cast<long long>(per_level[static_cast<size_t>(level)]),
                static_cast<long long>(chain[static_cast<size_t>(level)])));
  for (int64_t d = 0; d < n_docs; ++d)
    expect(seen[static_cast<size_t>(d)] != 0, "partition misses a doc");
  for (const TreeNode& node : tree.nodes) {
    int64_t expected_refs = node.node_id == tree.root_id ? 0 : 1;
    expect(refs[static_cast<size_t>(node.node_id)] == expected_refs,
           "node parent count is not exactly one (zero for the root)");
  }
}

bool trees_identical(const SearchTree& a, const SearchTree& b) {
  if (a.root_id != b.root_id || a.depth != b.depth || a.branching != b.branching ||
      a.corpus_fp != b.corpus_fp || a.nodes.size() != b.nodes.size())
    return false;
  for (size_t i = 0; i < a.nodes.size(); ++i) {
    const TreeNode& na = a.nodes[i];
    const TreeNode& nb = b.nodes[i];
    if (na.node_id != nb.node_id || na.level != nb.level || na.children != nb.children)
      return false;
    if (na.centroid.size() != nb.centroid.size()) return false;
    if (!na.centroid.empty() &&
        std::memcmp(na.centroid.data(), nb.centroid.data(),
                    na.centroid.size() * sizeof(double)) != 0)
      return false;
  }
  return true;
}

std::string run_tree_invariants() {
  std::mt19937_64 rng(8);
  std::string path_a = testutil::tmp_path("acc_tree_a.json");
  std::string path_b = testutil::tmp_path("acc_tree_b.json");
  for (int i = 0; i < kInvariantCorpora; ++i) {
    int64_t n, c;
    switch (i) { // pinned corner cases first
      case 0: n = 1, c = 2; break;
      case 1: n = 1, c = 20; break;
      case 2: n = 5000, c = 2; break;
      case 3: n = 5000, c = 20; break;
      default:
        n = 1 + static_cast<int64_t>(uniform_index(rng, 5000));
        c = 2 + static_cast<int64_t>(uniform_index(rng, 19));
    }
    Corpus corpus = testutil::synth_corpus(n, 3, derive_seed(8, static_cast<uint64_t>(i)));
    BuildOptions opts;
    opts.max_iters = 3;
    uint64_t build_seed = derive_seed(9, static_cast<uint64_t>(i));
    SearchTree a = build_tree(corpus, c, build_seed, opts);
    SearchTree b = build_tree(corpus, c, build_seed, opts);

    try {
      verify_tree_contract(a, n, c);
    } catch (const Failure& f) {
      throw Failure(strf("corpus %d (n=%lld, c=%lld): %s", i, static_cast<long long>(n),
                         static_cast<long long>(c), f.what()));
    }
    expect(trees_identical(a, b),
           strf("corpus %d (n=%lld, c=%lld): double build differs", i,
                static_cast<long long>(n), static_cast<long long>(c)));
    if (i < 4 || i % 100 == 0) { // byte-level spot check of the serialized form
      save_tree(a, path_a);
      save_tree(b, path_b);
      expect(testutil::read_file(path_a) == testutil::read_file(path_b),
             strf("corpus %d: serialized trees differ", i));
    }
  }
  return strf("%d corpora clean (capacity, partition, parents, level sizes, determinism)",
              kInvariantCorpora);
}

// --- criterion 9: similarity tier boundaries ----------------------------------

std::string run_tier_boundaries() {
  expect(tier_of(0.90) == Tier::hard, "0.90 is not Hard");
  expect(tier_of(0.92) == Tier::medium, "0.92 is not Medium");
  expect(tier_of(0.94) == Tier::easy, "0.94 is not Easy");
  expect(tier_of(0.97) == Tier::none, "0.97 is not None");
  for (int i = 8500; i <= 10000; ++i) {
    double s = static_cast<double>(i) / 10000.0;
    Tier want = Tier::none;
    if (i >= 9400 && i < 9700) want = Tier::easy;
    else if (i >= 9200 && i < 9400) want = Tier::medium;
    else if (i >= 9000 && i < 9200) want = Tier::hard;
    expect(tier_of(s) == want, strf("similarity %.4f lands in tier %s", s,
                                    tier_name(tier_of(s)).c_str()));
  }
  return "boundary points and a 1e-4 sweep over [0.85, 1.0] all match";
}

// --- criterion 10: rubric anchors and pass gate --------------------------------

std::string run_rubric_anchors() {
  M3Score full = m3_from_recalls(1.0, 1.0, 1.0);
  expect(full.total() == 12, strf("perfect recalls total %d, expected 12", full.total()));
  expect(rft_pass(full), "a perfect sample fails the gate");
  M3Score mid = m3_from_recalls(0.75, 0.5, 0.25);
  expect(mid.motivation == 3 && mid.mechanism == 2 && mid.methodology == 1,
         "quarter anchors off");
  expect(mid.total() == 6, strf("anchor total %d, expected 6", mid.total()));
  expect(!rft_pass(mid), "total 6 passes the gate");
  expect(rft_pass(M3Score{4, 3, 1}), "total 8 rejected");
  expect(!rft_pass(M3Score{4, 2, 1}), "total 7 accepted");
  return "(1,1,1) -> 12, (0.75,0.5,0.25) -> 6; gate passes 8, rejects 7";
}

// --- criterion 11: pool composition and positive placement ---------------------

std::string run_pool_composition() {
  Corpus corpus = testutil::synth_corpus(400, 8, 0xACC3);
  PoolBuilder builder(corpus, PoolConfig{});
  const std::string positive = corpus.at(0).id;
  const YearMonth cutoff{2018, 6}; // bites: ~45% of the corpus is too recent
  std::vector<int64_t> counts(15, 0);
  for (int64_t i = 0; i < kCompositionPools; ++i) {
    CandidatePool pool = builder.build("s", positive, cutoff, "pool composition audit",
                                       derive_seed(0xB11, static_cast<uint64_t>(i)));
    expect(pool.candidates.size() == 15, "pool size is not 15");
    int n_pos = 0, n_hard = 0, n_easy = 0;
    for (const PoolCandidate& cand : pool.candidates) {
      if (cand.tag == CandidateTag::positive) ++n_pos;
      else if (is_hard_tag(cand.tag)) ++n_hard;
      else if (cand.tag == CandidateTag::easy_random) ++n_easy;
      if (cand.tag != CandidateTag::positive)
        expect(corpus.at(cand.doc_pos).date <= cutoff,
               strf("pool %lld holds a candidate dated after the cutoff",
                    static_cast<long long>(i)));
    }
    expect(n_pos == 1, strf("pool %lld has %d positives", static_cast<long long>(i), n_pos));
    expect(n_hard == 5 && n_easy == 9,
           strf("pool %lld split %d hard / %d easy, expected 5/9", static_cast<long long>(i),
                n_hard, n_easy));
    counts[static_cast<size_t>(pool.positive_index)] += 1;
  }
  double stat = chi_square_uniform_stat(counts);
  double p = chi_square_sf(stat, 14);
  expect(p > kChiSquareMinP,
         strf("positive positions are non-uniform: chi2 %.2f, p %.5f", stat, p));
  return strf("%lld pools: 1 positive, 5/9 split, dated; position chi2 p = %.3f",
              static_cast<long long>(kCompositionPools), p);
}

struct Criterion {
  const char* name;
  std::function<std::string()> body;
  double limit_s; // 0: unbounded
};

} // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"tournament bracket cost identity", run_tournament_cost, kLimitTournament},
      {"perfect-router retrieval at depth cost", run_depth_retrieval, kLimitRetrieval},
      {"uniform guessing over candidate pools", run_uniform_guess, kLimitGuess},
      {"geometric-mean path score normalization", run_geo_mean, 0.0},
      {"sequential-scan expected draws", run_scan_law, kLimitScan},
      {"brute-force success collapse", run_brute_collapse, kLimitBrute},
      {"policy cost ladder", run_cost_ladder, 0.0},
      {"tree structural invariants and determinism", run_tree_invariants, 0.0},
      {"similarity tier boundaries", run_tier_boundaries, 0.0},
      {"rubric anchors and pass gate", run_rubric_anchors, 0.0},
      {"pool composition and positive placement", run_pool_composition, 0.0},
  };

  int failures = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    double t0 = now_s();
    bool pass = true;
    std::string detail;
    try {
      detail = criteria[i].body();
    } catch (const std::exception& e) {
      pass = false;
      detail = e.what();
    }
    double dt = now_s() - t0;
    if (pass && criteria[i].limit_s > 0.0 && dt > criteria[i].limit_s) {
      pass = false;
      detail = strf("correct but took %.1fs, budget %.0fs", dt, criteria[i].limit_s);
    }
    std::printf("[%s] %2zu %s: %s (%.1fs)\n", pass ? "PASS" : "FAIL", i + 1, criteria[i].name,
                detail.c_str(), dt);
    std::fflush(stdout);
    if (!pass) ++failures;
  }
  std::printf("%zu criteria, %zu passed, %d failed\n", criteria.size(),
              criteria.size() - static_cast<size_t>(failures), failures);
  return failures == 0 ? 0 : 1;
}
