#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "semtree/corpus.hpp"
#include "semtree/csv.hpp"
#include "semtree/errors.hpp"
#include "semtree/hier_index.hpp"
#include "semtree/manifest.hpp"
#include "semtree/pools.hpp"
#include "semtree/rng.hpp"
#include "semtree/router.hpp"
#include "semtree/scoring.hpp"
#include "semtree/search.hpp"
#include "semtree/simkit.hpp"

namespace {

using namespace semtree;
using nlohmann::json;

class Stopwatch {
public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  int64_t elapsed_ms() const {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now() - start_)
        .count();
  }

private:
  std::chrono::steady_clock::time_point start_;
};

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cli: cannot write " + path);
  out << content;
  if (!out) throw IoError("cli: write failed for " + path);
}

std::vector<std::string> read_id_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cli: cannot open targets file " + path);
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t'))
      line.pop_back();
    if (!line.empty()) ids.push_back(line);
  }
  return ids;
}

std::string fmt_stat(double v) {
  if (std::isnan(v)) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return std::string(buf);
}

struct RouterOpts {
  std::string kind = "similarity";
  double temperature = 0.05;
  double alpha = 1.0;
  std::string endpoint;
  int timeout_ms = 10000;
  bool renormalize = false;
};

void add_router_options(CLI::App* cmd, RouterOpts& opts) {
  cmd->add_option("--router", opts.kind, "router kind: similarity, planted, external")
      ->envname("SEMTREE_ROUTER");
  cmd->add_option("--temperature", opts.temperature, "softmax temperature (similarity router)")
      ->envname("SEMTREE_TEMPERATURE");
  cmd->add_option("--alpha", opts.alpha, "accuracy knob in [0,1] (planted router)")
      ->envname("SEMTREE_ALPHA");
  cmd->add_option("--endpoint", opts.endpoint,
                  "external scorer: http://... URL or a shell command")
      ->envname("SEMTREE_ENDPOINT");
  cmd->add_option("--timeout-ms", opts.timeout_ms, "external scorer timeout")
      ->envname("SEMTREE_TIMEOUT_MS");
  cmd->add_flag("--renormalize", opts.renormalize,
                "diagnostic: rescale off-sum external replies instead of rejecting them");
}

RouterConfig to_router_config(const RouterOpts& opts, uint64_t seed) {
  RouterConfig rc;
  rc.kind = parse_router_kind(opts.kind);
  rc.temperature = opts.temperature;
  rc.alpha = opts.alpha;
  rc.endpoint = opts.endpoint;
  rc.seed = seed;
  rc.timeout_ms = opts.timeout_ms;
  rc.renormalize = opts.renormalize;
  return rc;
}

json router_config_json(const RouterOpts& opts) {
  json j;
  j["router"] = opts.kind;
  j["temperature"] = opts.temperature;
  j["alpha"] = opts.alpha;
  j["endpoint"] = opts.endpoint;
  j["timeout_ms"] = opts.timeout_ms;
  j["renormalize"] = opts.renormalize;
  return j;
}

void run_eval(const std::string& command, SearchMethod method, const std::string& corpus_path,
              const std::string& tree_path, const std::string& targets_path,
              const RouterOpts& ropts, int64_t budget, uint64_t seed, int workers,
              const std::string& out_path) {
  Stopwatch watch;
  Corpus corpus = load_corpus(corpus_path);
  SearchTree tree = load_tree(tree_path, &corpus);
  std::vector<std::string> targets = read_id_lines(targets_path);
  auto router = make_router(to_router_config(ropts, seed));
  int64_t effective_budget = budget > 0 ? budget : default_budget(tree);

  RunManifest manifest;
  manifest.command = command;
  manifest.seed = seed;
  manifest.workers = workers;
  manifest.config = router_config_json(ropts);
  manifest.config["method"] = method == SearchMethod::best_first ? "best-first" : "tournament";
  manifest.config["budget"] = effective_budget;
  manifest.inputs = {corpus_path, tree_path, targets_path};
  manifest.outputs = {out_path};

  // Rows are flushed as they complete so a mid-run router failure still
  // leaves the finished targets on disk, capped by a marker row naming the
  // target that failed.
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw IoError("cli: cannot write " + out_path);
  out << kEvalCsvHeader << std::flush;
  std::vector<EvalRow> rows;
  rows.reserve(targets.size());
  for (size_t i = 0; i < targets.size(); ++i) {
    EvalRow row;
    try {
      row = eval_single(tree, corpus, *router, targets[i], effective_budget, method, i);
    } catch (const RouterError&) {
      out << "__router_failure__:" << csv_escape(targets[i]) << ",,,\n" << std::flush;
      manifest.config["failed_target"] = targets[i];
      manifest.duration_ms = watch.elapsed_ms();
      write_manifest(manifest, out_path);
      throw;
    }
    out << eval_row_to_csv(row) << std::flush;
    rows.push_back(std::move(row));
  }
  out.close();

  EvalTable table = aggregate_eval(std::move(rows));
  manifest.duration_ms = watch.elapsed_ms();
  write_manifest(manifest, out_path);

  std::printf("%zu targets, mean ir_calls %s, median %s, mean rank %s, median %s\n",
              table.rows.size(), fmt_stat(table.mean_calls).c_str(),
              fmt_stat(table.median_calls).c_str(), fmt_stat(table.mean_rank).c_str(),
              fmt_stat(table.median_rank).c_str());
}

struct SampleSpec {
  std::string sample_id;
  std::string positive_id;
  YearMonth date;
  std::string background;
  std::string donor_sample_id; // empty: next sample donates
  std::vector<std::string> exclude;
};

std::vector<SampleSpec> load_samples(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cli: cannot open samples file " + path);
  std::vector<SampleSpec> samples;
  std::string line;
  int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw ParseError("cli: samples line " + std::to_string(line_no) + ": malformed record");
    if (!j.is_object() || !j.contains("sample_id") || !j.contains("positive_id") ||
        !j.contains("date") || !j.contains("background"))
      throw ParseError("cli: samples line " + std::to_string(line_no) +
                       ": record needs sample_id, positive_id, date, background");
    SampleSpec s;
    s.sample_id = j["sample_id"].get<std::string>();
    s.positive_id = j["positive_id"].get<std::string>();
    s.date = parse_year_month(j["date"].get<std::string>());
    s.background = j["background"].get<std::string>();
    if (j.contains("donor_sample_id")) s.donor_sample_id = j["donor_sample_id"].get<std::string>();
    if (j.contains("exclude")) s.exclude = j["exclude"].get<std::vector<std::string>>();
    samples.push_back(std::move(s));
  }
  return samples;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"hierarchical semantic retrieval index, search baselines, candidate pools and "
               "search-cost simulation"};
  app.require_subcommand(1);
  app.set_config("--config", "", "read option defaults from an INI/TOML file");

  uint64_t seed = 0;
  int workers = 1;
  app.add_option("--seed", seed, "master random seed")->envname("SEMTREE_SEED");
  app.add_option("--workers", workers, "max worker threads")->envname("SEMTREE_WORKERS");

  // build-index
  auto* cmd_build = app.add_subcommand("build-index", "cluster a corpus into a balanced tree");
  std::string bi_corpus, bi_out;
  int64_t bi_branching = 15;
  int bi_max_iters = 50;
  cmd_build->add_option("--corpus", bi_corpus, "corpus JSONL")->required();
  cmd_build->add_option("--branching,-c", bi_branching, "max children per node");
  cmd_build->add_option("--max-iters", bi_max_iters, "k-means iteration cap");
  cmd_build->add_option("--out", bi_out, "tree output path")->required()->envname("SEMTREE_OUT");
  cmd_build->callback([&] {
    Stopwatch watch;
    Corpus corpus = load_corpus(bi_corpus);
    BuildOptions opts;
    opts.max_iters = bi_max_iters;
    opts.workers = workers;
    SearchTree tree = build_tree(corpus, bi_branching, seed, opts);
    save_tree(tree, bi_out);

    std::string chain;
    for (int64_t n : level_size_chain(corpus.size(), bi_branching)) {
      if (!chain.empty()) chain += " → ";
      chain += std::to_string(n);
    }
    std::printf("%s\n", chain.c_str());
    std::printf("depth %d, %zu nodes, wrote %s\n", tree.depth, tree.nodes.size(), bi_out.c_str());

    RunManifest manifest;
    manifest.command = "build-index";
    manifest.seed = seed;
    manifest.workers = workers;
    manifest.config = {{"branching", bi_branching}, {"max_iters", bi_max_iters}};
    manifest.inputs = {bi_corpus};
    manifest.outputs = {bi_out};
    manifest.duration_ms = watch.elapsed_ms();
    write_manifest(manifest, bi_out);
  });

  // search / tournament / eval share the same options
  struct EvalOpts {
    std::string corpus, tree, targets, out, method = "best-first";
    RouterOpts router;
    int64_t budget = 0;
  };
  auto add_eval_command = [&](const char* name, const char* desc, bool with_method,
                              bool with_budget) {
    auto* cmd = app.add_subcommand(name, desc);
    auto opts = std::make_shared<EvalOpts>();
    cmd->add_option("--corpus", opts->corpus, "corpus JSONL")->required();
    cmd->add_option("--tree", opts->tree, "tree file from build-index")->required();
    cmd->add_option("--targets", opts->targets, "file with one target doc id per line")
        ->required();
    cmd->add_option("--out", opts->out, "metrics CSV output")->required()->envname("SEMTREE_OUT");
    add_router_options(cmd, opts->router);
    if (with_budget)
      cmd->add_option("--budget", opts->budget, "max router calls per search (0: 4*depth*c)")
          ->envname("SEMTREE_BUDGET");
    if (with_method)
      cmd->add_option("--method", opts->method, "best-first or tournament")
          ->check(CLI::IsMember({"best-first", "tournament"}));
    std::string cmd_name = name;
    cmd->callback([&, opts, cmd_name, with_method] {
      SearchMethod method;
      if (with_method)
        method = opts->method == "tournament" ? SearchMethod::tournament
                                              : SearchMethod::best_first;
      else
        method = cmd_name == "tournament" ? SearchMethod::tournament : SearchMethod::best_first;
      run_eval(cmd_name, method, opts->corpus, opts->tree, opts->targets, opts->router,
               opts->budget, seed, workers, opts->out);
    });
    return cmd;
  };
  add_eval_command("search", "best-first retrieval over a built tree", false, true);
  add_eval_command("tournament", "exhaustive bottom-up baseline", false, false);
  add_eval_command("eval", "per-target retrieval metrics", true, true);

  // make-pools
  auto* cmd_pools = app.add_subcommand("make-pools", "build IR candidate pools from samples");
  std::string mp_corpus, mp_samples, mp_out, mp_key_out, mp_ablation = "standard";
  PoolConfig mp_cfg;
  cmd_pools->add_option("--corpus", mp_corpus, "corpus JSONL")->required();
  cmd_pools->add_option("--samples", mp_samples, "samples JSONL")->required();
  cmd_pools->add_option("--ablation", mp_ablation,
                        "standard, all_random, all_hard or decoy_cluster");
  cmd_pools->add_option("--pool-size", mp_cfg.pool_size, "candidates per pool");
  cmd_pools->add_option("--n-hard", mp_cfg.n_hard, "hard negatives per standard pool");
  cmd_pools->add_option("--n-easy", mp_cfg.n_easy, "easy negatives per standard pool");
  cmd_pools->add_option("--keyword-min", mp_cfg.keyword_min, "shared tokens for a keyword match");
  cmd_pools->add_option("--embed-top", mp_cfg.embed_top, "embedding-neighbor harvest depth");
  cmd_pools->add_option("--out", mp_out, "blind pools JSONL output")
      ->required()
      ->envname("SEMTREE_OUT");
  cmd_pools->add_option("--key-out", mp_key_out, "answer key output (default <out>.key.jsonl)");
  cmd_pools->callback([&] {
    Stopwatch watch;
    Corpus corpus = load_corpus(mp_corpus);
    std::vector<SampleSpec> samples = load_samples(mp_samples);
    PoolKind kind = parse_pool_kind(mp_ablation);
    std::string key_path = mp_key_out.empty() ? mp_out + ".key.jsonl" : mp_key_out;
    PoolBuilder builder(corpus, mp_cfg);
    std::vector<CandidatePool> pools;
    pools.reserve(samples.size());
    for (size_t i = 0; i < samples.size(); ++i) {
      const SampleSpec& s = samples[i];
      DonorSample donor;
      const DonorSample* donor_ptr = nullptr;
      if (kind == PoolKind::decoy_cluster) {
        const SampleSpec* d = nullptr;
        if (!s.donor_sample_id.empty()) {
          for (const SampleSpec& cand : samples)
            if (cand.sample_id == s.donor_sample_id) d = &cand;
          if (d == nullptr)
            throw ValidationError("cli: donor sample '" + s.donor_sample_id + "' not found");
        } else if (samples.size() >= 2) {
          d = &samples[(i + 1) % samples.size()];
        } else {
          throw ValidationError("cli: decoy pools need at least two samples");
        }
        donor = DonorSample{d->sample_id, d->positive_id, d->date, d->background};
        donor_ptr = &donor;
      }
      pools.push_back(builder.build_ablation(kind, s.sample_id, s.positive_id, s.date,
                                             s.background, derive_seed(seed, i), donor_ptr,
                                             s.exclude));
    }
    save_pools(pools, corpus, mp_out, key_path);
    std::printf("wrote %zu pools to %s (key: %s)\n", pools.size(), mp_out.c_str(),
                key_path.c_str());

    RunManifest manifest;
    manifest.command = "make-pools";
    manifest.seed = seed;
    manifest.workers = workers;
    manifest.config = {{"ablation", mp_ablation},       {"pool_size", mp_cfg.pool_size},
                       {"n_hard", mp_cfg.n_hard},       {"n_easy", mp_cfg.n_easy},
                       {"keyword_min", mp_cfg.keyword_min}, {"embed_top", mp_cfg.embed_top}};
    manifest.inputs = {mp_corpus, mp_samples};
    manifest.outputs = {mp_out, key_path};
    manifest.duration_ms = watch.elapsed_ms();
    write_manifest(manifest, mp_out);
  });

  // stratify
  auto* cmd_strat = app.add_subcommand("stratify", "pick tier representatives from similarities");
  std::string st_input, st_out;
  cmd_strat->add_option("--input", st_input, "CSV with header id,similarity")->required();
  cmd_strat->add_option("--out", st_out, "representatives CSV output")
      ->required()
      ->envname("SEMTREE_OUT");
  cmd_strat->callback([&] {
    Stopwatch watch;
    CsvTable table = read_csv(st_input);
    if (table.header.size() != 2 || table.header[0] != "id" || table.header[1] != "similarity")
      throw ValidationError("cli: stratify input must have header id,similarity");
    std::vector<std::pair<std::string, double>> sims;
    sims.reserve(table.rows.size());
    for (const auto& row : table.rows) sims.push_back({row[0], std::stod(row[1])});
    TierRepresentatives reps = stratify_tiers(sims);

    std::string out = "tier,id,similarity\n";
    std::vector<Tier> present;
    auto emit = [&](Tier tier, const std::optional<TierPick>& pick) {
      if (!pick) return;
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.10g", pick->similarity);
      out += tier_name(tier) + "," + csv_escape(pick->doc_id) + "," + buf + "\n";
      present.push_back(tier);
    };
    emit(Tier::easy, reps.easy);
    emit(Tier::medium, reps.medium);
    emit(Tier::hard, reps.hard);
    write_text_file(st_out, out);
    std::printf("training tier: %s\n",
                present.empty() ? "none" : tier_name(select_training_tier(present)).c_str());

    RunManifest manifest;
    manifest.command = "stratify";
    manifest.seed = seed;
    manifest.workers = workers;
    manifest.inputs = {st_input};
    manifest.outputs = {st_out};
    manifest.duration_ms = watch.elapsed_ms();
    write_manifest(manifest, st_out);
  });

  // simulate
  auto* cmd_sim = app.add_subcommand("simulate", "Monte-Carlo search-cost policies");
  std::string sm_policy, sm_sweep, sm_out, sm_curve_out, sm_by_k_out;
  SimConfig sm_cfg;
  cmd_sim->add_option("--policy", sm_policy,
                      "brute-force, sequential-scan, hierarchical or motivation");
  cmd_sim->add_option("--sweep", sm_sweep, "sweep config JSON (grid axes)");
  cmd_sim->add_option("-N,--N", sm_cfg.N, "knowledge-base size");
  cmd_sim->add_option("-k,--k", sm_cfg.k, "chain length");
  cmd_sim->add_option("-M,--M", sm_cfg.M, "tolerance-set size");
  cmd_sim->add_option("--N-m", sm_cfg.N_m, "motivation subspace size (0: N)");
  cmd_sim->add_option("-c,--branching", sm_cfg.c, "branching factor");
  cmd_sim->add_option("--alpha", sm_cfg.alpha, "router accuracy in [0,1]")
      ->envname("SEMTREE_ALPHA");
  cmd_sim->add_option("--trials", sm_cfg.trials, "Monte-Carlo trials")->envname("SEMTREE_TRIALS");
  cmd_sim->add_option("--budget", sm_cfg.budget, "max calls per trial (0: unlimited)")
      ->envname("SEMTREE_BUDGET");
  cmd_sim->add_option("--out", sm_out, "summary CSV output")->required()->envname("SEMTREE_OUT");
  cmd_sim->add_option("--curve-out", sm_curve_out, "cumulative success-vs-calls CSV");
  cmd_sim->add_option("--by-k-out", sm_by_k_out, "success-by-k CSV");
  cmd_sim->callback([&] {
    Stopwatch watch;
    std::vector<SimResult> results;
    if (!sm_sweep.empty()) {
      SweepSpec spec = load_sweep(sm_sweep);
      results = run_sweep(spec, workers);
    } else {
      if (sm_policy.empty())
        throw ValidationError("cli: simulate needs --policy or --sweep");
      sm_cfg.seed = seed;
      results.push_back(run_policy(sm_policy, sm_cfg, workers));
    }
    write_text_file(sm_out, sim_results_to_csv(results));
    if (!sm_curve_out.empty()) {
      std::string curves;
      for (const SimResult& r : results) {
        std::string one = curve_to_csv(r);
        if (curves.empty()) curves = one;
        else curves += one.substr(one.find('\n') + 1);
      }
      if (curves.empty())
        curves = "policy,N,k,M,N_m,c,alpha,trial,cum_calls,cum_successes,success_fraction\n";
      write_text_file(sm_curve_out, curves);
    }
    if (!sm_by_k_out.empty()) write_text_file(sm_by_k_out, success_by_k_csv(results));
    for (const SimResult& r : results)
      std::printf("%s N=%lld k=%lld: mean_calls %.4g, success_rate %.4g\n", r.policy.c_str(),
                  static_cast<long long>(r.cfg.N), static_cast<long long>(r.cfg.k), r.mean_calls,
                  r.success_rate);

    RunManifest manifest;
    manifest.command = "simulate";
    manifest.seed = sm_sweep.empty() ? seed : 0;
    manifest.workers = workers;
    if (sm_sweep.empty()) {
      manifest.config = {{"policy", sm_policy}, {"N", sm_cfg.N},         {"k", sm_cfg.k},
                         {"M", sm_cfg.M},       {"N_m", sm_cfg.N_m},     {"c", sm_cfg.c},
                         {"alpha", sm_cfg.alpha}, {"trials", sm_cfg.trials},
                         {"budget", sm_cfg.budget}};
    } else {
      manifest.config = {{"sweep", sm_sweep}};
      manifest.inputs.push_back(sm_sweep);
    }
    manifest.outputs = {sm_out};
    if (!sm_curve_out.empty()) manifest.outputs.push_back(sm_curve_out);
    if (!sm_by_k_out.empty()) manifest.outputs.push_back(sm_by_k_out);
    manifest.duration_ms = watch.elapsed_ms();
    write_manifest(manifest, sm_out);
  });

  // score
  auto* cmd_score = app.add_subcommand("score", "rubric scores and pairwise verdicts");
  std::string sc_coverage, sc_judgments, sc_out, sc_verdicts_out;
  cmd_score->add_option("--coverage", sc_coverage, "element coverage JSONL");
  cmd_score->add_option("--judgments", sc_judgments, "pairwise judgment JSONL");
  cmd_score->add_option("--out", sc_out, "primary CSV output")
      ->required()
      ->envname("SEMTREE_OUT");
  cmd_score->add_option("--verdicts-out", sc_verdicts_out,
                        "verdict CSV when both inputs are given");
  cmd_score->callback([&] {
    Stopwatch watch;
    if (sc_coverage.empty() && sc_judgments.empty())
      throw ValidationError("cli: score needs --coverage and/or --judgments");
    RunManifest manifest;
    manifest.command = "score";
    manifest.seed = seed;
    manifest.workers = workers;
    manifest.outputs = {sc_out};
    if (!sc_coverage.empty()) {
      auto coverage = load_coverage(sc_coverage);
      auto scored = score_coverage(coverage);
      write_text_file(sc_out, scores_to_csv(scored));
      int64_t passes = 0;
      for (const ScoredSample& s : scored)
        if (rft_pass(s.score)) ++passes;
      std::printf("%zu samples scored, %lld pass the gate\n", scored.size(),
                  static_cast<long long>(passes));
      manifest.inputs.push_back(sc_coverage);
      if (!sc_judgments.empty()) {
        std::string vpath = sc_verdicts_out.empty() ? sc_out + ".verdicts.csv" : sc_verdicts_out;
        auto verdicts = aggregate_judgments(load_judgments(sc_judgments));
        write_text_file(vpath, verdicts_to_csv(verdicts));
        std::printf("%zu pairs aggregated\n", verdicts.size());
        manifest.inputs.push_back(sc_judgments);
        manifest.outputs.push_back(vpath);
      }
    } else {
      auto verdicts = aggregate_judgments(load_judgments(sc_judgments));
      write_text_file(sc_out, verdicts_to_csv(verdicts));
      std::printf("%zu pairs aggregated\n", verdicts.size());
      manifest.inputs.push_back(sc_judgments);
    }
    manifest.duration_ms = watch.elapsed_ms();
    write_manifest(manifest, sc_out);
  });

  // joint-table
  auto* cmd_joint = app.add_subcommand("joint-table", "retrieval-and-score success grid");
  std::string jt_ranks, jt_scores, jt_out, jt_rank_ts = "1,5,25,100", jt_score_ts = "4,8,10";
  cmd_joint->add_option("--ranks", jt_ranks, "eval CSV (target_id,...,proposed_rank,...)")
      ->required();
  cmd_joint->add_option("--scores", jt_scores, "scores CSV from the score command")->required();
  cmd_joint->add_option("--rank-thresholds", jt_rank_ts, "comma-separated K values");
  cmd_joint->add_option("--score-thresholds", jt_score_ts, "comma-separated S values");
  cmd_joint->add_option("--out", jt_out, "joint table CSV output")
      ->required()
      ->envname("SEMTREE_OUT");
  cmd_joint->callback([&] {
    Stopwatch watch;
    CsvTable rank_table = read_csv(jt_ranks);
    if (rank_table.header.size() < 3 || rank_table.header[0] != "target_id" ||
        rank_table.header[2] != "proposed_rank")
      throw ValidationError("cli: ranks file must be an eval CSV");
    CsvTable score_table = read_csv(jt_scores);
    if (score_table.header.size() < 5 || score_table.header[0] != "sample_id" ||
        score_table.header[4] != "total")
      throw ValidationError("cli: scores file must be a score CSV");

    std::map<std::string, std::optional<int64_t>> rank_by_id;
    for (const auto& row : rank_table.rows)
      rank_by_id[row[0]] = row[2].empty() ? std::nullopt
                                          : std::optional<int64_t>(std::stoll(row[2]));
    std::map<std::string, int> total_by_id;
    for (const auto& row : score_table.rows) total_by_id[row[0]] = std::stoi(row[4]);
    if (rank_by_id.size() != rank_table.rows.size())
      throw ValidationError("cli: duplicate target ids in ranks file");
    if (rank_by_id.size() != total_by_id.size())
      throw ValidationError("cli: rank and score files cover different sample sets");
    std::vector<std::optional<int64_t>> ranks;
    std::vector<int> totals;
    for (const auto& [id, rank] : rank_by_id) {
      auto it = total_by_id.find(id);
      if (it == total_by_id.end())
        throw ValidationError("cli: sample '" + id + "' has a rank but no score");
      ranks.push_back(rank);
      totals.push_back(it->second);
    }

    auto parse_list = [](const std::string& text) {
      std::vector<int64_t> out;
      std::string cur;
      for (char ch : text + ",") {
        if (ch == ',') {
          if (!cur.empty()) out.push_back(std::stoll(cur));
          cur.clear();
        } else {
          cur += ch;
        }
      }
      return out;
    };
    std::vector<int64_t> Ks = parse_list(jt_rank_ts);
    std::vector<int> Ss;
    for (int64_t s : parse_list(jt_score_ts)) Ss.push_back(static_cast<int>(s));

    auto cells = joint_success_table(ranks, totals, Ks, Ss);
    write_text_file(jt_out, joint_table_to_csv(cells));
    std::printf("%zu cells over %zu samples\n", cells.size(), ranks.size());

    RunManifest manifest;
    manifest.command = "joint-table";
    manifest.seed = seed;
    manifest.workers = workers;
    manifest.config = {{"rank_thresholds", jt_rank_ts}, {"score_thresholds", jt_score_ts}};
    manifest.inputs = {jt_ranks, jt_scores};
    manifest.outputs = {jt_out};
    manifest.duration_ms = watch.elapsed_ms();
    write_manifest(manifest, jt_out);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
