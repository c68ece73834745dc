#include "semtree/pools.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <unordered_set>

#include "json.hpp"
#include "semtree/rng.hpp"

namespace semtree {

using nlohmann::json;

std::string candidate_tag_name(CandidateTag tag) {
  switch (tag) {
    case CandidateTag::positive: return "positive";
    case CandidateTag::easy_random: return "easy_random";
    case CandidateTag::hard_kw_background: return "hard_kw_background";
    case CandidateTag::hard_kw_inspiration: return "hard_kw_inspiration";
    case CandidateTag::hard_embed: return "hard_embed";
    case CandidateTag::decoy: return "decoy";
  }
  return "?";
}

CandidateTag parse_candidate_tag(const std::string& name) {
  for (CandidateTag tag :
       {CandidateTag::positive, CandidateTag::easy_random, CandidateTag::hard_kw_background,
        CandidateTag::hard_kw_inspiration, CandidateTag::hard_embed, CandidateTag::decoy}) {
    if (candidate_tag_name(tag) == name) return tag;
  }
  throw ValidationError("pools: unknown candidate tag '" + name + "'");
}

PoolKind parse_pool_kind(const std::string& name) {
  if (name == "standard" || name == "none") return PoolKind::standard;
  if (name == "all_random") return PoolKind::all_random;
  if (name == "all_hard") return PoolKind::all_hard;
  if (name == "decoy_cluster") return PoolKind::decoy_cluster;
  throw ValidationError("pools: unknown pool kind '" + name + "'");
}

std::string pool_kind_name(PoolKind kind) {
  switch (kind) {
    case PoolKind::standard: return "standard";
    case PoolKind::all_random: return "all_random";
    case PoolKind::all_hard: return "all_hard";
    case PoolKind::decoy_cluster: return "decoy_cluster";
  }
  return "?";
}

namespace {

const std::unordered_set<std::string>& stop_words() {
  static const std::unordered_set<std::string> words = {
      "a",     "about",  "above", "after", "again",   "all",   "an",    "and",   "any",
      "are",   "as",     "at",    "be",    "been",    "both",  "but",   "by",    "can",
      "could", "did",    "do",    "does",  "for",     "from",  "had",   "has",   "have",
      "how",   "if",     "in",    "into",  "is",      "it",    "its",   "may",   "more",
      "most",  "not",    "of",    "on",    "or",      "our",   "such",  "than",  "that",
      "the",   "their",  "these", "this",  "those",   "through", "to",  "under", "was",
      "we",    "were",   "what",  "when",  "where",   "which", "while", "with",  "within",
      "would"};
  return words;
}

int64_t count_shared(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  size_t i = 0, j = 0;
  int64_t shared = 0;
  while (i < a.size() && j < b.size()) {
    int cmp = a[i].compare(b[j]);
    if (cmp == 0) {
      ++shared;
      ++i;
      ++j;
    } else if (cmp < 0) {
      ++i;
    } else {
      ++j;
    }
  }
  return shared;
}

} // namespace

std::vector<std::string> content_tokens(const std::string& text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char ch : text) {
    unsigned char u = static_cast<unsigned char>(ch);
    if (std::isalnum(u)) {
      cur += static_cast<char>(std::tolower(u));
    } else if (!cur.empty()) {
      if (stop_words().count(cur) == 0) tokens.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty() && stop_words().count(cur) == 0) tokens.push_back(cur);
  std::sort(tokens.begin(), tokens.end());
  tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
  return tokens;
}

bool keyword_overlap(const std::string& a, const std::string& b, int m) {
  return count_shared(content_tokens(a), content_tokens(b)) >= m;
}

PoolBuilder::PoolBuilder(const Corpus& corpus, const PoolConfig& cfg)
    : corpus_(corpus), cfg_(cfg) {
  if (cfg_.pool_size < 2) throw ValidationError("pools: pool size must be >= 2");
  if (cfg_.n_easy < 0 || cfg_.n_hard < 0)
    throw ValidationError("pools: negative counts in pool config");
  if (1 + cfg_.n_easy + cfg_.n_hard != cfg_.pool_size)
    throw ValidationError("pools: 1 positive + " + std::to_string(cfg_.n_easy) + " easy + " +
                          std::to_string(cfg_.n_hard) + " hard does not fill a pool of " +
                          std::to_string(cfg_.pool_size));
  if (cfg_.keyword_min < 1) throw ValidationError("pools: keyword threshold must be >= 1");
  if (cfg_.embed_top < 0) throw ValidationError("pools: embed harvest depth must be >= 0");
  doc_tokens_.reserve(corpus_.docs.size());
  for (const DocRecord& d : corpus_.docs)
    doc_tokens_.push_back(content_tokens(d.title + " " + d.abstract_text));
}

std::vector<int64_t> PoolBuilder::harvest_hard(int64_t positive_pos, const YearMonth& source_date,
                                               const std::string& background, int want,
                                               const std::vector<char>& blocked,
                                               std::vector<CandidateTag>* tags_out) const {
  (void)source_date; // eligibility is baked into blocked by the caller
  const int64_t n = corpus_.size();
  std::vector<std::string> bg_tokens = content_tokens(background);
  const std::vector<std::string>& insp_tokens = doc_tokens_[static_cast<size_t>(positive_pos)];

  // (count, pos) ranked by overlap desc then position.
  std::vector<std::pair<int64_t, int64_t>> kw_bg, kw_insp;
  std::vector<std::pair<double, int64_t>> by_embed;
  for (int64_t pos = 0; pos < n; ++pos) {
    if (blocked[static_cast<size_t>(pos)]) continue;
    int64_t cbg = count_shared(bg_tokens, doc_tokens_[static_cast<size_t>(pos)]);
    if (cbg >= cfg_.keyword_min) kw_bg.push_back({cbg, pos});
    int64_t cin = count_shared(insp_tokens, doc_tokens_[static_cast<size_t>(pos)]);
    if (cin >= cfg_.keyword_min) kw_insp.push_back({cin, pos});
    by_embed.push_back({cosine(corpus_.at(positive_pos).embedding, corpus_.at(pos).embedding), pos});
  }
  auto kw_order = [](const std::pair<int64_t, int64_t>& a, const std::pair<int64_t, int64_t>& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  };
  std::sort(kw_bg.begin(), kw_bg.end(), kw_order);
  std::sort(kw_insp.begin(), kw_insp.end(), kw_order);
  std::sort(by_embed.begin(), by_embed.end(),
            [](const std::pair<double, int64_t>& a, const std::pair<double, int64_t>& b) {
              if (a.first != b.first) return a.first > b.first;
              return a.second < b.second;
            });
  if (static_cast<int>(by_embed.size()) > cfg_.embed_top) by_embed.resize(cfg_.embed_top);

  std::array<std::vector<int64_t>, 3> lists;
  lists[0].reserve(kw_bg.size());
  for (auto& p : kw_bg) lists[0].push_back(p.second);
  lists[1].reserve(kw_insp.size());
  for (auto& p : kw_insp) lists[1].push_back(p.second);
  lists[2].reserve(by_embed.size());
  for (auto& p : by_embed) lists[2].push_back(p.second);
  const std::array<CandidateTag, 3> cat_tags = {CandidateTag::hard_kw_background,
                                                CandidateTag::hard_kw_inspiration,
                                                CandidateTag::hard_embed};

  std::vector<int64_t> out;
  std::unordered_set<int64_t> used;
  std::array<size_t, 3> idx = {0, 0, 0};
  int cat = 0;
  int dry = 0;
  while (static_cast<int>(out.size()) < want && dry < 3) {
    size_t& i = idx[static_cast<size_t>(cat)];
    const auto& lst = lists[static_cast<size_t>(cat)];
    while (i < lst.size() && used.count(lst[i]) > 0) ++i;
    if (i < lst.size()) {
      used.insert(lst[i]);
      out.push_back(lst[i]);
      if (tags_out) tags_out->push_back(cat_tags[static_cast<size_t>(cat)]);
      ++i;
      dry = 0;
    } else {
      ++dry;
    }
    cat = (cat + 1) % 3;
  }
  return out;
}

CandidatePool PoolBuilder::build(const std::string& pool_id, const std::string& positive_id,
                                 const YearMonth& source_date, const std::string& background,
                                 uint64_t seed, const std::vector<std::string>& exclude) const {
  return build_ablation(PoolKind::standard, pool_id, positive_id, source_date, background, seed,
                        nullptr, exclude);
}

CandidatePool PoolBuilder::build_ablation(PoolKind kind, const std::string& pool_id,
                                          const std::string& positive_id,
                                          const YearMonth& source_date,
                                          const std::string& background, uint64_t seed,
                                          const DonorSample* donor,
                                          const std::vector<std::string>& exclude) const {
  const int64_t n = corpus_.size();
  int64_t positive_pos = corpus_.position_of(positive_id);
  if (positive_pos < 0)
    throw ValidationError("pools: positive '" + positive_id + "' is not in the corpus");

  std::vector<char> blocked(static_cast<size_t>(n), 0);
  for (int64_t pos = 0; pos < n; ++pos)
    if (!(corpus_.at(pos).date <= source_date)) blocked[static_cast<size_t>(pos)] = 1;
  blocked[static_cast<size_t>(positive_pos)] = 1;
  for (const std::string& id : exclude) {
    int64_t pos = corpus_.position_of(id);
    if (pos >= 0) blocked[static_cast<size_t>(pos)] = 1;
  }

  const int need = cfg_.pool_size - 1;
  int64_t eligible = 0;
  for (int64_t pos = 0; pos < n; ++pos)
    if (!blocked[static_cast<size_t>(pos)]) ++eligible;
  if (eligible < need)
    throw ValidationError("pools: only " + std::to_string(eligible) + " eligible negatives for '" +
                          positive_id + "', need " + std::to_string(need));

  int want_hard = cfg_.n_hard;
  if (kind == PoolKind::all_random) want_hard = 0;
  if (kind == PoolKind::all_hard) want_hard = need;

  std::vector<int64_t> hard;
  std::vector<CandidateTag> hard_tags;
  if (kind == PoolKind::decoy_cluster) {
    if (donor == nullptr)
      throw ValidationError("pools: decoy pool for '" + pool_id + "' has no donor sample");
    if (donor->sample_id == pool_id)
      throw ValidationError("pools: decoy donor must differ from the sample itself");
    int64_t donor_pos = corpus_.position_of(donor->positive_id);
    if (donor_pos < 0)
      throw ValidationError("pools: donor positive '" + donor->positive_id +
                            "' is not in the corpus");
    // Donor isolation: the sample's own hard harvest is off limits, so the
    // decoys are coherent around the donor's inspiration, not this one's.
    std::vector<int64_t> own =
        harvest_hard(positive_pos, source_date, background, cfg_.n_hard, blocked, nullptr);
    std::vector<char> decoy_blocked = blocked;
    for (int64_t pos : own) decoy_blocked[static_cast<size_t>(pos)] = 1;
    decoy_blocked[static_cast<size_t>(donor_pos)] = 1;
    hard = harvest_hard(donor_pos, source_date, donor->background, want_hard, decoy_blocked,
                        nullptr);
    if (static_cast<int>(hard.size()) < want_hard)
      throw ValidationError("pools: donor '" + donor->sample_id + "' supplies only " +
                            std::to_string(hard.size()) + " decoys, need " +
                            std::to_string(want_hard));
    hard_tags.assign(hard.size(), CandidateTag::decoy);
  } else if (want_hard > 0) {
    hard = harvest_hard(positive_pos, source_date, background, want_hard, blocked, &hard_tags);
    if (kind == PoolKind::all_hard && static_cast<int>(hard.size()) < want_hard)
      throw ValidationError("pools: only " + std::to_string(hard.size()) +
                            " hard negatives available for '" + positive_id + "', need " +
                            std::to_string(want_hard));
  }

  std::unordered_set<int64_t> used(hard.begin(), hard.end());
  std::vector<int64_t> remaining;
  remaining.reserve(static_cast<size_t>(eligible));
  for (int64_t pos = 0; pos < n; ++pos)
    if (!blocked[static_cast<size_t>(pos)] && used.count(pos) == 0) remaining.push_back(pos);

  const int want_easy = need - static_cast<int>(hard.size());
  if (static_cast<int>(remaining.size()) < want_easy)
    throw ValidationError("pools: only " + std::to_string(remaining.size()) +
                          " docs left for easy negatives, need " + std::to_string(want_easy));

  std::mt19937_64 rng(seed);
  std::vector<int64_t> easy_idx =
      sample_without_replacement(rng, static_cast<int64_t>(remaining.size()), want_easy);

  CandidatePool pool;
  pool.pool_id = pool_id;
  pool.seed = seed;
  pool.query.background = background;
  pool.candidates.reserve(static_cast<size_t>(cfg_.pool_size));
  pool.candidates.push_back(PoolCandidate{positive_pos, CandidateTag::positive});
  for (size_t i = 0; i < hard.size(); ++i)
    pool.candidates.push_back(PoolCandidate{hard[i], hard_tags[i]});
  for (int64_t idx : easy_idx)
    pool.candidates.push_back(
        PoolCandidate{remaining[static_cast<size_t>(idx)], CandidateTag::easy_random});

  deterministic_shuffle(pool.candidates, rng);
  for (size_t i = 0; i < pool.candidates.size(); ++i)
    if (pool.candidates[i].tag == CandidateTag::positive)
      pool.positive_index = static_cast<int>(i);
  return pool;
}

void save_pools(const std::vector<CandidatePool>& pools, const Corpus& corpus,
                const std::string& pools_path, const std::string& key_path) {
  std::ofstream pf(pools_path, std::ios::binary);
  if (!pf) throw IoError("pools: cannot write " + pools_path);
  std::ofstream kf(key_path, std::ios::binary);
  if (!kf) throw IoError("pools: cannot write " + key_path);
  for (const CandidatePool& pool : pools) {
    json blind;
    blind["pool_id"] = pool.pool_id;
    blind["seed"] = pool.seed;
    blind["query"] = {{"background", pool.query.background}};
    json cands = json::array();
    for (const PoolCandidate& c : pool.candidates) {
      const DocRecord& rec = corpus.at(c.doc_pos);
      cands.push_back({{"id", rec.id}, {"title", rec.title}, {"abstract", rec.abstract_text}});
    }
    blind["candidates"] = std::move(cands);
    pf << blind.dump() << "\n";

    json key;
    key["pool_id"] = pool.pool_id;
    key["positive_id"] = corpus.at(pool.candidates[static_cast<size_t>(pool.positive_index)].doc_pos).id;
    key["positive_index"] = pool.positive_index;
    json prov = json::array();
    for (const PoolCandidate& c : pool.candidates) prov.push_back(candidate_tag_name(c.tag));
    key["provenance"] = std::move(prov);
    kf << key.dump() << "\n";
  }
  if (!pf || !kf) throw IoError("pools: write failed");
}

std::string tier_name(Tier tier) {
  switch (tier) {
    case Tier::easy: return "Easy";
    case Tier::medium: return "Medium";
    case Tier::hard: return "Hard";
    case Tier::none: return "None";
  }
  return "?";
}

Tier tier_of(double sim) {
  if (sim >= 0.94 && sim < 0.97) return Tier::easy;
  if (sim >= 0.92 && sim < 0.94) return Tier::medium;
  if (sim >= 0.90 && sim < 0.92) return Tier::hard;
  return Tier::none;
}

TierRepresentatives stratify_tiers(const std::vector<std::pair<std::string, double>>& sims) {
  TierRepresentatives reps;
  for (const auto& [id, sim] : sims) {
    if (!(sim >= -1.0 && sim <= 1.0))
      throw ValidationError("pools: similarity " + std::to_string(sim) + " outside [-1,1]");
    std::optional<TierPick>* slot = nullptr;
    switch (tier_of(sim)) {
      case Tier::easy: slot = &reps.easy; break;
      case Tier::medium: slot = &reps.medium; break;
      case Tier::hard: slot = &reps.hard; break;
      case Tier::none: continue;
    }
    if (!slot->has_value() || sim > (*slot)->similarity) *slot = TierPick{id, sim};
  }
  return reps;
}

Tier select_training_tier(const std::vector<Tier>& passing) {
  bool has_easy = false, has_medium = false, has_hard = false;
  for (Tier t : passing) {
    if (t == Tier::easy) has_easy = true;
    if (t == Tier::medium) has_medium = true;
    if (t == Tier::hard) has_hard = true;
  }
  if (has_hard) return Tier::hard;
  if (has_medium) return Tier::medium;
  if (has_easy) return Tier::easy;
  throw ValidationError("pools: no passing tier to select from");
}

} // namespace semtree
