#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "semtree/corpus.hpp"

namespace semtree {

enum class CandidateTag {
  positive,
  easy_random,
  hard_kw_background,
  hard_kw_inspiration,
  hard_embed,
  decoy,
};

std::string candidate_tag_name(CandidateTag tag);
CandidateTag parse_candidate_tag(const std::string& name);

inline bool is_hard_tag(CandidateTag tag) {
  return tag == CandidateTag::hard_kw_background || tag == CandidateTag::hard_kw_inspiration ||
         tag == CandidateTag::hard_embed || tag == CandidateTag::decoy;
}

struct PoolCandidate {
  int64_t doc_pos;
  CandidateTag tag;
};

struct CandidatePool {
  std::string pool_id;
  QueryContext query;
  std::vector<PoolCandidate> candidates; // shuffled; positive position is uniform
  int positive_index = -1;
  uint64_t seed = 0;
};

enum class PoolKind { standard, all_random, all_hard, decoy_cluster };

PoolKind parse_pool_kind(const std::string& name);
std::string pool_kind_name(PoolKind kind);

struct PoolConfig {
  int pool_size = 15;
  int n_easy = 9;  // standard mix; all_* ablations override the split
  int n_hard = 5;
  int keyword_min = 3; // shared content tokens for a keyword-overlap negative
  int embed_top = 50;  // harvest depth for embedding-similar negatives
};

struct DonorSample {
  std::string sample_id;
  std::string positive_id;
  YearMonth source_date;
  std::string background;
};

// Lowercased, punctuation-stripped content tokens (stop words removed),
// deduplicated and sorted.
std::vector<std::string> content_tokens(const std::string& text);
// True iff the two texts share at least m distinct content tokens.
bool keyword_overlap(const std::string& a, const std::string& b, int m = 3);

// Pre-tokenizes the corpus once so pool construction is cheap per sample.
class PoolBuilder {
public:
  PoolBuilder(const Corpus& corpus, const PoolConfig& cfg);

  // Negatives are always published no later than source_date and never equal
  // the positive or an excluded id. Hard slots are filled round-robin from
  // the three harvest categories (background keywords, inspiration keywords,
  // embedding neighbors), falling back to easy negatives when the harvest
  // runs dry; all_hard refuses the fallback. The final candidate order is a
  // seeded shuffle, making the positive's position uniform.
  CandidatePool build(const std::string& pool_id, const std::string& positive_id,
                      const YearMonth& source_date, const std::string& background,
                      uint64_t seed, const std::vector<std::string>& exclude = {}) const;

  CandidatePool build_ablation(PoolKind kind, const std::string& pool_id,
                               const std::string& positive_id, const YearMonth& source_date,
                               const std::string& background, uint64_t seed,
                               const DonorSample* donor = nullptr,
                               const std::vector<std::string>& exclude = {}) const;

  const Corpus& corpus() const { return corpus_; }
  const PoolConfig& config() const { return cfg_; }

private:
  std::vector<int64_t> harvest_hard(int64_t positive_pos, const YearMonth& source_date,
                                    const std::string& background, int want,
                                    const std::vector<char>& blocked,
                                    std::vector<CandidateTag>* tags_out) const;

  const Corpus& corpus_;
  PoolConfig cfg_;
  std::vector<std::vector<std::string>> doc_tokens_; // per doc, sorted unique
};

// Blind pool records (no tags, no positive) and the companion answer key.
void save_pools(const std::vector<CandidatePool>& pools, const Corpus& corpus,
                const std::string& pools_path, const std::string& key_path);

enum class Tier { easy, medium, hard, none };

std::string tier_name(Tier tier);

// Easy [0.94,0.97), Medium [0.92,0.94), Hard [0.90,0.92), None elsewhere.
Tier tier_of(double sim);

struct TierPick {
  std::string doc_id;
  double similarity;
};

struct TierRepresentatives {
  std::optional<TierPick> easy;
  std::optional<TierPick> medium;
  std::optional<TierPick> hard;
};

// Per tier, the member with the highest similarity (first occurrence wins a
// tie). Similarities must lie in [-1, 1].
TierRepresentatives stratify_tiers(const std::vector<std::pair<std::string, double>>& sims);

// Hard > Medium > Easy.
Tier select_training_tier(const std::vector<Tier>& passing);

} // namespace semtree
