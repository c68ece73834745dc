#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "semtree/corpus.hpp"
#include "semtree/errors.hpp"

namespace semtree {

// One child of the node being expanded, as seen by a router. representative
// is the node centroid for internal children and the document embedding for
// document children; it may be empty when no vector is available (external
// scorers work from text alone).
struct ChildCandidate {
  std::string id;
  std::string title;
  std::string abstract_text;
  Vec representative;
  bool contains_target = false;
};

struct RouterDistribution {
  std::vector<double> probs; // aligned with the candidate list
};

enum class RouterKind { similarity, planted_oracle, external };

RouterKind parse_router_kind(const std::string& name);
std::string router_kind_name(RouterKind kind);

struct RouterConfig {
  RouterKind kind = RouterKind::similarity;
  double temperature = 0.05; // similarity
  double alpha = 1.0;        // planted_oracle, in [0,1]
  std::string endpoint;      // external: "http://..." or a shell command
  uint64_t seed = 0;
  int timeout_ms = 10000;    // external
  bool renormalize = false;  // diagnostic: accept off-by-rounding replies
};

// Routers are pure given (config, query, context_key, children); context_key
// identifies the expansion point so stochastic routers stay deterministic and
// call-order independent.
class Router {
public:
  virtual ~Router() = default;
  virtual RouterDistribution route(const QueryContext& query, uint64_t context_key,
                                   const std::vector<ChildCandidate>& children) = 0;
};

// softmax(scores/tau) with max-subtraction; exposed for the shift-invariance
// property.
std::vector<double> softmax(const std::vector<double>& scores, double tau);

// Target child gets alpha + (1-alpha)/n, every other child (1-alpha)/n.
// Requires exactly one true flag.
RouterDistribution planted_mass(const std::vector<bool>& child_contains_target, double alpha);

// Checks RouterDistribution invariants (length, non-negativity, sum within
// 1e-9 of 1). With renormalize set, a positive off-sum vector is scaled
// instead of rejected; never applied silently.
std::vector<double> validate_distribution(std::vector<double> probs, size_t n_children,
                                          bool renormalize);

std::unique_ptr<Router> make_router(const RouterConfig& cfg);

} // namespace semtree
