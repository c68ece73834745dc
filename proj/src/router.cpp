#include "semtree/router.hpp"

#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstring>
#include <mutex>

#include "httplib.h"
#include "json.hpp"
#include "semtree/rng.hpp"

namespace semtree {

using nlohmann::json;

RouterKind parse_router_kind(const std::string& name) {
  if (name == "similarity") return RouterKind::similarity;
  if (name == "planted" || name == "planted_oracle") return RouterKind::planted_oracle;
  if (name == "external") return RouterKind::external;
  throw ValidationError("router: unknown router kind '" + name + "'");
}

std::string router_kind_name(RouterKind kind) {
  switch (kind) {
    case RouterKind::similarity: return "similarity";
    case RouterKind::planted_oracle: return "planted_oracle";
    case RouterKind::external: return "external";
  }
  return "?";
}

std::vector<double> softmax(const std::vector<double>& scores, double tau) {
  if (scores.empty()) throw RouterError("router: softmax over zero scores");
  if (!(tau > 0.0)) throw RouterError("router: softmax temperature must be positive");
  double mx = scores[0];
  for (double s : scores) mx = std::max(mx, s);
  std::vector<double> out(scores.size());
  double sum = 0.0;
  for (size_t i = 0; i < scores.size(); ++i) {
    out[i] = std::exp((scores[i] - mx) / tau);
    sum += out[i];
  }
  for (double& p : out) p /= sum;
  return out;
}

RouterDistribution planted_mass(const std::vector<bool>& child_contains_target, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw RouterError("router: planted alpha must lie in [0,1]");
  size_t n = child_contains_target.size();
  if (n == 0) throw RouterError("router: planted_mass over zero children");
  size_t n_true = 0;
  size_t target = 0;
  for (size_t i = 0; i < n; ++i)
    if (child_contains_target[i]) {
      ++n_true;
      target = i;
    }
  if (n_true != 1)
    throw RouterError("router: planted_mass requires exactly one target child, got " +
                      std::to_string(n_true));
  RouterDistribution dist;
  double base = (1.0 - alpha) / static_cast<double>(n);
  dist.probs.assign(n, base);
  dist.probs[target] += alpha;
  return dist;
}

std::vector<double> validate_distribution(std::vector<double> probs, size_t n_children,
                                          bool renormalize) {
  if (probs.size() != n_children)
    throw RouterError("router: distribution has " + std::to_string(probs.size()) +
                      " probs for " + std::to_string(n_children) + " candidates");
  double sum = 0.0;
  for (double p : probs) {
    if (!std::isfinite(p) || p < 0.0)
      throw RouterError("router: distribution contains a negative or non-finite probability");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    if (renormalize && sum > 0.0) {
      for (double& p : probs) p /= sum;
    } else {
      throw RouterError("router: probabilities sum to " + std::to_string(sum) +
                        ", not 1 (renormalization disabled)");
    }
  }
  return probs;
}

namespace {

class SimilarityRouter final : public Router {
public:
  explicit SimilarityRouter(const RouterConfig& cfg) : tau_(cfg.temperature) {
    if (!(tau_ > 0.0)) throw ValidationError("router: temperature must be positive");
  }

  RouterDistribution route(const QueryContext& query, uint64_t,
                           const std::vector<ChildCandidate>& children) override {
    if (children.empty()) throw RouterError("router: route over zero children");
    if (!query.query_embedding.has_value())
      throw RouterError("router: similarity routing requires a query embedding");
    std::vector<double> scores;
    scores.reserve(children.size());
    for (const ChildCandidate& ch : children) {
      if (ch.representative.empty())
        throw RouterError("router: candidate '" + ch.id + "' has no representative vector");
      scores.push_back(cosine(*query.query_embedding, ch.representative));
    }
    RouterDistribution dist;
    dist.probs = softmax(scores, tau_);
    return dist;
  }

private:
  double tau_;
};

class PlantedOracleRouter final : public Router {
public:
  explicit PlantedOracleRouter(const RouterConfig& cfg) : alpha_(cfg.alpha), seed_(cfg.seed) {
    if (!(alpha_ >= 0.0 && alpha_ <= 1.0))
      throw ValidationError("router: planted alpha must lie in [0,1]");
  }

  // Pure in (seed, context_key): the "did the oracle look at the right
  // child" coin is a hash of the expansion point, so results never depend
  // on call order or concurrency.
  RouterDistribution route(const QueryContext&, uint64_t context_key,
                           const std::vector<ChildCandidate>& children) override {
    size_t n = children.size();
    if (n == 0) throw RouterError("router: route over zero children");
    int64_t target = -1;
    size_t n_true = 0;
    for (size_t i = 0; i < n; ++i)
      if (children[i].contains_target) {
        target = static_cast<int64_t>(i);
        ++n_true;
      }
    if (n_true > 1) throw RouterError("router: more than one child marked as target");
    RouterDistribution dist;
    if (n_true == 0) {
      // Off the target path the oracle has nothing to say.
      dist.probs.assign(n, 1.0 / static_cast<double>(n));
      return dist;
    }
    std::mt19937_64 rng(derive_seed(seed_, context_key));
    int64_t perceived = target;
    if (!(uniform_double(rng) < alpha_) && n > 1) {
      uint64_t r = uniform_index(rng, static_cast<uint64_t>(n - 1));
      perceived = static_cast<int64_t>(r) >= target ? static_cast<int64_t>(r) + 1
                                                    : static_cast<int64_t>(r);
    }
    std::vector<bool> flags(n, false);
    flags[static_cast<size_t>(perceived)] = true;
    return planted_mass(flags, alpha_);
  }

private:
  double alpha_;
  uint64_t seed_;
};

// One scorer subprocess, line-delimited JSON over its standard streams.
class LineProcess {
public:
  explicit LineProcess(const std::string& command) {
    ::signal(SIGPIPE, SIG_IGN); // a dead child must surface as an error, not kill us
    int to_child[2], from_child[2];
    if (::pipe(to_child) != 0 || ::pipe(from_child) != 0)
      throw RouterError("router: cannot create scorer pipes");
    pid_ = ::fork();
    if (pid_ < 0) throw RouterError("router: cannot fork scorer process");
    if (pid_ == 0) {
      ::dup2(to_child[0], 0);
      ::dup2(from_child[1], 1);
      ::close(to_child[0]);
      ::close(to_child[1]);
      ::close(from_child[0]);
      ::close(from_child[1]);
      ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
      _exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    in_fd_ = to_child[1];
    out_fd_ = from_child[0];
  }

  ~LineProcess() {
    if (in_fd_ >= 0) ::close(in_fd_);
    if (out_fd_ >= 0) ::close(out_fd_);
    if (pid_ > 0) {
      // Give the child a moment to exit on stdin EOF, then make sure.
      for (int i = 0; i < 20; ++i) {
        if (::waitpid(pid_, nullptr, WNOHANG) != 0) return;
        ::usleep(10000);
      }
      ::kill(pid_, SIGKILL);
      ::waitpid(pid_, nullptr, 0);
    }
  }

  LineProcess(const LineProcess&) = delete;
  LineProcess& operator=(const LineProcess&) = delete;

  std::string exchange(const std::string& line, int timeout_ms) {
    write_all(line);
    write_all("\n");
    auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
    for (;;) {
      size_t nl = buf_.find('\n');
      if (nl != std::string::npos) {
        std::string out = buf_.substr(0, nl);
        buf_.erase(0, nl + 1);
        return out;
      }
      auto now = std::chrono::steady_clock::now();
      if (now >= deadline)
        throw RouterTimeout("router: external scorer timed out after " +
                            std::to_string(timeout_ms) + " ms");
      int remaining = static_cast<int>(
          std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count());
      struct pollfd pfd{out_fd_, POLLIN, 0};
      int pr = ::poll(&pfd, 1, std::max(1, remaining));
      if (pr < 0) {
        if (errno == EINTR) continue;
        throw RouterError("router: poll on scorer pipe failed");
      }
      if (pr == 0)
        throw RouterTimeout("router: external scorer timed out after " +
                            std::to_string(timeout_ms) + " ms");
      char chunk[4096];
      ssize_t got = ::read(out_fd_, chunk, sizeof(chunk));
      if (got < 0) {
        if (errno == EINTR) continue;
        throw RouterError("router: read from scorer failed");
      }
      if (got == 0) throw RouterError("router: external scorer exited");
      buf_.append(chunk, static_cast<size_t>(got));
    }
  }

private:
  void write_all(const std::string& data) {
    size_t off = 0;
    while (off < data.size()) {
      ssize_t put = ::write(in_fd_, data.data() + off, data.size() - off);
      if (put < 0) {
        if (errno == EINTR) continue;
        throw RouterError("router: external scorer is not accepting requests");
      }
      off += static_cast<size_t>(put);
    }
  }

  pid_t pid_ = -1;
  int in_fd_ = -1;
  int out_fd_ = -1;
  std::string buf_;
};

class ExternalRouter final : public Router {
public:
  explicit ExternalRouter(const RouterConfig& cfg)
      : endpoint_(cfg.endpoint), timeout_ms_(cfg.timeout_ms), renormalize_(cfg.renormalize) {
    if (endpoint_.empty()) throw ValidationError("router: external routing requires an endpoint");
    http_ = endpoint_.rfind("http://", 0) == 0;
    if (http_) {
      size_t host_start = std::strlen("http://");
      size_t slash = endpoint_.find('/', host_start);
      base_url_ = slash == std::string::npos ? endpoint_ : endpoint_.substr(0, slash);
      path_ = slash == std::string::npos ? "/" : endpoint_.substr(slash);
    } else {
      process_ = std::make_unique<LineProcess>(endpoint_);
    }
  }

  RouterDistribution route(const QueryContext& query, uint64_t,
                           const std::vector<ChildCandidate>& children) override {
    if (children.empty()) throw RouterError("router: route over zero children");
    uint64_t request_id = next_id_.fetch_add(1);
    json req;
    req["request_id"] = request_id;
    json jq;
    jq["background"] = query.background;
    if (query.motivation) jq["motivation"] = *query.motivation;
    if (query.intermediate_hypothesis)
      jq["intermediate_hypothesis"] = *query.intermediate_hypothesis;
    req["query"] = std::move(jq);
    json cands = json::array();
    for (const ChildCandidate& ch : children) {
      json jc;
      jc["id"] = ch.id;
      jc["title"] = ch.title;
      jc["abstract"] = ch.abstract_text;
      cands.push_back(std::move(jc));
    }
    req["candidates"] = std::move(cands);

    std::string reply_text;
    {
      // Serialized: one request in flight at a time.
      std::lock_guard<std::mutex> lock(mu_);
      reply_text = http_ ? exchange_http(req.dump()) : process_->exchange(req.dump(), timeout_ms_);
    }

    json reply = json::parse(reply_text, nullptr, false);
    if (reply.is_discarded() || !reply.is_object() || !reply.contains("request_id") ||
        !reply.contains("probs") || !reply["probs"].is_array())
      throw RouterError("router: malformed scorer reply");
    if (reply["request_id"].get<uint64_t>() != request_id)
      throw RouterError("router: scorer reply for wrong request id");
    std::vector<double> probs;
    probs.reserve(reply["probs"].size());
    for (const auto& p : reply["probs"]) {
      if (!p.is_number()) throw RouterError("router: malformed scorer reply");
      probs.push_back(p.get<double>());
    }
    RouterDistribution dist;
    dist.probs = validate_distribution(std::move(probs), children.size(), renormalize_);
    return dist;
  }

private:
  std::string exchange_http(const std::string& body) {
    httplib::Client cli(base_url_);
    cli.set_connection_timeout(timeout_ms_ / 1000, (timeout_ms_ % 1000) * 1000);
    cli.set_read_timeout(timeout_ms_ / 1000, (timeout_ms_ % 1000) * 1000);
    cli.set_write_timeout(timeout_ms_ / 1000, (timeout_ms_ % 1000) * 1000);
    auto res = cli.Post(path_, body, "application/json");
    if (!res) {
      auto err = res.error();
      if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read ||
          err == httplib::Error::Write)
        throw RouterTimeout("router: external scorer timed out after " +
                            std::to_string(timeout_ms_) + " ms");
      throw RouterError("router: endpoint unreachable: " + httplib::to_string(err));
    }
    if (res->status != 200)
      throw RouterError("router: endpoint returned status " + std::to_string(res->status));
    return res->body;
  }

  std::string endpoint_;
  int timeout_ms_;
  bool renormalize_;
  bool http_ = false;
  std::string base_url_;
  std::string path_;
  std::unique_ptr<LineProcess> process_;
  std::mutex mu_;
  std::atomic<uint64_t> next_id_{1};
};

} // namespace

std::unique_ptr<Router> make_router(const RouterConfig& cfg) {
  switch (cfg.kind) {
    case RouterKind::similarity: return std::make_unique<SimilarityRouter>(cfg);
    case RouterKind::planted_oracle: return std::make_unique<PlantedOracleRouter>(cfg);
    case RouterKind::external: return std::make_unique<ExternalRouter>(cfg);
  }
  throw ValidationError("router: unknown router kind");
}

} // namespace semtree
