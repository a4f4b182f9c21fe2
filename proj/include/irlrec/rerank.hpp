#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "irlrec/dataset.hpp"
#include "irlrec/reward.hpp"
#include "irlrec/retrieval.hpp"

namespace irlrec {

struct PromptCandidate {
  int index = 0;  // prompt-local id, 1..N in IRL rank order
  ItemId item = 0;
  std::string title;
  std::vector<std::string> categories;
  std::vector<std::string> top_tags;
  double support = 0.0;
  Confidence confidence = Confidence::low;
};

struct PromptInputs {
  std::vector<std::pair<std::string, double>> top_categories;  // label, share
  std::vector<std::string> recent_titles;  // most recent first
  std::vector<PromptCandidate> candidates;
  bool plain = false;  // ablation: candidate details only
};

// Deterministic listwise re-ranking prompt. Plain mode omits the persona and
// community sections.
std::string build_prompt(const PromptInputs& in);

PromptInputs make_prompt_inputs(const UserProfile& profile,
                                const HeteroGraph& graph,
                                const std::unordered_map<ItemId, ItemMeta>& items,
                                const ScoredShortlist& shortlist,
                                const CommunitySignalIndex& signals,
                                bool plain);

struct ProviderConfig {
  std::string name = "mock-oracle";
  std::string kind = "mock-oracle";  // http | mock-oracle | mock-adversary | replay
  std::string endpoint;              // http: e.g. http://localhost:8080/v1/chat/completions
  std::string model;
  std::string auth_env;  // environment variable holding the bearer token
  double temperature = 0.0;
  int timeout_s = 30;
  int retries = 2;
  int concurrency = 4;
  std::string cache_path;

  void validate() const;
};

struct RerankTask {
  std::string prompt;
  int n = 0;                          // shortlist size
  std::optional<int> positive_index;  // 1..n when known (mocks only)
};

class Provider {
 public:
  virtual ~Provider() = default;
  virtual std::string name() const = 0;
  // Raw response text; throws ProviderError on unrecoverable failure.
  virtual std::string complete(const RerankTask& task) = 0;
};

// Append-only response cache, one JSON record per line:
// {"prompt_hash": ..., "raw_response": ..., "timestamp": ...}.
class ResponseCache {
 public:
  explicit ResponseCache(const std::string& path);
  std::optional<std::string> lookup(const std::string& key) const;
  void insert(const std::string& key, const std::string& response);
  static std::string make_key(const std::string& provider,
                              const std::string& model,
                              const std::string& prompt);

 private:
  std::string path_;
  std::unordered_map<std::string, std::string> entries_;
  mutable std::mutex mu_;
};

std::unique_ptr<Provider> make_provider(const ProviderConfig& cfg,
                                        ResponseCache* replay_cache = nullptr);

// Cache-through provider query; re-runs with a warm cache never touch the
// network.
std::string query_provider(Provider& provider, const ProviderConfig& cfg,
                           ResponseCache* cache, const RerankTask& task);

struct RankedResponse {
  std::vector<int> order;  // permutation of 1..n
  std::optional<std::string> fallback_reason;  // parse_failure | repaired |
                                               // provider_error
};

// Always returns a full permutation: unknown ids dropped, duplicates keep
// their first occurrence, missing ids appended in IRL order, unparseable
// text falls back to the IRL order.
RankedResponse parse_ranking(const std::string& raw, int n);

// Rank-level fusion: score = alpha*rank_llm + (1-alpha)*rank_irl, ascending,
// ties by IRL rank then item id. Both maps must cover the same ids.
std::vector<ItemId> fuse(const std::unordered_map<ItemId, int>& llm_ranks,
                         const std::unordered_map<ItemId, int>& irl_ranks,
                         double alpha);

// Convenience over a shortlist: `irl_order` positions give IRL ranks,
// `llm_order` lists the same ids in LLM preference order.
std::vector<ItemId> fuse_orders(const std::vector<ItemId>& irl_order,
                                const std::vector<ItemId>& llm_order,
                                double alpha);

// One user's fused-evaluation inputs. The positive may sit outside the
// shortlist, in which case its full-ordering IRL rank is unaffected by
// fusion.
struct FusionCase {
  std::vector<ItemId> irl_shortlist;  // IRL rank order
  std::vector<ItemId> llm_order;      // permutation of irl_shortlist
  ItemId positive = 0;
  int positive_full_irl_rank = 0;  // 1-based rank in the full candidate list
};

int fused_rank_of_positive(const FusionCase& c, double alpha);

// Mean NDCG@10 over the grid {0.0, 0.1, ..., 1.0}; ties take the smallest
// alpha. Throws DataError on an empty validation set.
double tune_alpha(const std::vector<FusionCase>& validation_cases);

double mean_fused_ndcg10(const std::vector<FusionCase>& cases, double alpha);

struct GateDecision {
  bool enabled = false;
  bool fusion_applied = true;
  double irl_val_ndcg10 = 0.0;
  double fused_val_ndcg10 = 0.0;
};

// Boost-only constraint: with the gate enabled, fusion is applied at test
// time only if it does not hurt validation NDCG@10.
GateDecision boost_only_gate(bool enabled, double irl_val_ndcg10,
                             double fused_val_ndcg10);

}  // namespace irlrec
