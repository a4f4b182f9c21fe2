#include "irlrec/rerank.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "irlrec/text_index.hpp"

namespace irlrec {

using json = nlohmann::json;

namespace {

std::string format_share(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string join(const std::vector<std::string>& parts, const char* sep) {
  std::string out;
  for (const std::string& p : parts) {
    if (!out.empty()) out += sep;
    out += p;
  }
  return out;
}

constexpr int kPromptTopCategories = 5;
constexpr int kPromptTopTags = 5;

}  // namespace

std::string build_prompt(const PromptInputs& in) {
  std::string p;
  p += "You are ranking recommendation candidates for one user.\n\n";
  if (!in.plain) {
    p += "## User persona\n";
    if (in.top_categories.empty() && in.recent_titles.empty()) {
      p += "This user has no interaction history yet.\n";
    } else {
      if (!in.top_categories.empty()) {
        p += "Top category preferences:\n";
        for (const auto& [label, share] : in.top_categories)
          p += "- " + label + " (" + format_share(share) + ")\n";
      }
      if (!in.recent_titles.empty()) {
        p += "Recently liked (most recent first):\n";
        for (const std::string& title : in.recent_titles)
          p += "- " + title + "\n";
      }
    }
    p += "\n## Community context\n";
    p += "Fraction of the user's nearest neighbours who liked each "
         "candidate:\n";
    for (const PromptCandidate& c : in.candidates)
      p += "- candidate " + std::to_string(c.index) + ": " +
           format_share(c.support) + "\n";
    p += "\n";
  }
  p += "## Candidates\n";
  for (const PromptCandidate& c : in.candidates) {
    p += std::to_string(c.index) + ". " + c.title;
    if (!c.categories.empty()) p += " (" + join(c.categories, ", ") + ")";
    if (!c.top_tags.empty()) p += " [tags: " + join(c.top_tags, ", ") + "]";
    p += "\n";
  }
  if (!in.plain) {
    p += "\n## Ranker confidence\n";
    for (const PromptCandidate& c : in.candidates)
      p += "- candidate " + std::to_string(c.index) + ": " +
           confidence_label(c.confidence) + "\n";
  }
  p += "\n## Instruction\n";
  p += "Rank ALL " + std::to_string(in.candidates.size()) +
       " candidates from most to least relevant for this user. Respond with "
       "the candidate numbers only, comma-separated, best first, exactly one "
       "line, e.g. 2, 5, 1, ...\n";
  return p;
}

PromptInputs make_prompt_inputs(
    const UserProfile& profile, const HeteroGraph& graph,
    const std::unordered_map<ItemId, ItemMeta>& items,
    const ScoredShortlist& shortlist, const CommunitySignalIndex& signals,
    bool plain) {
  if (shortlist.entries.empty())
    throw UsageError("make_prompt_inputs: empty shortlist");
  PromptInputs in;
  in.plain = plain;

  std::vector<std::pair<std::string, double>> cats;
  for (Eigen::Index i = 0; i < profile.category_distribution.size(); ++i)
    if (profile.category_distribution[i] > 0.0)
      cats.emplace_back(graph.category_nodes[static_cast<std::size_t>(i)],
                        profile.category_distribution[i]);
  std::sort(cats.begin(), cats.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (static_cast<int>(cats.size()) > kPromptTopCategories)
    cats.resize(kPromptTopCategories);
  in.top_categories = std::move(cats);

  for (auto it = profile.recent.rbegin(); it != profile.recent.rend(); ++it) {
    auto meta = items.find(it->item);
    in.recent_titles.push_back(meta != items.end() && !meta->second.title.empty()
                                   ? meta->second.title
                                   : "item " + std::to_string(it->item));
  }

  for (const ShortlistEntry& e : shortlist.entries) {
    PromptCandidate c;
    c.index = e.rank;
    c.item = e.item;
    c.confidence = e.confidence;
    c.support = signals.support(e.item);
    auto meta = items.find(e.item);
    if (meta != items.end()) {
      c.title = meta->second.title;
      c.categories = meta->second.categories;
      std::map<std::string, int> normalized;
      for (const auto& [tag, count] : meta->second.tags) {
        const std::string norm = normalize_tag(tag);
        if (!norm.empty()) normalized[norm] += count;
      }
      std::vector<std::pair<std::string, int>> ranked(normalized.begin(),
                                                      normalized.end());
      std::sort(ranked.begin(), ranked.end(),
                [](const auto& a, const auto& b) {
                  if (a.second != b.second) return a.second > b.second;
                  return a.first < b.first;
                });
      for (std::size_t i = 0;
           i < ranked.size() && i < static_cast<std::size_t>(kPromptTopTags);
           ++i)
        c.top_tags.push_back(ranked[i].first);
    }
    if (c.title.empty()) c.title = "item " + std::to_string(e.item);
    in.candidates.push_back(std::move(c));
  }
  return in;
}

void ProviderConfig::validate() const {
  if (temperature != 0.0)
    throw UsageError("provider " + name + ": temperature must be 0");
  if (kind != "http" && kind != "mock-oracle" && kind != "mock-adversary" &&
      kind != "replay")
    throw UsageError("provider " + name + ": unknown kind '" + kind + "'");
  if (kind == "http" && endpoint.empty())
    throw UsageError("provider " + name + ": http provider needs an endpoint");
  if (kind == "replay" && cache_path.empty())
    throw UsageError("provider " + name + ": replay provider needs a cache");
  if (timeout_s <= 0 || retries < 0 || concurrency < 1)
    throw UsageError("provider " + name + ": bad timeout/retries/concurrency");
}

ResponseCache::ResponseCache(const std::string& path) : path_(path) {
  std::ifstream in(path);
  if (!in) return;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json rec = json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.contains("prompt_hash") ||
        !rec.contains("raw_response"))
      continue;
    entries_[rec["prompt_hash"].get<std::string>()] =
        rec["raw_response"].get<std::string>();
  }
}

std::optional<std::string> ResponseCache::lookup(const std::string& key) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void ResponseCache::insert(const std::string& key,
                           const std::string& response) {
  std::lock_guard<std::mutex> lock(mu_);
  if (entries_.count(key)) return;
  entries_.emplace(key, response);
  std::ofstream out(path_, std::ios::app);
  if (!out) throw DataError("cannot append to response cache: " + path_);
  json rec;
  rec["prompt_hash"] = key;
  rec["raw_response"] = response;
  rec["timestamp"] = static_cast<std::int64_t>(
      std::chrono::duration_cast<std::chrono::seconds>(
          std::chrono::system_clock::now().time_since_epoch())
          .count());
  out << rec.dump() << "\n";
}

std::string ResponseCache::make_key(const std::string& provider,
                                    const std::string& model,
                                    const std::string& prompt) {
  return hash_hex(fnv1a64(prompt, fnv1a64(model, fnv1a64(provider))));
}

namespace {

std::string render_order(const std::vector<int>& order) {
  std::string out;
  for (int idx : order) {
    if (!out.empty()) out += ", ";
    out += std::to_string(idx);
  }
  return out;
}

class OracleProvider : public Provider {
 public:
  std::string name() const override { return "mock-oracle"; }
  std::string complete(const RerankTask& task) override {
    std::vector<int> order;
    if (task.positive_index && *task.positive_index >= 1 &&
        *task.positive_index <= task.n)
      order.push_back(*task.positive_index);
    for (int i = 1; i <= task.n; ++i)
      if (order.empty() || i != order.front()) order.push_back(i);
    return render_order(order);
  }
};

class AdversaryProvider : public Provider {
 public:
  std::string name() const override { return "mock-adversary"; }
  std::string complete(const RerankTask& task) override {
    std::vector<int> order;
    for (int i = task.n; i >= 1; --i) order.push_back(i);
    return render_order(order);
  }
};

class ReplayProvider : public Provider {
 public:
  ReplayProvider(const ProviderConfig& cfg, ResponseCache* cache)
      : cfg_(cfg), cache_(cache) {}
  std::string name() const override { return cfg_.name; }
  std::string complete(const RerankTask& task) override {
    const std::string key =
        ResponseCache::make_key(cfg_.name, cfg_.model, task.prompt);
    auto hit = cache_->lookup(key);
    if (!hit)
      throw ProviderError("replay provider: no cached response for key " +
                          key);
    return *hit;
  }

 private:
  ProviderConfig cfg_;
  ResponseCache* cache_;
};

}  // namespace

std::unique_ptr<Provider> make_http_provider(const ProviderConfig& cfg);

std::unique_ptr<Provider> make_provider(const ProviderConfig& cfg,
                                        ResponseCache* replay_cache) {
  cfg.validate();
  if (cfg.kind == "mock-oracle") return std::make_unique<OracleProvider>();
  if (cfg.kind == "mock-adversary")
    return std::make_unique<AdversaryProvider>();
  if (cfg.kind == "replay") {
    if (!replay_cache)
      throw UsageError("replay provider requires an opened cache");
    return std::make_unique<ReplayProvider>(cfg, replay_cache);
  }
  return make_http_provider(cfg);
}

std::string query_provider(Provider& provider, const ProviderConfig& cfg,
                           ResponseCache* cache, const RerankTask& task) {
  const std::string key =
      ResponseCache::make_key(cfg.name, cfg.model, task.prompt);
  if (cache) {
    if (auto hit = cache->lookup(key)) return *hit;
  }
  const std::string response = provider.complete(task);
  if (cache) cache->insert(key, response);
  return response;
}

RankedResponse parse_ranking(const std::string& raw, int n) {
  RankedResponse out;
  std::vector<bool> seen(static_cast<std::size_t>(n) + 1, false);
  bool repaired = false;
  long long value = 0;
  bool in_number = false;
  bool overlong = false;
  auto flush = [&] {
    if (!in_number) return;
    in_number = false;
    if (overlong || value < 1 || value > n) {
      overlong = false;
      repaired = true;  // unknown id dropped
      value = 0;
      return;
    }
    if (seen[static_cast<std::size_t>(value)]) {
      repaired = true;  // duplicate keeps first occurrence
    } else {
      seen[static_cast<std::size_t>(value)] = true;
      out.order.push_back(static_cast<int>(value));
    }
    value = 0;
  };
  for (char ch : raw) {
    if (ch >= '0' && ch <= '9') {
      in_number = true;
      if (value > 1000000000LL)
        overlong = true;
      else
        value = value * 10 + (ch - '0');
    } else {
      flush();
    }
  }
  flush();

  if (out.order.empty()) {
    for (int i = 1; i <= n; ++i) out.order.push_back(i);
    out.fallback_reason = "parse_failure";
    return out;
  }
  if (static_cast<int>(out.order.size()) < n) {
    repaired = true;
    for (int i = 1; i <= n; ++i)
      if (!seen[static_cast<std::size_t>(i)]) out.order.push_back(i);
  }
  if (repaired) out.fallback_reason = "repaired";
  return out;
}

std::vector<ItemId> fuse(const std::unordered_map<ItemId, int>& llm_ranks,
                         const std::unordered_map<ItemId, int>& irl_ranks,
                         double alpha) {
  if (alpha < 0.0 || alpha > 1.0)
    throw UsageError("fuse: alpha must be in [0, 1]");
  if (llm_ranks.size() != irl_ranks.size())
    throw UsageError("fuse: rank maps cover different id sets");
  struct Row {
    ItemId item;
    double score;
    int irl;
  };
  std::vector<Row> rows;
  rows.reserve(irl_ranks.size());
  for (const auto& [item, irl] : irl_ranks) {
    auto it = llm_ranks.find(item);
    if (it == llm_ranks.end())
      throw UsageError("fuse: item missing from LLM ranks: " +
                       std::to_string(item));
    rows.push_back({item, alpha * it->second + (1.0 - alpha) * irl, irl});
  }
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    if (a.score != b.score) return a.score < b.score;
    if (a.irl != b.irl) return a.irl < b.irl;
    return a.item < b.item;
  });
  std::vector<ItemId> out;
  out.reserve(rows.size());
  for (const Row& r : rows) out.push_back(r.item);
  return out;
}

std::vector<ItemId> fuse_orders(const std::vector<ItemId>& irl_order,
                                const std::vector<ItemId>& llm_order,
                                double alpha) {
  std::unordered_map<ItemId, int> irl, llm;
  for (std::size_t i = 0; i < irl_order.size(); ++i)
    irl[irl_order[i]] = static_cast<int>(i) + 1;
  for (std::size_t i = 0; i < llm_order.size(); ++i)
    llm[llm_order[i]] = static_cast<int>(i) + 1;
  if (irl.size() != irl_order.size() || llm.size() != llm_order.size())
    throw UsageError("fuse_orders: duplicate ids in an ordering");
  return fuse(llm, irl, alpha);
}

int fused_rank_of_positive(const FusionCase& c, double alpha) {
  const std::size_t n = c.irl_shortlist.size();
  bool in_shortlist = false;
  for (ItemId id : c.irl_shortlist)
    if (id == c.positive) in_shortlist = true;
  if (!in_shortlist) return c.positive_full_irl_rank;
  const std::vector<ItemId> fused =
      fuse_orders(c.irl_shortlist, c.llm_order, alpha);
  for (std::size_t i = 0; i < n; ++i)
    if (fused[i] == c.positive) return static_cast<int>(i) + 1;
  throw NumericError("fused ordering lost the positive item");
}

double mean_fused_ndcg10(const std::vector<FusionCase>& cases, double alpha) {
  double total = 0.0;
  for (const FusionCase& c : cases) {
    const int rank = fused_rank_of_positive(c, alpha);
    total += rank <= 10 ? 1.0 / std::log2(static_cast<double>(rank) + 1.0)
                        : 0.0;
  }
  return total / static_cast<double>(cases.size());
}

double tune_alpha(const std::vector<FusionCase>& validation_cases) {
  if (validation_cases.empty())
    throw DataError("tune_alpha: empty validation set");
  double best_alpha = 0.0;
  double best = -1.0;
  for (int step = 0; step <= 10; ++step) {
    const double alpha = static_cast<double>(step) / 10.0;
    const double score = mean_fused_ndcg10(validation_cases, alpha);
    if (score > best) {
      best = score;
      best_alpha = alpha;
    }
  }
  return best_alpha;
}

GateDecision boost_only_gate(bool enabled, double irl_val_ndcg10,
                             double fused_val_ndcg10) {
  GateDecision d;
  d.enabled = enabled;
  d.irl_val_ndcg10 = irl_val_ndcg10;
  d.fused_val_ndcg10 = fused_val_ndcg10;
  d.fusion_applied = !enabled || fused_val_ndcg10 >= irl_val_ndcg10;
  return d;
}

}  // namespace irlrec
