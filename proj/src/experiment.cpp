#include "irlrec/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

namespace irlrec {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// Rank of the positive (candidates[0]) under a model, over the full set.
int model_rank(const RewardModel& model, const EvalCase& ec) {
  Mat phi = ec.phi;
  model.standardizer.apply(phi);
  return rank_of_positive(model.rewards(phi), ec.candidates, 0);
}

std::string format_metric(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << content;
}

std::string file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return "missing";
  std::uint64_t h = kFnvOffset;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0)
    h = fnv1a64(std::string_view(buf, static_cast<std::size_t>(in.gcount())),
                h);
  return hash_hex(h);
}

}  // namespace

std::string TrainVariant::tag() const {
  return model + "-" + objective + "-" + (graph_features ? "full" : "base");
}

Experiment::Experiment(ExperimentConfig cfg)
    : cfg_(std::move(cfg)), hash_(cfg_.hash()) {}

const RawData& Experiment::raw() {
  if (!raw_) raw_ = load_interactions(cfg_.dataset);
  return *raw_;
}

const FilteredDataset& Experiment::dataset() {
  if (!dataset_) {
    const RawData& r = raw();
    dataset_ = filter_dataset(r, cfg_.dataset.min_user_interactions,
                              cfg_.dataset.min_item_interactions,
                              cfg_.dataset.min_user_positives,
                              cfg_.dataset.positive,
                              cfg_.dataset.filter_mode == "fixpoint"
                                  ? FilterMode::fixpoint
                                  : FilterMode::single_pass);
  }
  return *dataset_;
}

const Split& Experiment::split() {
  if (!split_) split_ = split_leave_last_two(dataset());
  return *split_;
}

namespace {

ConceptFrequency freq_metric(const GraphConfig& g) {
  return g.concept_freq_metric == "items" ? ConceptFrequency::items
                                          : ConceptFrequency::applications;
}

}  // namespace

const HeteroGraph& Experiment::graph() {
  if (!graph_) {
    const FilteredDataset& data = dataset();
    if (cfg_.graph.item_scope == "all_items") {
      graph_ = build_graph(data.items, cfg_.graph.min_concept_freq,
                           freq_metric(cfg_.graph));
    } else {
      std::unordered_map<ItemId, ItemMeta> scoped;
      for (const auto& [user, items] : data.positive_sets)
        for (ItemId id : items)
          if (!scoped.count(id)) scoped.emplace(id, data.items.at(id));
      graph_ = build_graph(scoped, cfg_.graph.min_concept_freq,
                           freq_metric(cfg_.graph));
    }
  }
  return *graph_;
}

const TfIdfIndex& Experiment::text_index() {
  if (!index_) {
    std::map<ItemId, std::string> documents;
    for (ItemId id : dataset().item_ids)
      documents.emplace(
          id, item_document(dataset().items.at(id), cfg_.graph.top_tags));
    index_ = build_text_index(documents);
  }
  return *index_;
}

const RetrievalIndex& Experiment::retrieval() {
  if (!retrieval_) {
    if (cfg_.retrieval.community_cache) {
      const std::string path = stage_dir("retrieval") + "/communities.tsv";
      retrieval_ = build_retrieval_index(dataset(), split(), graph(),
                                         cfg_.retrieval.k_recent,
                                         cfg_.retrieval.m, false);
      if (!load_communities(path, *retrieval_)) {
        for (UserId user : dataset().user_ids)
          retrieval_->communities.emplace(
              user, find_community(user, retrieval_->train_profiles.at(user),
                                   retrieval_->profile_refs, cfg_.retrieval.m));
        save_communities(*retrieval_, path);
      }
    } else {
      retrieval_ = build_retrieval_index(dataset(), split(), graph(),
                                         cfg_.retrieval.k_recent,
                                         cfg_.retrieval.m);
    }
  }
  return *retrieval_;
}

const FeatureAssembler& Experiment::assembler(bool graph_features) {
  auto& slot = graph_features ? assembler_full_ : assembler_base_;
  if (!slot) {
    FeatureLayout layout;
    layout.n_categories = static_cast<int>(graph().category_nodes.size());
    layout.graph_features = graph_features;
    slot = std::make_unique<FeatureAssembler>(dataset(), graph(), text_index(),
                                              layout);
  }
  return *slot;
}

std::string Experiment::stage_dir(const std::string& stage) {
  const std::string dir =
      cfg_.output_dir + "/" + stage + "-" + hash_.substr(0, 12);
  fs::create_directories(dir);
  return dir;
}

std::string Experiment::manifest_path() {
  fs::create_directories(cfg_.output_dir);
  return cfg_.output_dir + "/experiment_manifest_" + hash_.substr(0, 12) +
         ".json";
}

void Experiment::update_manifest(const std::string& section,
                                 const json& data) {
  json manifest;
  {
    std::ifstream in(manifest_path());
    if (in) {
      manifest = json::parse(in, nullptr, false);
      if (manifest.is_discarded()) manifest = json::object();
    }
  }
  manifest["config"] = config_to_json(cfg_);
  manifest["config_hash"] = hash_;
  manifest["seed"] = cfg_.seed;
  manifest[section] = data;
  write_text(manifest_path(), manifest.dump(2) + "\n");
}

json Experiment::cmd_prepare() {
  const FilteredDataset& data = dataset();
  const Split& s = split();
  const std::string dir = stage_dir("prepare");

  json stats;
  stats["config_hash"] = hash_;
  stats["interactions"] = data.interactions.size();
  stats["users"] = data.user_ids.size();
  stats["items"] = data.item_ids.size();
  stats["positives"] = data.n_positive;
  stats["split_users"] = s.users.size();
  stats["split_excluded_users"] = s.excluded_users;
  stats["dataset_hashes"] = {
      {"ratings", file_hash(cfg_.dataset.ratings_path)},
      {"movies", file_hash(cfg_.dataset.movies_path)},
      {"tags", cfg_.dataset.tags_path.empty()
                   ? "none"
                   : file_hash(cfg_.dataset.tags_path)}};
  write_text(dir + "/stats.json", stats.dump(2) + "\n");

  std::string split_tsv = "user\ttrain_size\tval_item\tval_ts\ttest_item\ttest_ts\n";
  for (UserId u : s.users) {
    const UserSplit& us = s.by_user.at(u);
    split_tsv += std::to_string(u) + "\t" + std::to_string(us.train.size()) +
                 "\t" + std::to_string(us.val.item) + "\t" +
                 std::to_string(us.val.timestamp) + "\t" +
                 std::to_string(us.test.item) + "\t" +
                 std::to_string(us.test.timestamp) + "\n";
  }
  write_text(dir + "/split.tsv", split_tsv);

  for (const std::string stage : {"val", "test"}) {
    std::string tsv = "user\tpositive\tnegatives\n";
    const std::string tag = stage == std::string("val") ? "eval-val" : "eval-test";
    for (UserId u : s.users) {
      const UserSplit& us = s.by_user.at(u);
      const ItemId target = stage == std::string("val") ? us.val.item : us.test.item;
      const CandidateSet cs = sample_candidates(
          data, u, target, cfg_.eval.n_neg,
          derive_seed(cfg_.seed, tag, static_cast<std::uint64_t>(u)));
      tsv += std::to_string(u) + "\t" + std::to_string(cs.positive) + "\t";
      for (std::size_t i = 0; i < cs.negatives.size(); ++i) {
        if (i) tsv += ' ';
        tsv += std::to_string(cs.negatives[i]);
      }
      tsv += "\n";
    }
    write_text(dir + "/candidates_" + stage + ".tsv", tsv);
  }
  update_manifest("prepare", stats);
  return stats;
}

json Experiment::cmd_build_graph() {
  const HeteroGraph& g = graph();
  const std::string dir = stage_dir("graph");
  save_graph(g, dir + "/graph.tsv");
  json stats;
  stats["config_hash"] = hash_;
  stats["item_nodes"] = g.item_nodes.size();
  stats["category_nodes"] = g.category_nodes.size();
  stats["concept_nodes"] = g.concept_nodes.size();
  stats["nodes_total"] = g.n_nodes();
  stats["edges_item_category"] = g.n_item_category_edges;
  stats["edges_item_concept"] = g.n_item_concept_edges;
  stats["edges_item_item"] = g.item_item_edges.size();
  stats["edges_total"] = g.n_edges();
  stats["min_concept_freq"] = g.min_concept_freq;
  stats["text_index_terms"] = text_index().vocabulary.size();
  stats["text_index_documents"] = text_index().doc_vectors.size();
  write_text(dir + "/graph_stats.json", stats.dump(2) + "\n");
  update_manifest("graph", stats);
  return stats;
}

json Experiment::graph_sweep(int threshold_lo, int threshold_hi) {
  const FilteredDataset& data = dataset();
  std::unordered_map<ItemId, ItemMeta> scoped;
  if (cfg_.graph.item_scope == "all_items") {
    scoped = data.items;
  } else {
    for (const auto& [user, items] : data.positive_sets)
      for (ItemId id : items)
        if (!scoped.count(id)) scoped.emplace(id, data.items.at(id));
  }
  json rows = json::array();
  for (int t = threshold_lo; t <= threshold_hi; ++t) {
    const HeteroGraph g = build_graph(scoped, t, freq_metric(cfg_.graph));
    rows.push_back({{"threshold", t},
                    {"concept_nodes", g.concept_nodes.size()},
                    {"nodes_total", g.n_nodes()},
                    {"edges_item_item", g.item_item_edges.size()},
                    {"edges_total", g.n_edges()}});
  }
  return rows;
}

TrainVariant Experiment::config_variant() const {
  TrainVariant v;
  v.model = cfg_.train.model;
  v.objective = cfg_.train.objective;
  v.graph_features = cfg_.features.graph_features;
  v.l2 = cfg_.train.objective == "pointwise" ? cfg_.eval.supervised_l2
                                             : cfg_.train.l2;
  return v;
}

TrainConfig Experiment::variant_train_config(const TrainVariant& v) const {
  TrainConfig tc = cfg_.train;
  tc.model = v.model;
  tc.objective = v.objective;
  tc.l2 = v.l2;
  if (v.objective == "pointwise" && tc.grad_norm_stop <= 0.0)
    tc.grad_norm_stop = 1e-6;
  tc.eval_n_neg = cfg_.eval.n_neg;
  tc.master_seed = cfg_.seed;
  return tc;
}

TrainResult Experiment::cmd_train(const TrainVariant& variant) {
  const std::string dir = stage_dir("train");
  const std::string ckpt = dir + "/model-" + variant.tag() + ".ckpt";
  if (fs::exists(ckpt)) {
    TrainResult r;
    std::string stored_hash;
    r.model = load_model(ckpt, &stored_hash);
    if (stored_hash == hash_) {
      r.stop_reason = "loaded";
      return r;
    }
  }
  Trainer trainer(dataset(), split(), retrieval(),
                  assembler(variant.graph_features),
                  variant_train_config(variant));
  TrainResult result = trainer.train();
  save_model(result.model, ckpt, hash_);
  save_train_log(result.log, dir + "/train_log-" + variant.tag() + ".csv");
  json summary;
  summary["variant"] = variant.tag();
  summary["epochs"] = result.log.size();
  summary["best_epoch"] = result.best_epoch;
  summary["best_val_ndcg10"] = result.best_val_ndcg10;
  summary["stop_reason"] = result.stop_reason;
  update_manifest("train_" + variant.tag(), summary);
  return result;
}

const EvalFeatures& Experiment::eval_features(const std::string& stage,
                                              bool graph_features) {
  const std::string key = stage + (graph_features ? "/full" : "/base");
  auto it = eval_cache_.find(key);
  if (it == eval_cache_.end()) {
    auto features = std::make_unique<EvalFeatures>(
        dataset(), split(), retrieval(), assembler(graph_features), stage,
        cfg_.eval.n_neg, cfg_.seed);
    it = eval_cache_.emplace(key, std::move(features)).first;
  }
  return *it->second;
}

void Experiment::write_metrics_csv(const MethodMetrics& m,
                                   const std::string& path) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "method,users,hr5,ndcg5,hr10,ndcg10,mrr,recall_at_n,"
                "shortlist_n,config_hash\n"
                "%s,%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%s\n",
                m.method.c_str(), m.n_users, m.mean.hr5, m.mean.ndcg5,
                m.mean.hr10, m.mean.ndcg10, m.mean.mrr, m.shortlist_recall,
                m.shortlist_n, hash_.c_str());
  write_text(path, buf);
}

void Experiment::write_report(const std::vector<MethodMetrics>& rows,
                              const std::string& reference,
                              const std::string& path) {
  const MethodMetrics* ref = nullptr;
  for (const MethodMetrics& m : rows)
    if (m.method == reference) ref = &m;
  std::string out = "ranking report  config " + hash_ + "\n";
  out += "users: " + std::to_string(rows.empty() ? 0 : rows[0].n_users) + "\n\n";
  char line[256];
  std::snprintf(line, sizeof(line), "%-22s %7s %7s %7s %7s %7s %10s %9s\n",
                "method", "HR@5", "N@5", "HR@10", "N@10", "MRR", "dN@10(%)",
                "recall@N");
  out += line;
  for (const MethodMetrics& m : rows) {
    std::string delta = "-";
    if (ref && ref->method != m.method && ref->mean.ndcg10 > 0.0) {
      char d[32];
      std::snprintf(d, sizeof(d), "%+.1f",
                    100.0 * (m.mean.ndcg10 - ref->mean.ndcg10) /
                        ref->mean.ndcg10);
      delta = d;
    }
    std::string recall = m.shortlist_recall >= 0.0
                             ? format_metric(m.shortlist_recall)
                             : std::string("-");
    std::snprintf(line, sizeof(line),
                  "%-22s %7.4f %7.4f %7.4f %7.4f %7.4f %10s %9s\n",
                  m.method.c_str(), m.mean.hr5, m.mean.ndcg5, m.mean.hr10,
                  m.mean.ndcg10, m.mean.mrr, delta.c_str(), recall.c_str());
    out += line;
  }
  if (ref) out += "\ndelta reference: " + reference + "\n";
  write_text(path, out);
}

std::map<std::string, MethodMetrics> Experiment::cmd_evaluate(
    const std::vector<std::string>& methods) {
  const FilteredDataset& data = dataset();
  const Split& s = split();
  const std::string dir = stage_dir("eval");
  std::map<std::string, MethodMetrics> results;
  std::vector<MethodMetrics> rows;

  const auto popularity = training_popularity(data, s);
  const int n_shortlist = cfg_.shortlist.n;

  for (const std::string& method : methods) {
    std::unordered_map<UserId, int> ranks;
    int shortlist_n = 0;
    if (method == "random" || method == "popularity") {
      for (UserId u : s.users) {
        const UserSplit& us = s.by_user.at(u);
        const CandidateSet cs = sample_candidates(
            data, u, us.test.item, cfg_.eval.n_neg,
            derive_seed(cfg_.seed, "eval-test", static_cast<std::uint64_t>(u)));
        const std::vector<ItemId> ids = cs.candidates();
        const std::vector<ItemId> ordering =
            method == "random"
                ? random_ordering(ids, derive_seed(cfg_.seed, "random-baseline",
                                                   static_cast<std::uint64_t>(u)))
                : popularity_ordering(ids, popularity);
        ranks[u] = rank_in_ordering(ordering, us.test.item);
      }
    } else {
      TrainVariant v;
      if (method == "supervised") {
        v.model = "linear";
        v.objective = "pointwise";
        v.graph_features = false;
        v.l2 = cfg_.eval.supervised_l2;
      } else if (method == "irl-linear") {
        v.model = "linear";
        v.objective = "listwise";
        v.graph_features = false;
      } else if (method == "irl-mlp") {
        v.model = "mlp";
        v.objective = "listwise";
        v.graph_features = false;
      } else if (method == "irl") {
        v = config_variant();
      } else {
        throw UsageError("unknown evaluation method '" + method + "'");
      }
      const TrainResult trained = cmd_train(v);
      const EvalFeatures& test = eval_features("test", v.graph_features);
      for (const EvalCase& ec : test.cases())
        ranks[ec.user] = model_rank(trained.model, ec);
      shortlist_n = n_shortlist;
    }
    MethodMetrics m = evaluate(method, s.users, ranks, shortlist_n);
    // Recall ceiling invariant: a hit inside the cutoff implies a hit inside
    // the shortlist.
    if (shortlist_n >= 10 && m.mean.hr10 > m.shortlist_recall + 1e-12)
      throw NumericError("shortlist recall ceiling violated for " + method);
    results.emplace(method, m);
    rows.push_back(m);
    write_metrics_csv(m, dir + "/metrics_" + method + ".csv");
  }

  const std::string reference =
      results.count("supervised") ? "supervised" : methods.front();
  write_report(rows, reference, dir + "/report.txt");

  json summary;
  for (const MethodMetrics& m : rows)
    summary[m.method] = {{"hr5", m.mean.hr5},     {"ndcg5", m.mean.ndcg5},
                         {"hr10", m.mean.hr10},   {"ndcg10", m.mean.ndcg10},
                         {"mrr", m.mean.mrr},     {"users", m.n_users},
                         {"recall_at_n", m.shortlist_recall}};
  update_manifest("evaluate", summary);
  return results;
}

json Experiment::cmd_ablations() {
  struct Cell {
    const char* label;
    TrainVariant variant;
  };
  const double sl2 = cfg_.eval.supervised_l2;
  const std::vector<Cell> cells = {
      {"full", {"mlp", "listwise", true, 0.0}},
      {"-graph_features", {"mlp", "listwise", false, 0.0}},
      {"-nonlinear_reward", {"linear", "listwise", true, 0.0}},
      {"-listwise_objective", {"linear", "pointwise", true, sl2}},
      {"-both_supervised", {"linear", "pointwise", false, sl2}},
  };
  const Split& s = split();
  std::map<std::string, MethodMetrics> by_label;
  for (const Cell& cell : cells) {
    const TrainResult trained = cmd_train(cell.variant);
    const EvalFeatures& test =
        eval_features("test", cell.variant.graph_features);
    std::unordered_map<UserId, int> ranks;
    for (const EvalCase& ec : test.cases())
      ranks[ec.user] = model_rank(trained.model, ec);
    by_label.emplace(cell.label,
                     evaluate(cell.label, s.users, ranks, cfg_.shortlist.n));
  }

  json out;
  json table = json::array();
  for (const Cell& cell : cells) {
    const MethodMetrics& m = by_label.at(cell.label);
    table.push_back({{"configuration", cell.label},
                     {"hr10", m.mean.hr10},
                     {"ndcg10", m.mean.ndcg10}});
  }
  out["table"] = table;

  const double full = by_label.at("full").mean.ndcg10;
  const double mlp_base = by_label.at("-graph_features").mean.ndcg10;
  const double sup_full = by_label.at("-listwise_objective").mean.ndcg10;
  const double sup_base = by_label.at("-both_supervised").mean.ndcg10;
  const double gain_irl = mlp_base - sup_base;
  const double gain_graph = sup_full - sup_base;
  const double gain_combined = full - sup_base;
  out["superadditivity"] = {
      {"gain_irl", gain_irl},
      {"gain_graph", gain_graph},
      {"gain_combined", gain_combined},
      {"synergy", gain_combined - gain_irl - gain_graph},
      {"superadditive", gain_combined > gain_irl + gain_graph}};

  const std::string dir = stage_dir("eval");
  write_text(dir + "/ablations.json", out.dump(2) + "\n");
  std::vector<MethodMetrics> rows;
  for (const Cell& cell : cells) rows.push_back(by_label.at(cell.label));
  write_report(rows, "-both_supervised", dir + "/ablations.txt");
  update_manifest("ablations", out);
  return out;
}

ProviderConfig Experiment::resolve_provider(const std::string& name) const {
  for (const ProviderConfig& p : cfg_.providers)
    if (p.name == name) return p;
  if (name == "mock-oracle" || name == "mock-adversary") {
    ProviderConfig pc;
    pc.name = name;
    pc.kind = name;
    return pc;
  }
  throw UsageError("no provider named '" + name + "' in config");
}

std::vector<std::string> Experiment::collect_responses(
    const ProviderConfig& pc, Provider& provider, ResponseCache* cache,
    const std::vector<RerankTask>& tasks) {
  std::vector<std::string> responses(tasks.size());
  std::vector<char> failed(tasks.size(), 0);
  const int workers =
      std::max(1, std::min({pc.concurrency, cfg_.jobs,
                            static_cast<int>(tasks.size())}));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) break;
      try {
        responses[i] = query_provider(provider, pc, cache, tasks[i]);
      } catch (const ProviderError&) {
        failed[i] = 1;
      }
    }
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  for (std::size_t i = 0; i < tasks.size(); ++i)
    if (failed[i]) responses[i] = "";  // provider_error sentinel
  return responses;
}

Experiment::RerankCases Experiment::build_rerank_cases(
    const EvalFeatures& evals, const RewardModel& model) {
  RerankCases out;
  const bool plain = cfg_.fusion.prompt == "plain";
  for (const EvalCase& ec : evals.cases()) {
    Mat phi = ec.phi;
    model.standardizer.apply(phi);
    const Vec scores = model.rewards(phi);
    const ScoredShortlist sl =
        shortlist(scores, ec.candidates, cfg_.shortlist.n);
    FusionCase fc;
    fc.positive = ec.candidates[0];
    fc.positive_full_irl_rank = rank_of_positive(scores, ec.candidates, 0);
    for (const ShortlistEntry& e : sl.entries)
      fc.irl_shortlist.push_back(e.item);

    StateBuilder state(dataset().positives.at(ec.user), graph(), text_index(),
                       dataset().items, cfg_.retrieval.k_recent);
    state.advance_to(ec.timestamp);
    const CommunitySignalIndex signals = retrieval().signal_index(ec.user);
    const PromptInputs inputs =
        make_prompt_inputs(state.profile_snapshot(), graph(), dataset().items,
                           sl, signals, plain);
    RerankTask task;
    task.prompt = build_prompt(inputs);
    task.n = static_cast<int>(sl.entries.size());
    for (int i = 0; i < task.n; ++i)
      if (sl.entries[static_cast<std::size_t>(i)].item == fc.positive)
        task.positive_index = i + 1;
    out.tasks.push_back(std::move(task));
    out.cases.push_back(std::move(fc));
    out.users.push_back(ec.user);
  }
  return out;
}

namespace {

// Maps a parsed (or fallen-back) response onto shortlist item ids.
void apply_response(const RankedResponse& parsed, FusionCase& fc) {
  if (parsed.order.empty()) {
    fc.llm_order = fc.irl_shortlist;
    return;
  }
  for (int idx : parsed.order)
    fc.llm_order.push_back(fc.irl_shortlist[static_cast<std::size_t>(idx - 1)]);
}

}  // namespace

Experiment::ProviderRun Experiment::run_validation_fusion(
    const ProviderConfig& pc, const RewardModel& model) {
  ProviderRun run;
  const bool graph_feats = config_variant().graph_features;

  std::unique_ptr<ResponseCache> cache;
  if (!pc.cache_path.empty())
    cache = std::make_unique<ResponseCache>(pc.cache_path);
  std::unique_ptr<Provider> provider = make_provider(pc, cache.get());

  RerankCases rc = build_rerank_cases(eval_features("val", graph_feats), model);
  const std::vector<std::string> responses =
      collect_responses(pc, *provider, cache.get(), rc.tasks);
  for (std::size_t i = 0; i < rc.cases.size(); ++i) {
    const RankedResponse parsed =
        responses[i].empty()
            ? RankedResponse{std::vector<int>{}, "provider_error"}
            : parse_ranking(responses[i], rc.tasks[i].n);
    apply_response(parsed, rc.cases[i]);
  }
  std::vector<FusionCase> cases = std::move(rc.cases);

  run.alpha = cfg_.fusion.alpha >= 0.0 ? cfg_.fusion.alpha : tune_alpha(cases);
  const double irl_val = mean_fused_ndcg10(cases, 0.0);
  const double fused_val = mean_fused_ndcg10(cases, run.alpha);
  run.gate = boost_only_gate(cfg_.fusion.gate, irl_val, fused_val);
  run.val_cases = std::move(cases);
  return run;
}

double Experiment::cmd_tune_alpha(const std::string& provider_name) {
  const ProviderConfig pc = resolve_provider(provider_name);
  const TrainResult trained = cmd_train(config_variant());
  const ProviderRun run = run_validation_fusion(pc, trained.model);

  json grid = json::array();
  for (int step = 0; step <= 10; ++step) {
    const double alpha = static_cast<double>(step) / 10.0;
    grid.push_back({{"alpha", alpha},
                    {"val_ndcg10", mean_fused_ndcg10(run.val_cases, alpha)}});
  }
  json out;
  out["provider"] = pc.name;
  out["alpha_star"] = run.alpha;
  out["grid"] = grid;
  const std::string dir = stage_dir("rerank");
  write_text(dir + "/alpha_grid-" + pc.name + ".json", out.dump(2) + "\n");
  update_manifest("alpha_" + pc.name, out);
  return run.alpha;
}

RerankOutcome Experiment::cmd_rerank(const std::string& provider_name) {
  const ProviderConfig pc = resolve_provider(provider_name);
  const TrainResult trained = cmd_train(config_variant());
  const RewardModel& model = trained.model;
  const ProviderRun run = run_validation_fusion(pc, model);

  const bool graph_feats = config_variant().graph_features;
  const Split& s = split();

  std::unique_ptr<ResponseCache> cache;
  if (!pc.cache_path.empty())
    cache = std::make_unique<ResponseCache>(pc.cache_path);
  std::unique_ptr<Provider> provider = make_provider(pc, cache.get());

  RerankCases rc =
      build_rerank_cases(eval_features("test", graph_feats), model);
  const std::vector<std::string> responses =
      collect_responses(pc, *provider, cache.get(), rc.tasks);

  RerankOutcome out;
  out.provider = pc.name;
  out.alpha = run.alpha;
  out.gate = run.gate;
  const double alpha_eff = run.gate.fusion_applied ? run.alpha : 0.0;

  std::unordered_map<UserId, int> fused_ranks;
  std::unordered_map<UserId, int> irl_ranks;
  std::string report;
  for (std::size_t i = 0; i < rc.cases.size(); ++i) {
    FusionCase& fc = rc.cases[i];
    std::optional<std::string> fallback;
    RankedResponse parsed;
    if (responses[i].empty()) {
      parsed.order.clear();
      fallback = "provider_error";
      ++out.fallback_provider_errors;
    } else {
      parsed = parse_ranking(responses[i], rc.tasks[i].n);
      fallback = parsed.fallback_reason;
      if (fallback == std::optional<std::string>("parse_failure"))
        ++out.fallback_parse_failures;
      else if (fallback == std::optional<std::string>("repaired"))
        ++out.repaired_responses;
    }
    apply_response(parsed, fc);
    const UserId user = rc.users[i];
    const int irl_rank = fc.positive_full_irl_rank;
    const int fused_rank = fused_rank_of_positive(fc, alpha_eff);
    irl_ranks[user] = irl_rank;
    fused_ranks[user] = fused_rank;
    if (fused_rank < irl_rank) ++out.users_helped;
    if (fused_rank > irl_rank) ++out.users_hurt;

    json rec;
    rec["user"] = user;
    rec["shortlist"] = fc.irl_shortlist;
    rec["llm_order"] = fc.llm_order;
    if (fallback) rec["fallback_reason"] = *fallback;
    rec["fused_order"] = fuse_orders(fc.irl_shortlist, fc.llm_order, alpha_eff);
    rec["positive_rank_irl"] = irl_rank;
    rec["positive_rank_fused"] = fused_rank;
    report += rec.dump() + "\n";
  }

  out.metrics = evaluate("rerank-" + pc.name, s.users, fused_ranks,
                         cfg_.shortlist.n);
  out.irl_metrics = evaluate("irl", s.users, irl_ranks, cfg_.shortlist.n);
  if (cfg_.shortlist.n >= 10 &&
      out.metrics.mean.hr10 > out.metrics.shortlist_recall + 1e-12)
    throw NumericError("rerank: shortlist recall ceiling violated");

  const std::string dir = stage_dir("rerank");
  out.report_path = dir + "/rerank_report-" + pc.name + ".jsonl";
  write_text(out.report_path, report);
  write_metrics_csv(out.metrics, dir + "/metrics_rerank-" + pc.name + ".csv");

  json summary;
  summary["provider"] = pc.name;
  summary["alpha_star"] = run.alpha;
  summary["gate_enabled"] = run.gate.enabled;
  summary["fusion_applied"] = run.gate.fusion_applied;
  summary["irl_val_ndcg10"] = run.gate.irl_val_ndcg10;
  summary["fused_val_ndcg10"] = run.gate.fused_val_ndcg10;
  summary["test_ndcg10"] = out.metrics.mean.ndcg10;
  summary["test_hr10"] = out.metrics.mean.hr10;
  summary["users_helped"] = out.users_helped;
  summary["users_hurt"] = out.users_hurt;
  summary["parse_failures"] = out.fallback_parse_failures;
  summary["provider_errors"] = out.fallback_provider_errors;
  summary["repaired_responses"] = out.repaired_responses;
  update_manifest("rerank_" + pc.name, summary);
  return out;
}

void Experiment::dump_features(const std::string& stage,
                               const std::string& path) {
  const bool graph_feats = cfg_.features.graph_features;
  const FeatureAssembler& fa = assembler(graph_feats);
  const int d = fa.layout().d();
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw DataError("cannot write feature dump: " + path);
  std::fprintf(f, "user\tstage\tstep\tcandidate\tlabel");
  for (int k = 0; k < d; ++k) std::fprintf(f, "\tf%d", k);
  std::fprintf(f, "\n");
  auto write_case = [&](UserId user, const char* tag, int step,
                        const std::vector<ItemId>& ids, const Mat& phi) {
    for (std::size_t c = 0; c < ids.size(); ++c) {
      std::fprintf(f, "%lld\t%s\t%d\t%lld\t%d", static_cast<long long>(user),
                   tag, step, static_cast<long long>(ids[c]), c == 0 ? 1 : 0);
      for (int k = 0; k < d; ++k)
        std::fprintf(f, "\t%.17g", phi(k, static_cast<Eigen::Index>(c)));
      std::fprintf(f, "\n");
    }
  };
  if (stage == "train") {
    Trainer trainer(dataset(), split(), retrieval(), fa,
                    variant_train_config(config_variant()));
    trainer.for_each_transition(
        0, [&](UserId user, int step, const std::vector<ItemId>& ids,
               Mat& phi) { write_case(user, "train", step, ids, phi); });
  } else {
    const EvalFeatures& features = eval_features(stage, graph_feats);
    for (const EvalCase& ec : features.cases())
      write_case(ec.user, stage.c_str(), 0, ec.candidates, ec.phi);
  }
  std::fclose(f);
}

}  // namespace irlrec
