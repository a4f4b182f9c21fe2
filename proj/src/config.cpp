#include "irlrec/config.hpp"

#include <fstream>

namespace irlrec {

using json = nlohmann::json;

namespace {

template <typename T>
void get_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void get_char(const json& j, const char* key, char& out) {
  if (!j.contains(key)) return;
  const std::string s = j.at(key).get<std::string>();
  if (s.size() != 1)
    throw UsageError(std::string("config: ") + key +
                     " must be a single character");
  out = s[0];
}

PositivePredicate predicate_from_json(const json& j) {
  PositivePredicate p;
  std::string type = "rating_threshold";
  get_if(j, "type", type);
  if (type == "rating_threshold")
    p.kind = PositivePredicate::Kind::rating_threshold;
  else if (type == "signal_equals")
    p.kind = PositivePredicate::Kind::signal_equals;
  else
    throw UsageError("config: unknown positive predicate type '" + type + "'");
  get_if(j, "value", p.value);
  return p;
}

json predicate_to_json(const PositivePredicate& p) {
  return {{"type", p.kind == PositivePredicate::Kind::rating_threshold
                       ? "rating_threshold"
                       : "signal_equals"},
          {"value", p.value}};
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig cfg;
  if (j.contains("dataset")) {
    const json& d = j.at("dataset");
    std::string format = "movielens";
    get_if(d, "format", format);
    if (format == "movielens")
      cfg.dataset.format = DatasetConfig::Format::movielens;
    else if (format == "generic")
      cfg.dataset.format = DatasetConfig::Format::generic;
    else
      throw UsageError("config: unknown dataset format '" + format + "'");
    get_if(d, "ratings", cfg.dataset.ratings_path);
    get_if(d, "movies", cfg.dataset.movies_path);
    get_if(d, "tags", cfg.dataset.tags_path);
    get_if(d, "min_user_interactions", cfg.dataset.min_user_interactions);
    get_if(d, "min_item_interactions", cfg.dataset.min_item_interactions);
    get_if(d, "min_user_positives", cfg.dataset.min_user_positives);
    get_if(d, "filter_mode", cfg.dataset.filter_mode);
    if (cfg.dataset.filter_mode != "single_pass" &&
        cfg.dataset.filter_mode != "fixpoint")
      throw UsageError(
          "config: dataset.filter_mode must be single_pass or fixpoint");
    if (d.contains("positive"))
      cfg.dataset.positive = predicate_from_json(d.at("positive"));
    if (d.contains("columns")) {
      const json& c = d.at("columns");
      GenericColumns& cols = cfg.dataset.columns;
      get_if(c, "user", cols.user);
      get_if(c, "item", cols.item);
      get_if(c, "signal", cols.signal);
      get_if(c, "timestamp", cols.timestamp);
      get_if(c, "item_id", cols.item_id);
      get_if(c, "item_title", cols.item_title);
      get_if(c, "item_categories", cols.item_categories);
      get_char(c, "log_delimiter", cols.log_delimiter);
      get_char(c, "item_delimiter", cols.item_delimiter);
      get_char(c, "category_separator", cols.category_separator);
      get_if(c, "timestamp_scale", cols.timestamp_scale);
    }
  }
  if (j.contains("graph")) {
    const json& g = j.at("graph");
    get_if(g, "min_concept_freq", cfg.graph.min_concept_freq);
    get_if(g, "top_tags", cfg.graph.top_tags);
    get_if(g, "item_scope", cfg.graph.item_scope);
    get_if(g, "concept_freq_metric", cfg.graph.concept_freq_metric);
    if (cfg.graph.item_scope != "positive_items" &&
        cfg.graph.item_scope != "all_items")
      throw UsageError("config: graph.item_scope must be positive_items or "
                       "all_items");
    if (cfg.graph.concept_freq_metric != "applications" &&
        cfg.graph.concept_freq_metric != "items")
      throw UsageError("config: graph.concept_freq_metric must be "
                       "applications or items");
  }
  if (j.contains("retrieval")) {
    const json& r = j.at("retrieval");
    get_if(r, "k_recent", cfg.retrieval.k_recent);
    get_if(r, "m", cfg.retrieval.m);
    get_if(r, "community_cache", cfg.retrieval.community_cache);
  }
  if (j.contains("features"))
    get_if(j.at("features"), "graph_features", cfg.features.graph_features);
  if (j.contains("train")) {
    const json& t = j.at("train");
    get_if(t, "model", cfg.train.model);
    get_if(t, "objective", cfg.train.objective);
    get_if(t, "optimizer", cfg.train.optimizer);
    get_if(t, "hidden", cfg.train.hidden);
    get_if(t, "learning_rate", cfg.train.learning_rate);
    get_if(t, "l2", cfg.train.l2);
    get_if(t, "max_epochs", cfg.train.max_epochs);
    get_if(t, "patience", cfg.train.patience);
    get_if(t, "n_neg", cfg.train.n_neg);
    get_if(t, "batch_size", cfg.train.batch_size);
    get_if(t, "grad_norm_stop", cfg.train.grad_norm_stop);
  }
  if (j.contains("eval")) {
    get_if(j.at("eval"), "n_neg", cfg.eval.n_neg);
    get_if(j.at("eval"), "supervised_l2", cfg.eval.supervised_l2);
  }
  if (j.contains("shortlist")) get_if(j.at("shortlist"), "n", cfg.shortlist.n);
  if (j.contains("fusion")) {
    const json& f = j.at("fusion");
    get_if(f, "gate", cfg.fusion.gate);
    get_if(f, "prompt", cfg.fusion.prompt);
    get_if(f, "alpha", cfg.fusion.alpha);
    if (cfg.fusion.prompt != "persona" && cfg.fusion.prompt != "plain")
      throw UsageError("config: fusion.prompt must be persona or plain");
  }
  if (j.contains("providers")) {
    for (const json& p : j.at("providers")) {
      ProviderConfig pc;
      get_if(p, "name", pc.name);
      get_if(p, "kind", pc.kind);
      get_if(p, "endpoint", pc.endpoint);
      get_if(p, "model", pc.model);
      get_if(p, "auth_env", pc.auth_env);
      get_if(p, "temperature", pc.temperature);
      get_if(p, "timeout_s", pc.timeout_s);
      get_if(p, "retries", pc.retries);
      get_if(p, "concurrency", pc.concurrency);
      get_if(p, "cache_path", pc.cache_path);
      pc.validate();
      cfg.providers.push_back(std::move(pc));
    }
  }
  get_if(j, "output_dir", cfg.output_dir);
  get_if(j, "seed", cfg.seed);
  get_if(j, "jobs", cfg.jobs);
  cfg.train.eval_n_neg = cfg.eval.n_neg;
  cfg.train.master_seed = cfg.seed;
  cfg.train.validate();
  return cfg;
}

json config_to_json(const ExperimentConfig& cfg) {
  json j;
  json d;
  d["format"] = cfg.dataset.format == DatasetConfig::Format::movielens
                    ? "movielens"
                    : "generic";
  d["ratings"] = cfg.dataset.ratings_path;
  d["movies"] = cfg.dataset.movies_path;
  d["tags"] = cfg.dataset.tags_path;
  d["min_user_interactions"] = cfg.dataset.min_user_interactions;
  d["min_item_interactions"] = cfg.dataset.min_item_interactions;
  d["min_user_positives"] = cfg.dataset.min_user_positives;
  d["filter_mode"] = cfg.dataset.filter_mode;
  d["positive"] = predicate_to_json(cfg.dataset.positive);
  const GenericColumns& cols = cfg.dataset.columns;
  d["columns"] = {{"user", cols.user},
                  {"item", cols.item},
                  {"signal", cols.signal},
                  {"timestamp", cols.timestamp},
                  {"item_id", cols.item_id},
                  {"item_title", cols.item_title},
                  {"item_categories", cols.item_categories},
                  {"log_delimiter", std::string(1, cols.log_delimiter)},
                  {"item_delimiter", std::string(1, cols.item_delimiter)},
                  {"category_separator", std::string(1, cols.category_separator)},
                  {"timestamp_scale", cols.timestamp_scale}};
  j["dataset"] = d;
  j["graph"] = {{"min_concept_freq", cfg.graph.min_concept_freq},
                {"top_tags", cfg.graph.top_tags},
                {"item_scope", cfg.graph.item_scope},
                {"concept_freq_metric", cfg.graph.concept_freq_metric}};
  j["retrieval"] = {{"k_recent", cfg.retrieval.k_recent},
                    {"m", cfg.retrieval.m},
                    {"community_cache", cfg.retrieval.community_cache}};
  j["features"] = {{"graph_features", cfg.features.graph_features}};
  j["train"] = {{"model", cfg.train.model},
                {"objective", cfg.train.objective},
                {"optimizer", cfg.train.optimizer},
                {"hidden", cfg.train.hidden},
                {"learning_rate", cfg.train.learning_rate},
                {"l2", cfg.train.l2},
                {"max_epochs", cfg.train.max_epochs},
                {"patience", cfg.train.patience},
                {"n_neg", cfg.train.n_neg},
                {"batch_size", cfg.train.batch_size},
                {"grad_norm_stop", cfg.train.grad_norm_stop}};
  j["eval"] = {{"n_neg", cfg.eval.n_neg},
               {"supervised_l2", cfg.eval.supervised_l2}};
  j["shortlist"] = {{"n", cfg.shortlist.n}};
  j["fusion"] = {{"gate", cfg.fusion.gate},
                 {"prompt", cfg.fusion.prompt},
                 {"alpha", cfg.fusion.alpha}};
  json providers = json::array();
  for (const ProviderConfig& p : cfg.providers)
    providers.push_back({{"name", p.name},
                         {"kind", p.kind},
                         {"endpoint", p.endpoint},
                         {"model", p.model},
                         {"auth_env", p.auth_env},
                         {"temperature", p.temperature},
                         {"timeout_s", p.timeout_s},
                         {"retries", p.retries},
                         {"concurrency", p.concurrency},
                         {"cache_path", p.cache_path}});
  j["providers"] = providers;
  j["output_dir"] = cfg.output_dir;
  j["seed"] = cfg.seed;
  j["jobs"] = cfg.jobs;
  return j;
}

const ProviderConfig& ExperimentConfig::provider(
    const std::string& name) const {
  for (const ProviderConfig& p : providers)
    if (p.name == name) return p;
  throw UsageError("no provider named '" + name + "' in config");
}

std::string ExperimentConfig::hash() const {
  json j = config_to_json(*this);
  j.erase("output_dir");
  j.erase("jobs");
  return hash_hex(fnv1a64(j.dump()));
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file: " + path);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw UsageError("config is not valid JSON: " + path);
  return config_from_json(j);
}

std::string config_reference() {
  static const char* kReference = R"(Experiment config reference (JSON). Every key is optional; defaults shown.

dataset.format               movielens | generic            (movielens)
dataset.ratings              interaction log path           ("")
dataset.movies               item metadata path             ("")
dataset.tags                 tag file path, movielens only  ("")
dataset.min_user_interactions user activity floor           (20)
dataset.min_item_interactions item activity floor           (10)
dataset.min_user_positives   per-user positives floor       (3)
dataset.filter_mode          single_pass | fixpoint         (single_pass)
dataset.positive.type        rating_threshold | signal_equals (rating_threshold)
dataset.positive.value       threshold / signal value       (4.0)
dataset.columns.user         generic: user column           (user_id)
dataset.columns.item         generic: item column           (item_id)
dataset.columns.signal       generic: feedback column       (is_click)
dataset.columns.timestamp    generic: timestamp column      (time)
dataset.columns.item_id      generic: item-file id column   (item_id)
dataset.columns.item_title   generic: item-file title col   ("")
dataset.columns.item_categories generic: category column    ("")
dataset.columns.log_delimiter / item_delimiter / category_separator (",")
dataset.columns.timestamp_scale multiply timestamps into seconds (1.0)
graph.min_concept_freq       tag frequency floor for concepts (5)
graph.top_tags               tags per item document         (10)
graph.item_scope             positive_items | all_items     (positive_items)
graph.concept_freq_metric    applications | items           (applications)
retrieval.k_recent           recent-positives window K      (10)
retrieval.m                  community size M               (50)
retrieval.community_cache    persist/reuse top-M lists      (false)
features.graph_features      include the 4 graph features   (true)
train.model                  mlp | linear                   (mlp)
train.objective              listwise | pointwise           (listwise)
train.optimizer              adam | sgd                     (adam)
train.hidden                 MLP hidden width h             (64)
train.learning_rate                                         (0.001)
train.l2                     L2 weight penalty              (0.0)
train.max_epochs                                            (50)
train.patience               early-stopping patience        (5)
train.n_neg                  training negatives per set     (99)
train.batch_size             transitions per update         (1)
train.grad_norm_stop         stop when mean grad norm below (0 = off)
eval.n_neg                   evaluation negatives per set   (99)
eval.supervised_l2           L2 for the logistic baseline   (0.0001)
shortlist.n                  top-N passed to the re-ranker  (20)
fusion.gate                  boost-only gate on/off         (false)
fusion.prompt                persona | plain                (persona)
fusion.alpha                 fixed alpha; < 0 tunes on validation (-1.0)
providers[]                  name, kind (http | mock-oracle | mock-adversary |
                             replay), endpoint, model, auth_env, temperature
                             (must be 0), timeout_s (30), retries (2),
                             concurrency (4), cache_path
output_dir                   artifact root, excluded from hash (out)
seed                         master seed                    (42)
jobs                         worker bound, excluded from hash (4)
)";
  return kReference;
}

}  // namespace irlrec
