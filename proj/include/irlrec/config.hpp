#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "irlrec/dataset.hpp"
#include "irlrec/rerank.hpp"
#include "irlrec/train.hpp"

namespace irlrec {

struct GraphConfig {
  int min_concept_freq = 5;
  int top_tags = 10;
  // positive_items: graph nodes are items with >= 1 positive interaction;
  // all_items: every retained item becomes a node.
  std::string item_scope = "positive_items";
  // applications | items (see ConceptFrequency).
  std::string concept_freq_metric = "applications";
};

struct RetrievalConfig {
  int k_recent = 10;
  int m = 50;
  bool community_cache = false;
};

struct FeatureConfig {
  bool graph_features = true;
};

struct EvalConfig {
  int n_neg = 99;
  double supervised_l2 = 1e-4;
};

struct ShortlistConfig {
  int n = 20;
};

struct FusionConfig {
  bool gate = false;
  std::string prompt = "persona";  // persona | plain
  double alpha = -1.0;             // < 0: tune on validation
};

// Single declarative experiment description; hashable, embedded verbatim in
// every output manifest. output_dir and jobs do not affect results and are
// excluded from the hash.
struct ExperimentConfig {
  DatasetConfig dataset;
  GraphConfig graph;
  RetrievalConfig retrieval;
  FeatureConfig features;
  TrainConfig train;
  EvalConfig eval;
  ShortlistConfig shortlist;
  FusionConfig fusion;
  std::vector<ProviderConfig> providers;
  std::string output_dir = "out";
  std::uint64_t seed = 42;
  int jobs = 4;

  const ProviderConfig& provider(const std::string& name) const;
  std::string hash() const;  // 16 hex chars over the canonical dump
};

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::string& path);

// Key-by-key documentation of every config field and its default.
std::string config_reference();

}  // namespace irlrec
