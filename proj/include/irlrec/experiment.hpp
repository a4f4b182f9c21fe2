#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "irlrec/baselines.hpp"
#include "irlrec/config.hpp"
#include "irlrec/graph.hpp"
#include "irlrec/metrics.hpp"
#include "irlrec/rerank.hpp"
#include "irlrec/retrieval.hpp"
#include "irlrec/train.hpp"

namespace irlrec {

// One trainable cell of the method matrix.
struct TrainVariant {
  std::string model = "mlp";           // mlp | linear
  std::string objective = "listwise";  // listwise | pointwise
  bool graph_features = true;
  double l2 = 0.0;

  std::string tag() const;
};

struct RerankOutcome {
  std::string provider;
  double alpha = 0.0;
  GateDecision gate;
  MethodMetrics metrics;
  MethodMetrics irl_metrics;
  int fallback_parse_failures = 0;
  int fallback_provider_errors = 0;
  int repaired_responses = 0;
  int users_helped = 0;  // diagnostics vs. the IRL-only rank
  int users_hurt = 0;
  std::string report_path;
};

// Lazily materializes pipeline stages in memory and persists artifacts under
// <output_dir>/<stage>-<config_hash>/. Same config + inputs always produce
// byte-identical artifacts.
class Experiment {
 public:
  explicit Experiment(ExperimentConfig cfg);

  const ExperimentConfig& config() const { return cfg_; }
  const std::string& hash() const { return hash_; }

  const RawData& raw();
  const FilteredDataset& dataset();
  const Split& split();
  const HeteroGraph& graph();
  const TfIdfIndex& text_index();
  const RetrievalIndex& retrieval();
  const FeatureAssembler& assembler(bool graph_features);

  nlohmann::json cmd_prepare();
  nlohmann::json cmd_build_graph();
  // Calibration sweep: one row per threshold with node/edge counts.
  nlohmann::json graph_sweep(int threshold_lo, int threshold_hi);

  TrainVariant config_variant() const;
  // Trains (or loads an existing checkpoint for) one variant.
  TrainResult cmd_train(const TrainVariant& variant);

  // Methods: random | popularity | supervised | irl-linear | irl-mlp | irl.
  // supervised / irl-linear / irl-mlp are pinned to the base feature set;
  // irl is the config-selected pipeline variant.
  std::map<std::string, MethodMetrics> cmd_evaluate(
      const std::vector<std::string>& methods);

  RerankOutcome cmd_rerank(const std::string& provider_name);
  // Returns alpha* and writes the grid report.
  double cmd_tune_alpha(const std::string& provider_name);

  nlohmann::json cmd_ablations();

  void dump_features(const std::string& stage, const std::string& path);

  std::string stage_dir(const std::string& stage);
  std::string manifest_path();
  void update_manifest(const std::string& section, const nlohmann::json& data);

 private:
  struct ProviderRun {
    double alpha = 0.0;
    GateDecision gate;
    std::vector<FusionCase> val_cases;
  };

  struct RerankCases {
    std::vector<RerankTask> tasks;
    std::vector<FusionCase> cases;
    std::vector<UserId> users;
  };

  // Shortlists, prompts and fusion inputs for every case of one eval stage.
  RerankCases build_rerank_cases(const EvalFeatures& evals,
                                 const RewardModel& model);

  TrainConfig variant_train_config(const TrainVariant& v) const;
  // Raw (unstandardized) features, cached per (stage, layout).
  const EvalFeatures& eval_features(const std::string& stage,
                                    bool graph_features);
  ProviderConfig resolve_provider(const std::string& name) const;
  ProviderRun run_validation_fusion(const ProviderConfig& pc,
                                    const RewardModel& model);
  std::vector<std::string> collect_responses(
      const ProviderConfig& pc, Provider& provider, ResponseCache* cache,
      const std::vector<RerankTask>& tasks);
  void write_metrics_csv(const MethodMetrics& m, const std::string& path);
  void write_report(const std::vector<MethodMetrics>& rows,
                    const std::string& reference, const std::string& path);

  ExperimentConfig cfg_;
  std::string hash_;
  std::optional<RawData> raw_;
  std::optional<FilteredDataset> dataset_;
  std::optional<Split> split_;
  std::optional<HeteroGraph> graph_;
  std::optional<TfIdfIndex> index_;
  std::optional<RetrievalIndex> retrieval_;
  std::unique_ptr<FeatureAssembler> assembler_base_;
  std::unique_ptr<FeatureAssembler> assembler_full_;
  // Raw eval features per (stage, layout); standardized copies are built per
  // model on demand.
  std::map<std::string, std::unique_ptr<EvalFeatures>> eval_cache_;
};

}  // namespace irlrec
