#pragma once

#include <functional>
#include <string>
#include <vector>

#include "irlrec/dataset.hpp"
#include "irlrec/features.hpp"
#include "irlrec/reward.hpp"
#include "irlrec/retrieval.hpp"

namespace irlrec {

struct TrainConfig {
  std::string model = "mlp";           // mlp | linear
  std::string objective = "listwise";  // listwise | pointwise
  std::string optimizer = "adam";      // adam | sgd
  int hidden = 64;
  double learning_rate = 1e-3;
  double l2 = 0.0;
  int max_epochs = 50;
  int patience = 5;
  int n_neg = 99;       // training candidate sets
  int eval_n_neg = 99;  // validation/test candidate sets
  int batch_size = 1;   // transitions per parameter update
  // When > 0, stop once the epoch-mean gradient norm falls below it
  // (convergence rule for the pointwise baseline).
  double grad_norm_stop = 0.0;
  std::uint64_t master_seed = 42;

  void validate() const;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double grad_norm = 0.0;
  double val_ndcg10 = 0.0;
  double val_hr10 = 0.0;
};

struct TrainResult {
  RewardModel model;  // best-validation parameters, standardizer attached
  std::vector<EpochLog> log;
  int best_epoch = -1;
  double best_val_ndcg10 = 0.0;
  std::string stop_reason;  // early_stop | converged | max_epochs
};

// One precomputed evaluation case: candidates()[0] is the positive.
struct EvalCase {
  UserId user = 0;
  std::int64_t timestamp = 0;
  std::vector<ItemId> candidates;
  Mat phi;  // d x |candidates|
};

// Fixed per-user candidate sets and feature matrices for the validation or
// test stage. Features are raw until standardize() is applied.
class EvalFeatures {
 public:
  EvalFeatures(const FilteredDataset& data, const Split& split,
               const RetrievalIndex& retrieval,
               const FeatureAssembler& assembler, const std::string& stage,
               int n_neg, std::uint64_t master_seed);

  void standardize(const Standardizer& s);
  const std::vector<EvalCase>& cases() const { return cases_; }

 private:
  std::vector<EvalCase> cases_;  // sorted by user id
  bool standardized_ = false;
};

// Streams training transitions in deterministic order (users ascending,
// steps chronological); candidate sets are resampled per epoch from
// per-(user, epoch, step) derived seeds.
class Trainer {
 public:
  Trainer(const FilteredDataset& data, const Split& split,
          const RetrievalIndex& retrieval, const FeatureAssembler& assembler,
          const TrainConfig& cfg);

  TrainResult train();

  // Visits every transition of one epoch with raw (unstandardized) features.
  using TransitionVisitor =
      std::function<void(UserId, int step, const std::vector<ItemId>&, Mat&)>;
  void for_each_transition(int epoch, const TransitionVisitor& visit);

  std::size_t transition_count() const;

 private:
  const FilteredDataset& data_;
  const Split& split_;
  const RetrievalIndex& retrieval_;
  const FeatureAssembler& assembler_;
  TrainConfig cfg_;
  std::unordered_map<UserId, std::vector<ItemId>> pools_;
};

// Mean NDCG@10 / HR@10 of the model over precomputed (standardized) cases.
struct ValScore {
  double ndcg10 = 0.0;
  double hr10 = 0.0;
};
ValScore score_eval_cases(const RewardModel& model, const EvalFeatures& evals);

// Versioned text checkpoint; hexfloat payload round-trips exactly.
void save_model(const RewardModel& model, const std::string& path,
                const std::string& config_hash);
RewardModel load_model(const std::string& path, std::string* config_hash = nullptr);

void save_train_log(const std::vector<EpochLog>& log, const std::string& path);

}  // namespace irlrec
