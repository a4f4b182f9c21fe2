#include "irlrec/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "irlrec/metrics.hpp"

namespace irlrec {

void TrainConfig::validate() const {
  if (model != "mlp" && model != "linear")
    throw UsageError("train: model must be mlp or linear");
  if (objective != "listwise" && objective != "pointwise")
    throw UsageError("train: objective must be listwise or pointwise");
  if (optimizer != "adam" && optimizer != "sgd")
    throw UsageError("train: optimizer must be adam or sgd");
  if (hidden < 1 || learning_rate <= 0.0 || max_epochs < 1 || n_neg < 1 ||
      eval_n_neg < 1 || batch_size < 1 || patience < 0 || l2 < 0.0)
    throw UsageError("train: hyperparameters out of range");
}

EvalFeatures::EvalFeatures(const FilteredDataset& data, const Split& split,
                           const RetrievalIndex& retrieval,
                           const FeatureAssembler& assembler,
                           const std::string& stage, int n_neg,
                           std::uint64_t master_seed) {
  if (stage != "val" && stage != "test")
    throw UsageError("EvalFeatures: stage must be val or test");
  const bool is_val = stage == "val";
  const std::string seed_tag = is_val ? "eval-val" : "eval-test";
  cases_.reserve(split.users.size());
  for (UserId user : split.users) {
    const UserSplit& s = split.by_user.at(user);
    const PositiveEvent& target = is_val ? s.val : s.test;
    const std::vector<PositiveEvent>& trajectory = data.positives.at(user);
    StateBuilder state(trajectory, assembler.graph(), assembler.text_index(),
                       data.items, retrieval.k_recent);
    state.advance_to(target.timestamp);
    const CandidateSet cs = sample_candidates(
        data, user, target.item, n_neg,
        derive_seed(master_seed, seed_tag, static_cast<std::uint64_t>(user)));
    EvalCase ec;
    ec.user = user;
    ec.timestamp = target.timestamp;
    ec.candidates = cs.candidates();
    const CommunitySignalIndex signals = retrieval.signal_index(user);
    assembler.assemble_set(state, user, target.timestamp, ec.candidates,
                           signals, ec.phi);
    cases_.push_back(std::move(ec));
  }
}

void EvalFeatures::standardize(const Standardizer& s) {
  if (standardized_) throw UsageError("EvalFeatures: already standardized");
  for (EvalCase& ec : cases_) s.apply(ec.phi);
  standardized_ = true;
}

ValScore score_eval_cases(const RewardModel& model,
                          const EvalFeatures& evals) {
  ValScore out;
  if (evals.cases().empty()) return out;
  for (const EvalCase& ec : evals.cases()) {
    const Vec scores = model.rewards(ec.phi);
    const int rank = rank_of_positive(scores, ec.candidates, 0);
    out.ndcg10 += ndcg_at(rank, 10);
    out.hr10 += hr_at(rank, 10);
  }
  const double n = static_cast<double>(evals.cases().size());
  out.ndcg10 /= n;
  out.hr10 /= n;
  return out;
}

Trainer::Trainer(const FilteredDataset& data, const Split& split,
                 const RetrievalIndex& retrieval,
                 const FeatureAssembler& assembler, const TrainConfig& cfg)
    : data_(data),
      split_(split),
      retrieval_(retrieval),
      assembler_(assembler),
      cfg_(cfg) {
  cfg_.validate();
}

std::size_t Trainer::transition_count() const {
  std::size_t n = 0;
  for (UserId user : split_.users) n += split_.by_user.at(user).train.size();
  return n;
}

void Trainer::for_each_transition(int epoch, const TransitionVisitor& visit) {
  Mat phi;
  for (UserId user : split_.users) {
    const UserSplit& s = split_.by_user.at(user);
    auto pool_it = pools_.find(user);
    if (pool_it == pools_.end())
      pool_it = pools_.emplace(user, data_.eligible_negatives(user)).first;
    const CommunitySignalIndex signals = retrieval_.signal_index(user);
    StateBuilder state(data_.positives.at(user), assembler_.graph(),
                       assembler_.text_index(), data_.items,
                       retrieval_.k_recent);
    for (std::size_t step = 0; step < s.train.size(); ++step) {
      const PositiveEvent& expert = s.train[step];
      state.advance_to(expert.timestamp);
      const CandidateSet cs = sample_from_pool(
          pool_it->second, expert.item, cfg_.n_neg,
          derive_seed(cfg_.master_seed, "train-cand",
                      static_cast<std::uint64_t>(user),
                      static_cast<std::uint64_t>(epoch),
                      static_cast<std::uint64_t>(step)));
      const std::vector<ItemId> ids = cs.candidates();
      assembler_.assemble_set(state, user, expert.timestamp, ids, signals,
                              phi);
      visit(user, static_cast<int>(step), ids, phi);
    }
  }
}

TrainResult Trainer::train() {
  const int d = assembler_.layout().d();

  // Standardizer statistics from the epoch-0 training transitions.
  StandardizerAccumulator acc(d);
  for_each_transition(0, [&](UserId, int, const std::vector<ItemId>&,
                             Mat& phi) { acc.add_columns(phi); });
  const Standardizer standardizer = acc.finish();

  RewardModel model =
      cfg_.model == "linear"
          ? RewardModel::make_linear(d, derive_seed(cfg_.master_seed, "init"))
          : RewardModel::make_mlp(d, cfg_.hidden,
                                  derive_seed(cfg_.master_seed, "init"));
  const Objective objective = cfg_.objective == "listwise"
                                  ? Objective::listwise
                                  : Objective::pointwise;

  EvalFeatures val(data_, split_, retrieval_, assembler_, "val",
                   cfg_.eval_n_neg, cfg_.master_seed);
  val.standardize(standardizer);

  Adam adam(model, AdamConfig{cfg_.learning_rate});
  RewardGrad grad = RewardGrad::zeros_like(model);
  const std::size_t n_transitions = transition_count();
  if (n_transitions == 0) throw DataError("train: no training transitions");

  TrainResult result;
  RewardModel best = model;
  double best_ndcg = -1.0;
  int since_best = 0;

  for (int epoch = 0; epoch < cfg_.max_epochs; ++epoch) {
    double loss_sum = 0.0;
    double grad_norm_sum = 0.0;
    std::size_t n_updates = 0;
    int in_batch = 0;
    grad.set_zero();

    for_each_transition(epoch, [&](UserId user, int step,
                                   const std::vector<ItemId>&, Mat& phi) {
      standardizer.apply(phi);
      const double loss =
          transition_grad(model, phi, 0, objective, cfg_.l2, grad);
      if (!std::isfinite(loss))
        throw NumericError("non-finite loss at epoch " +
                           std::to_string(epoch) + ", user " +
                           std::to_string(user) + ", step " +
                           std::to_string(step));
      loss_sum += loss;
      if (++in_batch == cfg_.batch_size) {
        grad.scale(1.0 / static_cast<double>(in_batch));
        grad_norm_sum += std::sqrt(grad.squared_norm());
        ++n_updates;
        if (cfg_.optimizer == "adam")
          adam.step(model, grad);
        else
          sgd_step(model, grad, cfg_.learning_rate);
        grad.set_zero();
        in_batch = 0;
      }
    });
    if (in_batch > 0) {
      grad.scale(1.0 / static_cast<double>(in_batch));
      grad_norm_sum += std::sqrt(grad.squared_norm());
      ++n_updates;
      if (cfg_.optimizer == "adam")
        adam.step(model, grad);
      else
        sgd_step(model, grad, cfg_.learning_rate);
      grad.set_zero();
    }

    model.standardizer = standardizer;
    const ValScore score = score_eval_cases(model, val);
    EpochLog row;
    row.epoch = epoch;
    row.train_loss = loss_sum / static_cast<double>(n_transitions);
    row.grad_norm = grad_norm_sum / static_cast<double>(n_updates);
    row.val_ndcg10 = score.ndcg10;
    row.val_hr10 = score.hr10;
    result.log.push_back(row);

    if (score.ndcg10 > best_ndcg) {
      best_ndcg = score.ndcg10;
      best = model;
      result.best_epoch = epoch;
      since_best = 0;
    } else {
      ++since_best;
    }
    if (since_best > cfg_.patience) {
      result.stop_reason = "early_stop";
      break;
    }
    if (cfg_.grad_norm_stop > 0.0 && row.grad_norm < cfg_.grad_norm_stop) {
      result.stop_reason = "converged";
      break;
    }
  }
  if (result.stop_reason.empty()) result.stop_reason = "max_epochs";

  result.model = std::move(best);
  result.model.standardizer = standardizer;
  result.best_val_ndcg10 = best_ndcg;
  return result;
}

namespace {

void write_vec(std::FILE* f, const char* tag, const Vec& v) {
  std::fprintf(f, "%s %lld", tag, static_cast<long long>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) std::fprintf(f, " %a", v[i]);
  std::fprintf(f, "\n");
}

Vec read_vec(std::ifstream& in, const std::string& tag) {
  std::string got;
  in >> got;
  if (got != tag) throw DataError("model checkpoint: expected " + tag);
  Eigen::Index n = 0;
  in >> n;
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    std::string tok;
    in >> tok;
    v[i] = std::strtod(tok.c_str(), nullptr);
  }
  return v;
}

}  // namespace

void save_model(const RewardModel& model, const std::string& path,
                const std::string& config_hash) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw DataError("cannot write model checkpoint: " + path);
  const bool linear = model.kind == RewardModel::Kind::linear;
  std::fprintf(f, "irlrec-model v1\n");
  std::fprintf(f, "kind %s\n", linear ? "linear" : "mlp");
  std::fprintf(f, "dims %d %d\n", model.d, model.h);
  std::fprintf(f, "config %s\n", config_hash.c_str());
  write_vec(f, "mean", model.standardizer.mean);
  write_vec(f, "sigma", model.standardizer.sigma);
  if (linear) {
    write_vec(f, "w", model.w);
    std::fprintf(f, "b %a\n", model.b);
  } else {
    for (int i = 0; i < model.h; ++i) {
      Vec row = model.W1.row(i);
      write_vec(f, "W1", row);
    }
    write_vec(f, "b1", model.b1);
    write_vec(f, "w2", model.w2);
    std::fprintf(f, "b2 %a\n", model.b2);
  }
  std::fclose(f);
}

RewardModel load_model(const std::string& path, std::string* config_hash) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model checkpoint: " + path);
  std::string magic, version;
  in >> magic >> version;
  if (magic != "irlrec-model" || version != "v1")
    throw DataError(path + ": not a model checkpoint");
  std::string tag, kind;
  in >> tag >> kind;
  RewardModel model;
  model.kind =
      kind == "linear" ? RewardModel::Kind::linear : RewardModel::Kind::mlp;
  in >> tag >> model.d >> model.h;
  std::string hash;
  in >> tag >> hash;
  if (config_hash) *config_hash = hash;
  model.standardizer.mean = read_vec(in, "mean");
  model.standardizer.sigma = read_vec(in, "sigma");
  std::string tok;
  if (model.kind == RewardModel::Kind::linear) {
    model.w = read_vec(in, "w");
    in >> tag >> tok;
    model.b = std::strtod(tok.c_str(), nullptr);
  } else {
    model.W1.resize(model.h, model.d);
    for (int i = 0; i < model.h; ++i) model.W1.row(i) = read_vec(in, "W1");
    model.b1 = read_vec(in, "b1");
    model.w2 = read_vec(in, "w2");
    in >> tag >> tok;
    model.b2 = std::strtod(tok.c_str(), nullptr);
  }
  return model;
}

void save_train_log(const std::vector<EpochLog>& log,
                    const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw DataError("cannot write training log: " + path);
  std::fprintf(f, "epoch,train_loss,grad_norm,val_ndcg10,val_hr10\n");
  for (const EpochLog& row : log)
    std::fprintf(f, "%d,%.17g,%.17g,%.17g,%.17g\n", row.epoch, row.train_loss,
                 row.grad_norm, row.val_ndcg10, row.val_hr10);
  std::fclose(f);
}

}  // namespace irlrec
