#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "irlrec/common.hpp"
#include "irlrec/features.hpp"

namespace irlrec {

// Reward over standardized features: linear w'phi + b, or a two-layer MLP
// w2' relu(W1 phi + b1) + b2.
struct RewardModel {
  enum class Kind { linear, mlp };
  Kind kind = Kind::mlp;
  int d = 0;
  int h = 0;
  Vec w;   // linear
  double b = 0.0;
  Mat W1;  // h x d
  Vec b1;
  Vec w2;
  double b2 = 0.0;
  Standardizer standardizer;

  // Glorot-uniform weights (+-sqrt(6/(fan_in+fan_out))), zero biases.
  static RewardModel make_linear(int d, std::uint64_t seed);
  static RewardModel make_mlp(int d, int h, std::uint64_t seed);

  double reward(const Vec& phi) const;
  // Scores feature columns in one pass.
  Vec rewards(const Mat& phi_columns) const;
  std::size_t parameter_count() const;
};

struct RewardGrad {
  Vec w;
  double b = 0.0;
  Mat W1;
  Vec b1;
  Vec w2;
  double b2 = 0.0;

  static RewardGrad zeros_like(const RewardModel& m);
  void set_zero();
  void scale(double s);
  double squared_norm() const;
};

enum class Objective { listwise, pointwise };

// One training transition: candidate features as columns; the expert column
// index (listwise) doubles as the single positive label (pointwise).
struct Transition {
  Mat phi;  // d x |C|, standardized
  int expert = 0;
};

// Listwise negative log-likelihood: -log softmax(r)[expert].
double listwise_loss(const RewardModel& model,
                     const std::vector<Transition>& batch);

// Pointwise binary cross-entropy with labels 1[j == expert], averaged over
// the candidate set (plus 0.5*l2*||weights||^2 when l2 > 0; in batch form the
// penalty is added once per transition).
double pointwise_loss(const RewardModel& model,
                      const std::vector<Transition>& batch, double l2);

// Loss of one transition; accumulates parameter gradients into `grad`
// (caller zeroes). dL/dr = softmax(r) - onehot(expert) for listwise,
// (sigmoid(r) - y)/|C| for pointwise; both backpropagate identically.
double transition_grad(const RewardModel& model, const Mat& phi, int expert,
                       Objective objective, double l2, RewardGrad& grad);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Per-tensor first/second-moment state.
class Adam {
 public:
  Adam(const RewardModel& shape, const AdamConfig& cfg);
  void step(RewardModel& model, const RewardGrad& grad);

 private:
  AdamConfig cfg_;
  std::int64_t t_ = 0;
  RewardGrad m_;
  RewardGrad v_;
};

// Plain gradient-descent fallback (optimizer = "sgd").
void sgd_step(RewardModel& model, const RewardGrad& grad,
              double learning_rate);

enum class Confidence { high, medium, low };

struct ShortlistEntry {
  ItemId item = 0;
  double reward = 0.0;
  int rank = 0;  // 1-based
  Confidence confidence = Confidence::low;
};

// Reward-descending top-N (ties by ascending item id); rank terciles give
// the high/medium/low confidence labels.
struct ScoredShortlist {
  std::vector<ShortlistEntry> entries;
};

ScoredShortlist shortlist(const Vec& rewards, const std::vector<ItemId>& ids,
                          int n);

const char* confidence_label(Confidence c);

}  // namespace irlrec
