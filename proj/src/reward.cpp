#include "irlrec/reward.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace irlrec {
namespace {

void glorot_fill(Eigen::Ref<Mat> m, int fan_in, int fan_out,
                 std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      m(i, j) = bound * (2.0 * next_double(rng) - 1.0);
}

// Numerically safe log(1 + exp(x)).
double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

}  // namespace

RewardModel RewardModel::make_linear(int d, std::uint64_t seed) {
  RewardModel m;
  m.kind = Kind::linear;
  m.d = d;
  m.w.resize(d);
  std::mt19937_64 rng(seed);
  glorot_fill(m.w, d, 1, rng);
  m.b = 0.0;
  return m;
}

RewardModel RewardModel::make_mlp(int d, int h, std::uint64_t seed) {
  RewardModel m;
  m.kind = Kind::mlp;
  m.d = d;
  m.h = h;
  m.W1.resize(h, d);
  m.b1 = Vec::Zero(h);
  m.w2.resize(h);
  m.b2 = 0.0;
  std::mt19937_64 rng(seed);
  glorot_fill(m.W1, d, h, rng);
  glorot_fill(m.w2, h, 1, rng);
  return m;
}

double RewardModel::reward(const Vec& phi) const {
  if (phi.size() != d) throw UsageError("reward: feature size mismatch");
  if (kind == Kind::linear) return w.dot(phi) + b;
  return w2.dot((W1 * phi + b1).cwiseMax(0.0)) + b2;
}

Vec RewardModel::rewards(const Mat& phi_columns) const {
  if (phi_columns.rows() != d)
    throw UsageError("rewards: feature size mismatch");
  if (kind == Kind::linear)
    return (phi_columns.transpose() * w).array() + b;
  Mat hidden = ((W1 * phi_columns).colwise() + b1).cwiseMax(0.0);
  return (hidden.transpose() * w2).array() + b2;
}

std::size_t RewardModel::parameter_count() const {
  if (kind == Kind::linear) return static_cast<std::size_t>(d) + 1;
  return static_cast<std::size_t>(h) * d + h + h + 1;
}

RewardGrad RewardGrad::zeros_like(const RewardModel& m) {
  RewardGrad g;
  if (m.kind == RewardModel::Kind::linear) {
    g.w = Vec::Zero(m.d);
  } else {
    g.W1 = Mat::Zero(m.h, m.d);
    g.b1 = Vec::Zero(m.h);
    g.w2 = Vec::Zero(m.h);
  }
  return g;
}

void RewardGrad::set_zero() {
  w.setZero();
  b = 0.0;
  W1.setZero();
  b1.setZero();
  w2.setZero();
  b2 = 0.0;
}

void RewardGrad::scale(double s) {
  w *= s;
  b *= s;
  W1 *= s;
  b1 *= s;
  w2 *= s;
  b2 *= s;
}

double RewardGrad::squared_norm() const {
  return w.squaredNorm() + b * b + W1.squaredNorm() + b1.squaredNorm() +
         w2.squaredNorm() + b2 * b2;
}

namespace {

void check_expert(int expert, Eigen::Index n) {
  if (expert < 0 || expert >= n)
    throw UsageError("expert item missing from its candidate set");
}

}  // namespace

double listwise_loss(const RewardModel& model,
                     const std::vector<Transition>& batch) {
  double total = 0.0;
  for (const Transition& t : batch) {
    check_expert(t.expert, t.phi.cols());
    const Vec r = model.rewards(t.phi);
    total += logsumexp(r) - r[t.expert];
  }
  return total / static_cast<double>(batch.size());
}

double pointwise_loss(const RewardModel& model,
                      const std::vector<Transition>& batch, double l2) {
  double total = 0.0;
  for (const Transition& t : batch) {
    check_expert(t.expert, t.phi.cols());
    const Vec r = model.rewards(t.phi);
    double bce = 0.0;
    for (Eigen::Index j = 0; j < r.size(); ++j) {
      const double y = j == t.expert ? 1.0 : 0.0;
      bce += softplus(r[j]) - y * r[j];
    }
    total += bce / static_cast<double>(r.size());
  }
  double loss = total / static_cast<double>(batch.size());
  if (l2 > 0.0) {
    const double wsq = model.kind == RewardModel::Kind::linear
                           ? model.w.squaredNorm()
                           : model.W1.squaredNorm() + model.w2.squaredNorm();
    loss += 0.5 * l2 * wsq;
  }
  return loss;
}

double transition_grad(const RewardModel& model, const Mat& phi, int expert,
                       Objective objective, double l2, RewardGrad& grad) {
  const Eigen::Index n = phi.cols();
  check_expert(expert, n);
  Vec r(n);
  Mat hidden;  // h x n, post-ReLU (mlp only)
  if (model.kind == RewardModel::Kind::linear) {
    r = (phi.transpose() * model.w).array() + model.b;
  } else {
    hidden = ((model.W1 * phi).colwise() + model.b1).cwiseMax(0.0);
    r = (hidden.transpose() * model.w2).array() + model.b2;
  }

  double loss = 0.0;
  Vec dr(n);
  if (objective == Objective::listwise) {
    const Vec p = softmax(r);
    loss = logsumexp(r) - r[expert];
    dr = p;
    dr[expert] -= 1.0;
  } else {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double y = j == expert ? 1.0 : 0.0;
      loss += softplus(r[j]) - y * r[j];
      dr[j] = 1.0 / (1.0 + std::exp(-r[j])) - y;
    }
    const double inv = 1.0 / static_cast<double>(n);
    loss *= inv;
    dr *= inv;
  }

  if (model.kind == RewardModel::Kind::linear) {
    grad.w.noalias() += phi * dr;
    grad.b += dr.sum();
    if (l2 > 0.0) {
      grad.w += l2 * model.w;
      loss += 0.5 * l2 * model.w.squaredNorm();
    }
  } else {
    grad.w2.noalias() += hidden * dr;
    grad.b2 += dr.sum();
    Mat dz = model.w2 * dr.transpose();  // h x n
    dz = (hidden.array() > 0.0).select(dz, 0.0);
    grad.W1.noalias() += dz * phi.transpose();
    grad.b1.noalias() += dz.rowwise().sum();
    if (l2 > 0.0) {
      grad.W1 += l2 * model.W1;
      grad.w2 += l2 * model.w2;
      loss +=
          0.5 * l2 * (model.W1.squaredNorm() + model.w2.squaredNorm());
    }
  }
  return loss;
}

Adam::Adam(const RewardModel& shape, const AdamConfig& cfg)
    : cfg_(cfg),
      m_(RewardGrad::zeros_like(shape)),
      v_(RewardGrad::zeros_like(shape)) {}

namespace {

template <typename T>
void adam_tensor(T& p, const T& g, T& m, T& v, double lr, double bc1,
                 double bc2, const AdamConfig& cfg) {
  m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
  v = (cfg.beta2 * v.array() + (1.0 - cfg.beta2) * g.array().square()).matrix();
  p.array() -=
      lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + cfg.epsilon);
}

void adam_scalar(double& p, double g, double& m, double& v, double lr,
                 double bc1, double bc2, const AdamConfig& cfg) {
  m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
  v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
  p -= lr * (m / bc1) / (std::sqrt(v / bc2) + cfg.epsilon);
}

}  // namespace

void Adam::step(RewardModel& model, const RewardGrad& grad) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  const double lr = cfg_.learning_rate;
  if (model.kind == RewardModel::Kind::linear) {
    adam_tensor(model.w, grad.w, m_.w, v_.w, lr, bc1, bc2, cfg_);
    adam_scalar(model.b, grad.b, m_.b, v_.b, lr, bc1, bc2, cfg_);
  } else {
    adam_tensor(model.W1, grad.W1, m_.W1, v_.W1, lr, bc1, bc2, cfg_);
    adam_tensor(model.b1, grad.b1, m_.b1, v_.b1, lr, bc1, bc2, cfg_);
    adam_tensor(model.w2, grad.w2, m_.w2, v_.w2, lr, bc1, bc2, cfg_);
    adam_scalar(model.b2, grad.b2, m_.b2, v_.b2, lr, bc1, bc2, cfg_);
  }
}

void sgd_step(RewardModel& model, const RewardGrad& grad,
              double learning_rate) {
  if (model.kind == RewardModel::Kind::linear) {
    model.w -= learning_rate * grad.w;
    model.b -= learning_rate * grad.b;
  } else {
    model.W1 -= learning_rate * grad.W1;
    model.b1 -= learning_rate * grad.b1;
    model.w2 -= learning_rate * grad.w2;
    model.b2 -= learning_rate * grad.b2;
  }
}

ScoredShortlist shortlist(const Vec& rewards, const std::vector<ItemId>& ids,
                          int n) {
  if (n < 1) throw UsageError("shortlist: N must be >= 1");
  if (rewards.size() != static_cast<Eigen::Index>(ids.size()))
    throw UsageError("shortlist: score/id size mismatch");
  std::vector<int> order(ids.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (rewards[a] != rewards[b]) return rewards[a] > rewards[b];
    return ids[a] < ids[b];
  });
  const int keep = std::min<int>(n, static_cast<int>(ids.size()));
  ScoredShortlist out;
  out.entries.reserve(keep);
  const int tercile = (keep + 2) / 3;  // ceil(keep / 3)
  for (int rank = 1; rank <= keep; ++rank) {
    const int idx = order[rank - 1];
    ShortlistEntry e;
    e.item = ids[idx];
    e.reward = rewards[idx];
    e.rank = rank;
    e.confidence = rank <= tercile            ? Confidence::high
                   : rank <= 2 * tercile      ? Confidence::medium
                                              : Confidence::low;
    out.entries.push_back(e);
  }
  return out;
}

const char* confidence_label(Confidence c) {
  switch (c) {
    case Confidence::high: return "high";
    case Confidence::medium: return "medium";
    default: return "low";
  }
}

}  // namespace irlrec
