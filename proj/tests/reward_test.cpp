#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "irlrec/reward.hpp"

using namespace irlrec;

TEST_CASE("reward of the zero network is the output bias") {
  RewardModel m = RewardModel::make_mlp(3, 2, 1);
  m.W1.setZero();
  m.b1.setZero();
  m.w2.setZero();
  m.b2 = 0.0;
  Vec phi(3);
  phi << 1.0, -2.0, 3.0;
  CHECK(m.reward(phi) == 0.0);
}

TEST_CASE("relu kills a hidden layer with all-negative preactivations") {
  RewardModel m = RewardModel::make_mlp(2, 2, 1);
  m.W1 << 1.0, 0.0, 0.0, 1.0;
  m.b1 << -10.0, -10.0;
  m.w2 << 5.0, -7.0;
  m.b2 = 0.25;
  Vec phi(2);
  phi << 1.0, 1.0;  // preactivations (-9, -9), both clipped
  CHECK(m.reward(phi) == doctest::Approx(0.25));
}

TEST_CASE("hand-computed mlp forward pass") {
  RewardModel m = RewardModel::make_mlp(3, 2, 1);
  m.W1 << 1.0, 0.0, -1.0, 0.5, 0.5, 0.0;
  m.b1 << 0.1, -0.2;
  m.w2 << 2.0, -1.0;
  m.b2 = 0.3;
  Vec phi(3);
  phi << 1.0, 2.0, 3.0;
  // z = (1 - 3 + 0.1, 0.5 + 1 - 0.2) = (-1.9, 1.3); relu -> (0, 1.3);
  // r = 2*0 - 1*1.3 + 0.3 = -1.0
  CHECK(m.reward(phi) == doctest::Approx(-1.0).epsilon(1e-12));

  Mat phis(3, 2);
  phis.col(0) = phi;
  phis.col(1) = Vec::Zero(3);
  const Vec r = m.rewards(phis);
  CHECK(r[0] == doctest::Approx(-1.0).epsilon(1e-12));
  // z = (0.1, -0.2); relu -> (0.1, 0); r = 0.2 + 0.3
  CHECK(r[1] == doctest::Approx(0.5).epsilon(1e-12));

  CHECK_THROWS_AS(m.reward(Vec::Zero(4)), UsageError);
}

TEST_CASE("batched and single-sample reward paths agree") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    const bool linear = trial % 2 == 0;
    RewardModel m = linear ? RewardModel::make_linear(6, rng())
                           : RewardModel::make_mlp(6, 3, rng());
    Mat phi(6, 9);
    for (int j = 0; j < 9; ++j)
      for (int k = 0; k < 6; ++k) phi(k, j) = 2.0 * next_double(rng) - 1.0;
    const Vec batched = m.rewards(phi);
    for (int j = 0; j < 9; ++j)
      CHECK(batched[j] == doctest::Approx(m.reward(phi.col(j))).epsilon(1e-12));
  }
}

TEST_CASE("softmax policy: symmetry, analytic case, shift invariance") {
  const Vec uniform = softmax(Vec::Zero(100));
  for (int i = 0; i < 100; ++i)
    CHECK(uniform[i] == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(uniform.sum() == doctest::Approx(1.0).epsilon(1e-12));

  Vec two(2);
  two << std::log(2.0), 0.0;
  const Vec p = softmax(two);
  CHECK(p[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(p[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    Vec r(7);
    for (int i = 0; i < 7; ++i) r[i] = 10.0 * next_double(rng) - 5.0;
    const Vec base = softmax(r);
    const Vec shifted = softmax(Vec(r.array() + 123.456));
    CHECK((base - shifted).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("listwise loss: uniform, analytic two-candidate, saturation") {
  RewardModel lin = RewardModel::make_linear(1, 1);
  lin.w << 1.0;
  lin.b = 0.0;

  Transition uniform;
  uniform.phi = Mat::Zero(1, 100);
  uniform.expert = 0;
  CHECK(listwise_loss(lin, {uniform}) ==
        doctest::Approx(std::log(100.0)).epsilon(1e-12));

  Transition pair;
  pair.phi = Mat(1, 2);
  pair.phi << 1.0, 0.0;  // rewards (1, 0), expert first
  pair.expert = 0;
  CHECK(listwise_loss(lin, {pair}) ==
        doctest::Approx(std::log(1.0 + std::exp(-1.0))).epsilon(1e-12));

  Transition saturated = pair;
  saturated.phi(0, 0) = 1000.0;
  CHECK(listwise_loss(lin, {saturated}) < 1e-10);

  Transition missing;
  missing.phi = Mat::Zero(1, 3);
  missing.expert = 7;  // out of range
  CHECK_THROWS(listwise_loss(lin, {missing}));
}

TEST_CASE("per-candidate reward gradients sum to zero") {
  // Identity feature columns turn grad.w into the per-candidate dL/dr.
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 30; ++trial) {
    const int c = 2 + static_cast<int>(next_below(rng, 7));
    RewardModel lin = RewardModel::make_linear(c, trial);
    Transition t;
    t.phi = Mat::Identity(c, c);
    t.expert = static_cast<int>(next_below(rng, c));
    RewardGrad grad = RewardGrad::zeros_like(lin);
    transition_grad(lin, t.phi, t.expert, Objective::listwise, 0.0, grad);
    CHECK(std::abs(grad.w.sum()) < 1e-12);
  }
}

TEST_CASE("uniform two-candidate gradient is (-1/2, +1/2)") {
  RewardModel lin = RewardModel::make_linear(2, 1);
  lin.w.setZero();
  lin.b = 0.0;
  Transition t;
  t.phi = Mat::Identity(2, 2);
  t.expert = 0;
  RewardGrad grad = RewardGrad::zeros_like(lin);
  transition_grad(lin, t.phi, t.expert, Objective::listwise, 0.0, grad);
  CHECK(grad.w[0] == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(grad.w[1] == doctest::Approx(0.5).epsilon(1e-12));
}

namespace {

std::vector<double*> parameter_view(RewardModel& m) {
  std::vector<double*> out;
  if (m.kind == RewardModel::Kind::linear) {
    for (int i = 0; i < m.d; ++i) out.push_back(&m.w[i]);
    out.push_back(&m.b);
  } else {
    for (int i = 0; i < m.h * m.d; ++i) out.push_back(m.W1.data() + i);
    for (int i = 0; i < m.h; ++i) out.push_back(&m.b1[i]);
    for (int i = 0; i < m.h; ++i) out.push_back(&m.w2[i]);
    out.push_back(&m.b2);
  }
  return out;
}

std::vector<double> gradient_view(const RewardModel& m, const RewardGrad& g) {
  std::vector<double> out;
  if (m.kind == RewardModel::Kind::linear) {
    for (int i = 0; i < m.d; ++i) out.push_back(g.w[i]);
    out.push_back(g.b);
  } else {
    for (int i = 0; i < m.h * m.d; ++i) out.push_back(*(g.W1.data() + i));
    for (int i = 0; i < m.h; ++i) out.push_back(g.b1[i]);
    for (int i = 0; i < m.h; ++i) out.push_back(g.w2[i]);
    out.push_back(g.b2);
  }
  return out;
}

double batch_loss(const RewardModel& m, const std::vector<Transition>& batch,
                  Objective obj, double l2) {
  return obj == Objective::listwise ? listwise_loss(m, batch)
                                    : pointwise_loss(m, batch, l2);
}

// Central finite differences vs. the analytic gradient; returns the worst
// relative error over all parameters.
double fd_worst_error(RewardModel& m, const std::vector<Transition>& batch,
                      Objective obj, double l2) {
  RewardGrad grad = RewardGrad::zeros_like(m);
  for (const Transition& t : batch)
    transition_grad(m, t.phi, t.expert, obj, l2, grad);
  grad.scale(1.0 / static_cast<double>(batch.size()));
  const std::vector<double> analytic = gradient_view(m, grad);

  const double h = 1e-5;
  double worst = 0.0;
  const std::vector<double*> params = parameter_view(m);
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double saved = *params[k];
    *params[k] = saved + h;
    const double up = batch_loss(m, batch, obj, l2);
    *params[k] = saved - h;
    const double down = batch_loss(m, batch, obj, l2);
    *params[k] = saved;
    const double fd = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(fd), std::abs(analytic[k]), 1e-4});
    worst = std::max(worst, std::abs(fd - analytic[k]) / denom);
  }
  return worst;
}

// Random instance away from relu kinks so central differences are valid.
bool make_instance(std::mt19937_64& rng, RewardModel& m,
                   std::vector<Transition>& batch, Objective obj) {
  const int d = 2 + static_cast<int>(next_below(rng, 9));   // 2..10
  const int h = 1 + static_cast<int>(next_below(rng, 4));   // 1..4
  const int c = 2 + static_cast<int>(next_below(rng, 7));   // 2..8
  const int b = 1 + static_cast<int>(next_below(rng, 3));   // 1..3
  const bool linear = next_below(rng, 2) == 0;
  m = linear ? RewardModel::make_linear(d, rng())
             : RewardModel::make_mlp(d, h, rng());
  batch.clear();
  for (int i = 0; i < b; ++i) {
    Transition t;
    t.phi = Mat(d, c);
    for (int j = 0; j < c; ++j)
      for (int k = 0; k < d; ++k)
        t.phi(k, j) = 2.0 * next_double(rng) - 1.0;
    t.expert = static_cast<int>(next_below(rng, c));
    batch.push_back(std::move(t));
  }
  if (!linear) {
    for (const Transition& t : batch) {
      const Mat z = (m.W1 * t.phi).colwise() + m.b1;
      if (z.cwiseAbs().minCoeff() < 1e-3) return false;  // too close to a kink
    }
  }
  (void)obj;
  return true;
}

}  // namespace

TEST_CASE("analytic gradients match central finite differences") {
  std::mt19937_64 rng(2024);
  int accepted = 0;
  int attempts = 0;
  while (accepted < 120 && attempts < 2000) {
    ++attempts;
    RewardModel m;
    std::vector<Transition> batch;
    const int mode = accepted % 3;
    const Objective obj =
        mode == 2 ? Objective::pointwise : Objective::listwise;
    const double l2 = mode == 2 ? 0.01 : 0.0;
    if (!make_instance(rng, m, batch, obj)) continue;
    const double err = fd_worst_error(m, batch, obj, l2);
    CHECK(err < 1e-4);
    ++accepted;
  }
  CHECK(accepted >= 120);
}

TEST_CASE("adam drives a convex problem toward its optimum") {
  // One candidate pair with a fixed separable direction; the listwise loss
  // must fall monotonically-ish and the expert score must win by a margin.
  RewardModel lin = RewardModel::make_linear(2, 3);
  Transition t;
  t.phi = Mat(2, 2);
  t.phi << 1.0, -1.0, 0.5, -0.5;
  t.expert = 0;
  Adam adam(lin, AdamConfig{0.05});
  const double before = listwise_loss(lin, {t});
  for (int step = 0; step < 200; ++step) {
    RewardGrad grad = RewardGrad::zeros_like(lin);
    transition_grad(lin, t.phi, t.expert, Objective::listwise, 0.0, grad);
    adam.step(lin, grad);
  }
  CHECK(listwise_loss(lin, {t}) < before * 0.2);
}

TEST_CASE("shortlist: ranks, clamping, tie rule, terciles") {
  std::vector<ItemId> ids;
  Vec rewards(100);
  for (int i = 0; i < 100; ++i) {
    ids.push_back(1000 - i);  // descending ids
    rewards[i] = static_cast<double>(i % 10);
  }
  const ScoredShortlist top = shortlist(rewards, ids, 20);
  REQUIRE(top.entries.size() == 20);
  for (int i = 0; i < 20; ++i) CHECK(top.entries[i].rank == i + 1);
  // All top entries carry the maximal reward 9, so ties order by item id.
  for (int i = 1; i < 10; ++i) {
    CHECK(top.entries[i].reward == top.entries[i - 1].reward);
    CHECK(top.entries[i].item > top.entries[i - 1].item);
  }
  // ceil(20/3) = 7: ranks 1..7 high, 8..14 medium, 15..20 low.
  CHECK(top.entries[6].confidence == Confidence::high);
  CHECK(top.entries[7].confidence == Confidence::medium);
  CHECK(top.entries[13].confidence == Confidence::medium);
  CHECK(top.entries[14].confidence == Confidence::low);

  const ScoredShortlist all = shortlist(rewards, ids, 200);
  CHECK(all.entries.size() == 100);

  Vec equal = Vec::Zero(4);
  std::vector<ItemId> eq_ids = {44, 11, 33, 22};
  const ScoredShortlist tied = shortlist(equal, eq_ids, 4);
  CHECK(tied.entries[0].item == 11);
  CHECK(tied.entries[1].item == 22);
  CHECK(tied.entries[2].item == 33);
  CHECK(tied.entries[3].item == 44);

  CHECK_THROWS_AS(shortlist(equal, eq_ids, 0), UsageError);
}
