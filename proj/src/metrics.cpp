#include "irlrec/metrics.hpp"

#include <cmath>

namespace irlrec {

double hr_at(int rank, int k) { return rank <= k ? 1.0 : 0.0; }

double ndcg_at(int rank, int k) {
  if (rank > k) return 0.0;
  return 1.0 / std::log2(static_cast<double>(rank) + 1.0);
}

double mrr_of(int rank) { return 1.0 / static_cast<double>(rank); }

RankMetrics metrics_for_rank(int rank) {
  if (rank < 1) throw UsageError("metrics: rank must be >= 1");
  RankMetrics m;
  m.hr5 = hr_at(rank, 5);
  m.ndcg5 = ndcg_at(rank, 5);
  m.hr10 = hr_at(rank, 10);
  m.ndcg10 = ndcg_at(rank, 10);
  m.mrr = mrr_of(rank);
  return m;
}

int rank_of_positive(const Vec& scores, const std::vector<ItemId>& ids,
                     int positive_index) {
  const double target = scores[positive_index];
  const ItemId target_id = ids[positive_index];
  int rank = 1;
  for (Eigen::Index j = 0; j < scores.size(); ++j) {
    if (j == positive_index) continue;
    if (scores[j] > target || (scores[j] == target && ids[j] < target_id))
      ++rank;
  }
  return rank;
}

int rank_in_ordering(const std::vector<ItemId>& ordering, ItemId positive) {
  for (std::size_t i = 0; i < ordering.size(); ++i)
    if (ordering[i] == positive) return static_cast<int>(i) + 1;
  throw DataError("positive item missing from ordering");
}

MethodMetrics evaluate(const std::string& method,
                       const std::vector<UserId>& expected_users,
                       const std::unordered_map<UserId, int>& rank_by_user,
                       int shortlist_n) {
  std::string missing;
  for (UserId u : expected_users)
    if (!rank_by_user.count(u)) {
      if (!missing.empty()) missing += ", ";
      missing += std::to_string(u);
    }
  if (!missing.empty())
    throw DataError("evaluate: missing users: " + missing);
  if (expected_users.empty()) throw DataError("evaluate: no users");

  MethodMetrics out;
  out.method = method;
  out.n_users = expected_users.size();
  out.shortlist_n = shortlist_n;
  double recall = 0.0;
  for (UserId u : expected_users) {
    const int rank = rank_by_user.at(u);
    const RankMetrics m = metrics_for_rank(rank);
    out.mean.hr5 += m.hr5;
    out.mean.ndcg5 += m.ndcg5;
    out.mean.hr10 += m.hr10;
    out.mean.ndcg10 += m.ndcg10;
    out.mean.mrr += m.mrr;
    if (shortlist_n > 0 && rank <= shortlist_n) recall += 1.0;
  }
  const double n = static_cast<double>(out.n_users);
  out.mean.hr5 /= n;
  out.mean.ndcg5 /= n;
  out.mean.hr10 /= n;
  out.mean.ndcg10 /= n;
  out.mean.mrr /= n;
  out.shortlist_recall = shortlist_n > 0 ? recall / n : -1.0;
  return out;
}

}  // namespace irlrec
