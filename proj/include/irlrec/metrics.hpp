#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "irlrec/common.hpp"
#include "irlrec/dataset.hpp"

namespace irlrec {

// Single-relevant-item metrics over a ranked candidate list: HR@K is a step
// function at K, NDCG@K = 1/log2(rank+1) inside the cutoff (ideal DCG = 1),
// MRR = 1/rank with no cutoff.
double hr_at(int rank, int k);
double ndcg_at(int rank, int k);
double mrr_of(int rank);

struct RankMetrics {
  double hr5 = 0.0;
  double ndcg5 = 0.0;
  double hr10 = 0.0;
  double ndcg10 = 0.0;
  double mrr = 0.0;
};

RankMetrics metrics_for_rank(int rank);

// Rank (1-based) of the positive within a scored list, scores descending,
// ties broken by ascending item id.
int rank_of_positive(const Vec& scores, const std::vector<ItemId>& ids,
                     int positive_index);

// Position (1-based) of `positive` in an explicit ordering.
int rank_in_ordering(const std::vector<ItemId>& ordering, ItemId positive);

struct RankResult {
  UserId user = 0;
  int rank = 0;
};

struct MethodMetrics {
  std::string method;
  RankMetrics mean;
  std::size_t n_users = 0;
  // Fraction of users whose positive sits inside the top-N shortlist;
  // negative when no shortlist stage applies.
  double shortlist_recall = -1.0;
  int shortlist_n = 0;
};

// Aggregates per-user ranks in ascending user order (fixed summation order
// keeps floating-point results reproducible). `expected_users` must all be
// present; missing users raise a DataError listing them.
MethodMetrics evaluate(const std::string& method,
                       const std::vector<UserId>& expected_users,
                       const std::unordered_map<UserId, int>& rank_by_user,
                       int shortlist_n = 0);

}  // namespace irlrec
