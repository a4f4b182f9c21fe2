#pragma once

#include <deque>
#include <optional>
#include <unordered_map>
#include <vector>

#include "irlrec/dataset.hpp"
#include "irlrec/graph.hpp"
#include "irlrec/text_index.hpp"

namespace irlrec {

// Per-user context derived from positive history strictly before a state's
// timestamp. The category distribution uses the full history; `recent`
// keeps only the K most recent positives (prompt window).
struct UserProfile {
  Vec category_distribution;  // |categories|, sums to 1 or all-zero
  std::vector<PositiveEvent> recent;
  std::unordered_map<int, int> concept_affinity;  // concept idx -> count
};

struct Community {
  std::vector<std::pair<UserId, double>> members;  // similarity descending
};

struct CommunitySignals {
  double support = 0.0;
  double avg_feedback = 0.0;
  int shared_concept_count = 0;
};

// Multi-category items contribute 1/c mass per category before
// normalization.
UserProfile build_profile(const std::vector<PositiveEvent>& history,
                          const HeteroGraph& graph,
                          const std::unordered_map<ItemId, ItemMeta>& items,
                          int k_recent);

// Top-M users by cosine of category distributions; excludes the query user;
// ties broken by ascending user id. A zero query profile yields an empty
// community.
Community find_community(
    UserId user, const UserProfile& profile,
    const std::vector<std::pair<UserId, const UserProfile*>>& all_profiles,
    int m);

// One member's training-period engagement with an item.
struct MemberEngagement {
  double feedback_mean = 0.0;
  int n = 0;
  bool positive = false;
};

// Precomputed per query user: candidate -> community aggregates, so signal
// lookups during scoring are O(1).
class CommunitySignalIndex {
 public:
  CommunitySignalIndex(
      const Community& community,
      const std::unordered_map<
          UserId, std::unordered_map<ItemId, MemberEngagement>>& member_items,
      double global_mean_feedback);

  CommunitySignals signals(ItemId candidate) const;
  double support(ItemId candidate) const;
  double avg_feedback(ItemId candidate) const;
  std::size_t community_size() const { return n_members_; }

 private:
  struct Agg {
    double sim_sum = 0.0;
    double sim_feedback_sum = 0.0;
    int positive_members = 0;
  };
  std::unordered_map<ItemId, Agg> by_item_;
  std::size_t n_members_ = 0;
  double global_mean_ = 0.0;
};

// Communities and member engagements computed once from training-period
// interactions (per member: interactions strictly before that member's
// validation event; users without a split keep all interactions).
struct RetrievalIndex {
  std::vector<std::pair<UserId, const UserProfile*>> profile_refs;
  std::unordered_map<UserId, UserProfile> train_profiles;
  std::unordered_map<UserId, Community> communities;
  std::unordered_map<UserId, std::unordered_map<ItemId, MemberEngagement>>
      member_items;
  double global_mean_feedback = 0.0;
  int m = 50;
  int k_recent = 10;

  CommunitySignalIndex signal_index(UserId user) const;
};

// compute_communities = false skips the O(users^2) similarity step (the
// caller then fills `communities`, e.g. from the cache file).
RetrievalIndex build_retrieval_index(const FilteredDataset& data,
                                     const Split& split,
                                     const HeteroGraph& graph, int k_recent,
                                     int m, bool compute_communities = true);

// Similarity-cache round trip for the O(users^2) community step.
void save_communities(const RetrievalIndex& index, const std::string& path);
bool load_communities(const std::string& path, RetrievalIndex& index);

// Incremental per-user state walker. Positive events are committed in
// trajectory order, but only once strictly older than the queried state
// time, so same-timestamp events never leak into their own state.
class StateBuilder {
 public:
  StateBuilder(const std::vector<PositiveEvent>& trajectory,
               const HeteroGraph& graph, const TfIdfIndex& index,
               const std::unordered_map<ItemId, ItemMeta>& items,
               int k_recent);

  // Commit trajectory events with timestamp < t.
  void advance_to(std::int64_t t);

  const Vec& category_distribution() const;
  int committed_positives() const { return committed_; }
  const std::deque<PositiveEvent>& recent() const { return window_; }
  // Normalized tf-idf vector over the recent window's documents.
  const SparseVec& query_vector() const;
  int shared_concepts_with(ItemId candidate) const;
  UserProfile profile_snapshot() const;

 private:
  void commit(const PositiveEvent& e);

  const std::vector<PositiveEvent>& trajectory_;
  const HeteroGraph& graph_;
  const TfIdfIndex& index_;
  const std::unordered_map<ItemId, ItemMeta>& items_;
  int k_recent_;
  std::size_t next_ = 0;
  int committed_ = 0;
  Vec cat_counts_;
  double cat_mass_ = 0.0;
  mutable Vec cat_dist_;
  mutable bool dist_dirty_ = true;
  std::deque<PositiveEvent> window_;
  std::unordered_map<int, double> window_tf_;
  std::unordered_map<int, int> concept_counts_;
  mutable SparseVec query_vec_;
  mutable bool query_dirty_ = true;
};

}  // namespace irlrec
