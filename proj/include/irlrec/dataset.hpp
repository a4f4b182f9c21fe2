#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "irlrec/common.hpp"

namespace irlrec {

// One (user, item, feedback, timestamp) event.
struct Interaction {
  UserId user = 0;
  ItemId item = 0;
  double feedback = 0.0;
  std::int64_t timestamp = 0;
};

struct ItemMeta {
  ItemId id = 0;
  std::string title;
  std::vector<std::string> categories;
  std::map<std::string, int> tags;  // raw annotation -> application count
};

// Positive-interaction rule: rating >= threshold (explicit feedback) or
// signal == value (implicit feedback).
struct PositivePredicate {
  enum class Kind { rating_threshold, signal_equals };
  Kind kind = Kind::rating_threshold;
  double value = 4.0;

  bool operator()(double feedback) const {
    return kind == Kind::rating_threshold ? feedback >= value
                                          : feedback == value;
  }
};

struct GenericColumns {
  std::string user = "user_id";
  std::string item = "item_id";
  std::string signal = "is_click";
  std::string timestamp = "time";
  std::string item_id = "item_id";
  std::string item_title;        // optional
  std::string item_categories;   // optional
  char log_delimiter = ',';
  char item_delimiter = ',';
  char category_separator = ',';
  double timestamp_scale = 1.0;  // multiply raw timestamps into seconds
};

// Declarative descriptor for one dataset (paths, schema, thresholds).
struct DatasetConfig {
  enum class Format { movielens, generic };
  Format format = Format::movielens;
  std::string ratings_path;  // movielens: ratings.csv; generic: log file
  std::string movies_path;   // movielens: movies.csv; generic: item file
  std::string tags_path;     // movielens only; may be empty
  GenericColumns columns;
  int min_user_interactions = 20;
  int min_item_interactions = 10;
  int min_user_positives = 3;
  PositivePredicate positive;
  std::string filter_mode = "single_pass";  // single_pass | fixpoint
};

struct RawData {
  std::vector<Interaction> interactions;  // sorted by (timestamp, user, item)
  std::unordered_map<ItemId, ItemMeta> items;
  std::vector<std::string> warnings;
  std::size_t n_users = 0;
  std::size_t n_items = 0;  // distinct interacted items
  std::size_t n_tag_rows = 0;
};

struct PositiveEvent {
  ItemId item = 0;
  double feedback = 0.0;
  std::int64_t timestamp = 0;
};

// Immutable after construction; safe for concurrent reads.
struct FilteredDataset {
  PositivePredicate predicate;
  std::vector<Interaction> interactions;  // sorted by (timestamp, user, item)
  std::unordered_map<ItemId, ItemMeta> items;
  std::vector<ItemId> item_ids;  // sorted ascending
  std::vector<UserId> user_ids;  // sorted ascending
  // Per-user positive trajectory, chronological, timestamp ties broken by
  // ascending item id.
  std::unordered_map<UserId, std::vector<PositiveEvent>> positives;
  std::unordered_map<UserId, std::unordered_set<ItemId>> positive_sets;
  // Sorted timestamps of all interactions, per user and per item.
  std::unordered_map<UserId, std::vector<std::int64_t>> user_times;
  std::unordered_map<ItemId, std::vector<std::int64_t>> item_times;
  std::size_t n_positive = 0;

  // Number of the user's interactions strictly before t.
  int prior_interactions(UserId u, std::int64_t t) const;
  // Timestamp of the user's most recent interaction strictly before t.
  std::optional<std::int64_t> last_interaction_before(UserId u,
                                                      std::int64_t t) const;
  // Number of interactions with the item strictly before t.
  int item_count_before(ItemId i, std::int64_t t) const;
  // Sorted item ids outside the user's positive history.
  std::vector<ItemId> eligible_negatives(UserId u) const;
};

struct UserSplit {
  std::vector<PositiveEvent> train;
  PositiveEvent val;
  PositiveEvent test;
};

// Leave-last-two-out split over positive trajectories.
struct Split {
  std::vector<UserId> users;  // sorted; only users with >= 3 positives
  std::unordered_map<UserId, UserSplit> by_user;
  std::size_t excluded_users = 0;
};

struct CandidateSet {
  ItemId positive = 0;
  std::vector<ItemId> negatives;
  std::uint64_t seed = 0;

  // Positive first, then negatives in sampled order.
  std::vector<ItemId> candidates() const {
    std::vector<ItemId> all;
    all.reserve(negatives.size() + 1);
    all.push_back(positive);
    all.insert(all.end(), negatives.begin(), negatives.end());
    return all;
  }
};

RawData load_interactions(const DatasetConfig& cfg);

// single_pass: items by global count, then users by post-item-filter count,
// then the positives floor. fixpoint: alternate item and user filters until
// stable (removals can cascade), then the positives floor.
enum class FilterMode { single_pass, fixpoint };

FilteredDataset filter_dataset(const RawData& raw, int min_user_interactions,
                               int min_item_interactions,
                               int min_user_positives,
                               const PositivePredicate& positive,
                               FilterMode mode = FilterMode::single_pass);

Split split_leave_last_two(const FilteredDataset& data);

// Uniform sample of n_neg distinct items from `pool` (sorted ids, target
// excluded by construction when the pool is a positive-history complement).
CandidateSet sample_from_pool(const std::vector<ItemId>& pool, ItemId target,
                              int n_neg, std::uint64_t seed);

CandidateSet sample_candidates(const FilteredDataset& data, UserId user,
                               ItemId target, int n_neg, std::uint64_t seed);

}  // namespace irlrec
