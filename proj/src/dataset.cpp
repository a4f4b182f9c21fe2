#include "irlrec/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <random>

#include "irlrec/csv.hpp"

namespace irlrec {
namespace {

std::int64_t parse_int(const CsvReader& r, const std::string& s,
                       const char* field) {
  std::int64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw DataError(r.path() + ":" + std::to_string(r.line_number()) +
                    ": malformed field '" + field + "': '" + s + "'");
  return v;
}

double parse_real(const CsvReader& r, const std::string& s,
                  const char* field) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError(r.path() + ":" + std::to_string(r.line_number()) +
                    ": malformed field '" + field + "': '" + s + "'");
  }
}

std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    std::size_t end = s.find(sep, start);
    if (end == std::string::npos) end = s.size();
    if (end > start) out.emplace_back(s.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

void load_movielens(const DatasetConfig& cfg, RawData& out) {
  {
    CsvReader r(cfg.movies_path);
    const int ci = r.column("movieId"), ct = r.column("title"),
              cg = r.column("genres");
    std::vector<std::string> row;
    while (r.next_row(row)) {
      ItemMeta meta;
      meta.id = parse_int(r, row.at(ci), "movieId");
      meta.title = row.at(ct);
      meta.categories = split_list(row.at(cg), '|');
      out.items.emplace(meta.id, std::move(meta));
    }
  }
  {
    CsvReader r(cfg.ratings_path);
    const int cu = r.column("userId"), ci = r.column("movieId"),
              cr = r.column("rating"), ct = r.column("timestamp");
    std::vector<std::string> row;
    while (r.next_row(row)) {
      Interaction x;
      x.user = parse_int(r, row.at(cu), "userId");
      x.item = parse_int(r, row.at(ci), "movieId");
      x.feedback = parse_real(r, row.at(cr), "rating");
      x.timestamp = parse_int(r, row.at(ct), "timestamp");
      out.interactions.push_back(x);
    }
  }
  if (!cfg.tags_path.empty()) {
    CsvReader r(cfg.tags_path);
    const int ci = r.column("movieId"), cg = r.column("tag");
    std::vector<std::string> row;
    while (r.next_row(row)) {
      const ItemId item = parse_int(r, row.at(ci), "movieId");
      auto it = out.items.find(item);
      if (it == out.items.end()) {
        ItemMeta meta;
        meta.id = item;
        it = out.items.emplace(item, std::move(meta)).first;
        out.warnings.push_back("tag for unknown item " + std::to_string(item));
      }
      ++it->second.tags[row.at(cg)];
      ++out.n_tag_rows;
    }
  }
}

void load_generic(const DatasetConfig& cfg, RawData& out) {
  const GenericColumns& cols = cfg.columns;
  if (!cfg.movies_path.empty()) {
    CsvReader r(cfg.movies_path, cols.item_delimiter);
    const int ci = r.column(cols.item_id);
    const int ct =
        cols.item_title.empty() ? -1 : r.column(cols.item_title);
    const int cc =
        cols.item_categories.empty() ? -1 : r.column(cols.item_categories);
    std::vector<std::string> row;
    while (r.next_row(row)) {
      ItemMeta meta;
      meta.id = parse_int(r, row.at(ci), cols.item_id.c_str());
      if (ct >= 0) meta.title = row.at(ct);
      if (cc >= 0)
        meta.categories = split_list(row.at(cc), cols.category_separator);
      out.items.emplace(meta.id, std::move(meta));
    }
  }
  CsvReader r(cfg.ratings_path, cols.log_delimiter);
  const int cu = r.column(cols.user), ci = r.column(cols.item),
            cs = r.column(cols.signal), ct = r.column(cols.timestamp);
  std::vector<std::string> row;
  while (r.next_row(row)) {
    Interaction x;
    x.user = parse_int(r, row.at(cu), cols.user.c_str());
    x.item = parse_int(r, row.at(ci), cols.item.c_str());
    x.feedback = parse_real(r, row.at(cs), cols.signal.c_str());
    x.timestamp = static_cast<std::int64_t>(
        parse_real(r, row.at(ct), cols.timestamp.c_str()) *
        cols.timestamp_scale);
    out.interactions.push_back(x);
  }
}

}  // namespace

RawData load_interactions(const DatasetConfig& cfg) {
  RawData out;
  if (cfg.format == DatasetConfig::Format::movielens)
    load_movielens(cfg, out);
  else
    load_generic(cfg, out);
  if (out.interactions.empty())
    throw DataError("no interactions in " + cfg.ratings_path);

  std::sort(out.interactions.begin(), out.interactions.end(),
            [](const Interaction& a, const Interaction& b) {
              if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
              if (a.user != b.user) return a.user < b.user;
              return a.item < b.item;
            });

  std::unordered_set<UserId> users;
  std::unordered_set<ItemId> items;
  for (const Interaction& x : out.interactions) {
    if (x.timestamp < 0)
      throw DataError("negative timestamp for user " + std::to_string(x.user));
    users.insert(x.user);
    items.insert(x.item);
    if (!out.items.count(x.item)) {
      ItemMeta meta;
      meta.id = x.item;
      out.items.emplace(x.item, std::move(meta));
      out.warnings.push_back("no metadata for interacted item " +
                             std::to_string(x.item));
    }
  }
  out.n_users = users.size();
  out.n_items = items.size();
  return out;
}

FilteredDataset filter_dataset(const RawData& raw, int min_user_interactions,
                               int min_item_interactions,
                               int min_user_positives,
                               const PositivePredicate& positive,
                               FilterMode mode) {
  if (min_user_interactions < 0 || min_item_interactions < 0 ||
      min_user_positives < 0)
    throw UsageError("filter thresholds must be >= 0");

  std::vector<Interaction> kept = raw.interactions;
  while (true) {
    std::unordered_map<ItemId, int> item_counts;
    for (const Interaction& x : kept) ++item_counts[x.item];
    std::unordered_map<UserId, int> user_counts;
    for (const Interaction& x : kept)
      if (item_counts[x.item] >= min_item_interactions) ++user_counts[x.user];

    std::vector<Interaction> next;
    next.reserve(kept.size());
    for (const Interaction& x : kept) {
      if (item_counts[x.item] < min_item_interactions) continue;
      auto uc = user_counts.find(x.user);
      if (uc == user_counts.end() || uc->second < min_user_interactions)
        continue;
      next.push_back(x);
    }
    const bool stable = next.size() == kept.size();
    kept = std::move(next);
    if (mode == FilterMode::single_pass || stable || kept.empty()) break;
  }

  std::unordered_map<UserId, int> user_positives;
  for (const Interaction& x : kept)
    if (positive(x.feedback)) ++user_positives[x.user];

  FilteredDataset out;
  out.predicate = positive;
  for (const Interaction& x : kept)
    if (user_positives[x.user] >= min_user_positives)
      out.interactions.push_back(x);
  if (out.interactions.empty())
    throw DataError("all users filtered out (thresholds too strict)");
  std::sort(out.interactions.begin(), out.interactions.end(),
            [](const Interaction& a, const Interaction& b) {
              if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
              if (a.user != b.user) return a.user < b.user;
              return a.item < b.item;
            });

  std::unordered_set<UserId> users;
  std::unordered_set<ItemId> items;
  for (const Interaction& x : out.interactions) {
    users.insert(x.user);
    items.insert(x.item);
    out.user_times[x.user].push_back(x.timestamp);
    out.item_times[x.item].push_back(x.timestamp);
    if (positive(x.feedback)) {
      out.positives[x.user].push_back({x.item, x.feedback, x.timestamp});
      out.positive_sets[x.user].insert(x.item);
      ++out.n_positive;
    }
  }
  // Interactions are time-sorted, so the per-user/item timelines are too;
  // trajectories need the item-id tiebreak.
  for (auto& [user, traj] : out.positives) {
    std::stable_sort(traj.begin(), traj.end(),
                     [](const PositiveEvent& a, const PositiveEvent& b) {
                       if (a.timestamp != b.timestamp)
                         return a.timestamp < b.timestamp;
                       return a.item < b.item;
                     });
  }
  out.user_ids.assign(users.begin(), users.end());
  std::sort(out.user_ids.begin(), out.user_ids.end());
  out.item_ids.assign(items.begin(), items.end());
  std::sort(out.item_ids.begin(), out.item_ids.end());
  for (ItemId id : out.item_ids) {
    auto it = raw.items.find(id);
    if (it != raw.items.end()) out.items.emplace(id, it->second);
  }
  return out;
}

int FilteredDataset::prior_interactions(UserId u, std::int64_t t) const {
  auto it = user_times.find(u);
  if (it == user_times.end()) return 0;
  return static_cast<int>(std::lower_bound(it->second.begin(),
                                           it->second.end(), t) -
                          it->second.begin());
}

std::optional<std::int64_t> FilteredDataset::last_interaction_before(
    UserId u, std::int64_t t) const {
  auto it = user_times.find(u);
  if (it == user_times.end()) return std::nullopt;
  auto lb = std::lower_bound(it->second.begin(), it->second.end(), t);
  if (lb == it->second.begin()) return std::nullopt;
  return *(lb - 1);
}

int FilteredDataset::item_count_before(ItemId i, std::int64_t t) const {
  auto it = item_times.find(i);
  if (it == item_times.end()) return 0;
  return static_cast<int>(std::lower_bound(it->second.begin(),
                                           it->second.end(), t) -
                          it->second.begin());
}

std::vector<ItemId> FilteredDataset::eligible_negatives(UserId u) const {
  std::vector<ItemId> pool;
  auto it = positive_sets.find(u);
  if (it == positive_sets.end()) return item_ids;
  pool.reserve(item_ids.size());
  for (ItemId id : item_ids)
    if (!it->second.count(id)) pool.push_back(id);
  return pool;
}

Split split_leave_last_two(const FilteredDataset& data) {
  Split out;
  for (UserId u : data.user_ids) {
    auto it = data.positives.find(u);
    const std::size_t n = it == data.positives.end() ? 0 : it->second.size();
    if (n < 3) {
      ++out.excluded_users;
      continue;
    }
    const std::vector<PositiveEvent>& traj = it->second;
    UserSplit s;
    s.train.assign(traj.begin(), traj.end() - 2);
    s.val = traj[n - 2];
    s.test = traj[n - 1];
    out.users.push_back(u);
    out.by_user.emplace(u, std::move(s));
  }
  return out;
}

CandidateSet sample_from_pool(const std::vector<ItemId>& pool, ItemId target,
                              int n_neg, std::uint64_t seed) {
  if (static_cast<int>(pool.size()) < n_neg)
    throw DataError("candidate sampling: need " + std::to_string(n_neg) +
                    " eligible items, have " + std::to_string(pool.size()) +
                    " (short by " +
                    std::to_string(n_neg - static_cast<int>(pool.size())) +
                    ")");
  CandidateSet out;
  out.positive = target;
  out.seed = seed;
  out.negatives.reserve(n_neg);
  std::vector<ItemId> scratch = pool;
  std::mt19937_64 rng(seed);
  for (int k = 0; k < n_neg; ++k) {
    const std::size_t j =
        k + next_below(rng, static_cast<std::uint64_t>(scratch.size() - k));
    std::swap(scratch[k], scratch[j]);
    out.negatives.push_back(scratch[k]);
  }
  return out;
}

CandidateSet sample_candidates(const FilteredDataset& data, UserId user,
                               ItemId target, int n_neg, std::uint64_t seed) {
  return sample_from_pool(data.eligible_negatives(user), target, n_neg, seed);
}

}  // namespace irlrec
