#include "irlrec/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace irlrec {
namespace {

void add_item_categories(const HeteroGraph& graph,
                         const std::unordered_map<ItemId, ItemMeta>& items,
                         ItemId item, double weight, Vec& counts) {
  auto it = items.find(item);
  if (it == items.end()) return;
  std::vector<int> idx;
  for (const std::string& c : it->second.categories) {
    const int i = graph.category_index(c);
    if (i >= 0) idx.push_back(i);
  }
  std::sort(idx.begin(), idx.end());
  idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
  if (idx.empty()) return;
  const double share = weight / static_cast<double>(idx.size());
  for (int i : idx) counts[i] += share;
}

}  // namespace

UserProfile build_profile(const std::vector<PositiveEvent>& history,
                          const HeteroGraph& graph,
                          const std::unordered_map<ItemId, ItemMeta>& items,
                          int k_recent) {
  UserProfile p;
  const int n_cat = static_cast<int>(graph.category_nodes.size());
  Vec counts = Vec::Zero(n_cat);
  for (const PositiveEvent& e : history) {
    add_item_categories(graph, items, e.item, 1.0, counts);
    for (int c : graph.concepts_of(e.item)) ++p.concept_affinity[c];
  }
  const double mass = counts.sum();
  p.category_distribution = mass > 0.0 ? Vec(counts / mass) : counts;
  const std::size_t keep =
      std::min<std::size_t>(history.size(), static_cast<std::size_t>(k_recent));
  p.recent.assign(history.end() - keep, history.end());
  return p;
}

Community find_community(
    UserId user, const UserProfile& profile,
    const std::vector<std::pair<UserId, const UserProfile*>>& all_profiles,
    int m) {
  if (m < 1) throw UsageError("community size M must be >= 1");
  Community out;
  if (profile.category_distribution.size() == 0 ||
      profile.category_distribution.sum() == 0.0)
    return out;
  out.members.reserve(all_profiles.size());
  for (const auto& [other, other_profile] : all_profiles) {
    if (other == user) continue;
    const double sim = cosine(profile.category_distribution,
                              other_profile->category_distribution);
    out.members.emplace_back(other, sim);
  }
  std::sort(out.members.begin(), out.members.end(),
            [](const auto& a, const auto& b) {
              if (a.second != b.second) return a.second > b.second;
              return a.first < b.first;
            });
  if (static_cast<int>(out.members.size()) > m) out.members.resize(m);
  return out;
}

CommunitySignalIndex::CommunitySignalIndex(
    const Community& community,
    const std::unordered_map<
        UserId, std::unordered_map<ItemId, MemberEngagement>>& member_items,
    double global_mean_feedback)
    : n_members_(community.members.size()), global_mean_(global_mean_feedback) {
  for (const auto& [member, sim] : community.members) {
    auto it = member_items.find(member);
    if (it == member_items.end()) continue;
    for (const auto& [item, engagement] : it->second) {
      Agg& agg = by_item_[item];
      agg.sim_sum += sim;
      agg.sim_feedback_sum += sim * engagement.feedback_mean;
      if (engagement.positive) ++agg.positive_members;
    }
  }
}

CommunitySignals CommunitySignalIndex::signals(ItemId candidate) const {
  CommunitySignals s;
  s.support = support(candidate);
  s.avg_feedback = avg_feedback(candidate);
  return s;
}

double CommunitySignalIndex::support(ItemId candidate) const {
  if (n_members_ == 0) return 0.0;
  auto it = by_item_.find(candidate);
  if (it == by_item_.end()) return 0.0;
  return static_cast<double>(it->second.positive_members) /
         static_cast<double>(n_members_);
}

double CommunitySignalIndex::avg_feedback(ItemId candidate) const {
  auto it = by_item_.find(candidate);
  if (it == by_item_.end() || it->second.sim_sum <= 0.0) return global_mean_;
  return it->second.sim_feedback_sum / it->second.sim_sum;
}

CommunitySignalIndex RetrievalIndex::signal_index(UserId user) const {
  static const Community empty;
  auto it = communities.find(user);
  return CommunitySignalIndex(it == communities.end() ? empty : it->second,
                              member_items, global_mean_feedback);
}

RetrievalIndex build_retrieval_index(const FilteredDataset& data,
                                     const Split& split,
                                     const HeteroGraph& graph, int k_recent,
                                     int m, bool compute_communities) {
  RetrievalIndex index;
  index.m = m;
  index.k_recent = k_recent;

  // Training-period cutoff per user: the validation event timestamp. Users
  // excluded from the split keep their full history.
  std::unordered_map<UserId, std::int64_t> cutoff;
  for (const auto& [user, s] : split.by_user) cutoff[user] = s.val.timestamp;

  double feedback_sum = 0.0;
  std::size_t feedback_count = 0;
  for (const Interaction& x : data.interactions) {
    auto it = cutoff.find(x.user);
    if (it != cutoff.end() && x.timestamp >= it->second) continue;
    feedback_sum += x.feedback;
    ++feedback_count;
    MemberEngagement& e = index.member_items[x.user][x.item];
    // Running mean over this member's interactions with the item.
    e.feedback_mean += (x.feedback - e.feedback_mean) / static_cast<double>(++e.n);
    if (data.predicate(x.feedback)) e.positive = true;
  }
  index.global_mean_feedback =
      feedback_count > 0 ? feedback_sum / static_cast<double>(feedback_count)
                         : 0.0;

  static const std::vector<PositiveEvent> no_history;
  for (UserId user : data.user_ids) {
    auto su = split.by_user.find(user);
    const std::vector<PositiveEvent>* train_part;
    if (su != split.by_user.end()) {
      train_part = &su->second.train;
    } else {
      auto it = data.positives.find(user);
      train_part = it == data.positives.end() ? &no_history : &it->second;
    }
    index.train_profiles.emplace(
        user, build_profile(*train_part, graph, data.items, k_recent));
  }
  index.profile_refs.reserve(data.user_ids.size());
  for (UserId user : data.user_ids)
    index.profile_refs.emplace_back(user, &index.train_profiles.at(user));

  if (compute_communities)
    for (UserId user : data.user_ids)
      index.communities.emplace(
          user, find_community(user, index.train_profiles.at(user),
                               index.profile_refs, m));
  return index;
}

void save_communities(const RetrievalIndex& index, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write community cache: " + path);
  out.precision(17);
  std::vector<UserId> users;
  users.reserve(index.communities.size());
  for (const auto& [user, community] : index.communities) users.push_back(user);
  std::sort(users.begin(), users.end());
  for (UserId user : users) {
    out << user;
    for (const auto& [member, sim] : index.communities.at(user).members)
      out << '\t' << member << ':' << sim;
    out << '\n';
  }
}

bool load_communities(const std::string& path, RetrievalIndex& index) {
  std::ifstream in(path);
  if (!in) return false;
  std::unordered_map<UserId, Community> loaded;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::size_t pos = line.find('\t');
    Community c;
    const UserId user = std::stoll(line.substr(0, pos));
    while (pos != std::string::npos) {
      const std::size_t next = line.find('\t', pos + 1);
      const std::string entry =
          line.substr(pos + 1, next == std::string::npos ? std::string::npos
                                                         : next - pos - 1);
      const std::size_t colon = entry.find(':');
      c.members.emplace_back(std::stoll(entry.substr(0, colon)),
                             std::stod(entry.substr(colon + 1)));
      pos = next;
    }
    loaded.emplace(user, std::move(c));
  }
  index.communities = std::move(loaded);
  return true;
}

StateBuilder::StateBuilder(const std::vector<PositiveEvent>& trajectory,
                           const HeteroGraph& graph, const TfIdfIndex& index,
                           const std::unordered_map<ItemId, ItemMeta>& items,
                           int k_recent)
    : trajectory_(trajectory),
      graph_(graph),
      index_(index),
      items_(items),
      k_recent_(k_recent),
      cat_counts_(Vec::Zero(static_cast<int>(graph.category_nodes.size()))),
      cat_dist_(Vec::Zero(static_cast<int>(graph.category_nodes.size()))) {}

void StateBuilder::advance_to(std::int64_t t) {
  while (next_ < trajectory_.size() && trajectory_[next_].timestamp < t) {
    commit(trajectory_[next_]);
    ++next_;
  }
}

void StateBuilder::commit(const PositiveEvent& e) {
  ++committed_;
  dist_dirty_ = true;
  add_item_categories(graph_, items_, e.item, 1.0, cat_counts_);
  cat_mass_ = cat_counts_.sum();
  for (int c : graph_.concepts_of(e.item)) ++concept_counts_[c];

  window_.push_back(e);
  query_dirty_ = true;
  auto add_doc = [&](ItemId item, double sign) {
    auto it = index_.doc_counts.find(item);
    if (it == index_.doc_counts.end()) return;
    for (const auto& [term, count] : it->second) window_tf_[term] += sign * count;
  };
  add_doc(e.item, +1.0);
  if (static_cast<int>(window_.size()) > k_recent_) {
    add_doc(window_.front().item, -1.0);
    window_.pop_front();
  }
}

const Vec& StateBuilder::category_distribution() const {
  if (dist_dirty_) {
    cat_dist_ = cat_mass_ > 0.0 ? Vec(cat_counts_ / cat_mass_)
                                : Vec::Zero(cat_counts_.size());
    dist_dirty_ = false;
  }
  return cat_dist_;
}

const SparseVec& StateBuilder::query_vector() const {
  if (query_dirty_) {
    query_vec_ = index_.vectorize_counts(window_tf_);
    query_dirty_ = false;
  }
  return query_vec_;
}

int StateBuilder::shared_concepts_with(ItemId candidate) const {
  int shared = 0;
  for (int c : graph_.concepts_of(candidate)) {
    auto it = concept_counts_.find(c);
    if (it != concept_counts_.end() && it->second > 0) ++shared;
  }
  return shared;
}

UserProfile StateBuilder::profile_snapshot() const {
  UserProfile p;
  p.category_distribution = category_distribution();
  p.recent.assign(window_.begin(), window_.end());
  for (const auto& [c, n] : concept_counts_)
    if (n > 0) p.concept_affinity.emplace(c, n);
  return p;
}

}  // namespace irlrec
