#include "irlrec/baselines.hpp"

#include <algorithm>
#include <random>

namespace irlrec {

std::vector<ItemId> random_ordering(const std::vector<ItemId>& candidates,
                                    std::uint64_t seed) {
  std::vector<ItemId> out = candidates;
  std::mt19937_64 rng(seed);
  for (std::size_t i = out.size(); i > 1; --i)
    std::swap(out[i - 1], out[next_below(rng, i)]);
  return out;
}

std::vector<ItemId> popularity_ordering(
    const std::vector<ItemId>& candidates,
    const std::unordered_map<ItemId, int>& counts) {
  std::vector<ItemId> out = candidates;
  auto count_of = [&](ItemId id) {
    auto it = counts.find(id);
    return it == counts.end() ? 0 : it->second;
  };
  std::sort(out.begin(), out.end(), [&](ItemId a, ItemId b) {
    const int ca = count_of(a), cb = count_of(b);
    if (ca != cb) return ca > cb;
    return a < b;
  });
  return out;
}

std::unordered_map<ItemId, int> training_popularity(
    const FilteredDataset& data, const Split& split) {
  std::unordered_map<UserId, std::int64_t> cutoff;
  for (const auto& [user, s] : split.by_user) cutoff[user] = s.val.timestamp;
  std::unordered_map<ItemId, int> counts;
  for (const Interaction& x : data.interactions) {
    auto it = cutoff.find(x.user);
    if (it != cutoff.end() && x.timestamp >= it->second) continue;
    ++counts[x.item];
  }
  return counts;
}

}  // namespace irlrec
