#pragma once

#include <unordered_map>
#include <vector>

#include "irlrec/dataset.hpp"

namespace irlrec {

// Seeded uniform shuffle of the candidate list.
std::vector<ItemId> random_ordering(const std::vector<ItemId>& candidates,
                                    std::uint64_t seed);

// Descending training-period interaction count, ties by ascending item id.
std::vector<ItemId> popularity_ordering(
    const std::vector<ItemId>& candidates,
    const std::unordered_map<ItemId, int>& counts);

// Global interaction counts restricted to each user's training period
// (strictly before that user's validation event; unsplit users contribute
// everything).
std::unordered_map<ItemId, int> training_popularity(const FilteredDataset& data,
                                                    const Split& split);

}  // namespace irlrec
