#pragma once

#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "irlrec/dataset.hpp"

namespace irlrec {

// Heterogeneous item / category / concept graph. Item-item co-occurrence
// edges are unweighted and exist iff two items share at least two concepts.
struct HeteroGraph {
  std::vector<ItemId> item_nodes;            // sorted ascending
  std::vector<std::string> category_nodes;   // sorted ascending
  std::vector<std::string> concept_nodes;    // sorted ascending
  std::unordered_map<ItemId, std::vector<int>> item_categories;  // sorted idx
  std::unordered_map<ItemId, std::vector<int>> item_concepts;    // sorted idx
  std::vector<std::pair<ItemId, ItemId>> item_item_edges;  // a < b, sorted
  std::size_t n_item_category_edges = 0;
  std::size_t n_item_concept_edges = 0;
  int min_concept_freq = 1;

  std::size_t n_nodes() const {
    return item_nodes.size() + category_nodes.size() + concept_nodes.size();
  }
  std::size_t n_edges() const {
    return n_item_category_edges + n_item_concept_edges +
           item_item_edges.size();
  }
  // -1 when the label is not a node.
  int category_index(const std::string& label) const;
  int concept_index(const std::string& label) const;
  const std::vector<int>& concepts_of(ItemId item) const;
  const std::vector<int>& categories_of(ItemId item) const;
};

// Corpus frequency of a normalized tag: total applications (default) or the
// number of distinct items carrying it. Both readings are kept so the
// golden-number calibration sweep can pick the one that reproduces the
// published concept count.
enum class ConceptFrequency { applications, items };

HeteroGraph build_graph(const std::unordered_map<ItemId, ItemMeta>& items,
                        int min_concept_freq,
                        ConceptFrequency metric = ConceptFrequency::applications);

// |(union of concepts over history items) ∩ concepts(candidate)|.
int shared_concepts(const HeteroGraph& graph,
                    const std::unordered_set<ItemId>& history_items,
                    ItemId candidate);

// Line-oriented export/import (tab-separated, one node or edge per line).
void save_graph(const HeteroGraph& graph, const std::string& path);
HeteroGraph load_graph(const std::string& path);

}  // namespace irlrec
