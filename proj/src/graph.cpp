#include "irlrec/graph.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "irlrec/text_index.hpp"

namespace irlrec {
namespace {

int index_of(const std::vector<std::string>& sorted, const std::string& s) {
  auto it = std::lower_bound(sorted.begin(), sorted.end(), s);
  if (it == sorted.end() || *it != s) return -1;
  return static_cast<int>(it - sorted.begin());
}

const std::vector<int>& empty_indices() {
  static const std::vector<int> empty;
  return empty;
}

}  // namespace

int HeteroGraph::category_index(const std::string& label) const {
  return index_of(category_nodes, label);
}

int HeteroGraph::concept_index(const std::string& label) const {
  return index_of(concept_nodes, label);
}

const std::vector<int>& HeteroGraph::concepts_of(ItemId item) const {
  auto it = item_concepts.find(item);
  return it == item_concepts.end() ? empty_indices() : it->second;
}

const std::vector<int>& HeteroGraph::categories_of(ItemId item) const {
  auto it = item_categories.find(item);
  return it == item_categories.end() ? empty_indices() : it->second;
}

HeteroGraph build_graph(const std::unordered_map<ItemId, ItemMeta>& items,
                        int min_concept_freq, ConceptFrequency metric) {
  if (min_concept_freq < 1)
    throw UsageError("min_concept_freq must be >= 1");
  HeteroGraph g;
  g.min_concept_freq = min_concept_freq;
  g.item_nodes.reserve(items.size());
  for (const auto& [id, meta] : items) g.item_nodes.push_back(id);
  std::sort(g.item_nodes.begin(), g.item_nodes.end());

  std::set<std::string> categories;
  std::map<std::string, int> tag_freq;  // normalized tag -> corpus frequency
  for (const auto& [id, meta] : items) {
    for (const std::string& c : meta.categories) categories.insert(c);
    std::set<std::string> seen;
    for (const auto& [tag, count] : meta.tags) {
      const std::string norm = normalize_tag(tag);
      if (norm.empty()) continue;
      if (metric == ConceptFrequency::applications)
        tag_freq[norm] += count;
      else if (seen.insert(norm).second)
        tag_freq[norm] += 1;
    }
  }
  g.category_nodes.assign(categories.begin(), categories.end());
  for (const auto& [tag, freq] : tag_freq)
    if (freq >= min_concept_freq) g.concept_nodes.push_back(tag);

  for (ItemId id : g.item_nodes) {
    const ItemMeta& meta = items.at(id);
    std::vector<int> cats;
    for (const std::string& c : meta.categories) {
      const int idx = g.category_index(c);
      if (idx >= 0) cats.push_back(idx);
    }
    std::sort(cats.begin(), cats.end());
    cats.erase(std::unique(cats.begin(), cats.end()), cats.end());
    g.n_item_category_edges += cats.size();
    if (!cats.empty()) g.item_categories.emplace(id, std::move(cats));

    std::vector<int> cons;
    for (const auto& [tag, count] : meta.tags) {
      const int idx = g.concept_index(normalize_tag(tag));
      if (idx >= 0) cons.push_back(idx);
    }
    std::sort(cons.begin(), cons.end());
    cons.erase(std::unique(cons.begin(), cons.end()), cons.end());
    g.n_item_concept_edges += cons.size();
    if (!cons.empty()) g.item_concepts.emplace(id, std::move(cons));
  }

  // Co-occurrence via the concept->items inverted index; an unordered pair
  // becomes an edge once its shared-concept count reaches two.
  std::vector<std::vector<ItemId>> concept_items(g.concept_nodes.size());
  for (ItemId id : g.item_nodes)
    for (int c : g.concepts_of(id)) concept_items[c].push_back(id);
  struct PairHash {
    std::size_t operator()(const std::pair<ItemId, ItemId>& p) const {
      return splitmix64(static_cast<std::uint64_t>(p.first) * 0x9e3779b9u ^
                        static_cast<std::uint64_t>(p.second));
    }
  };
  std::unordered_map<std::pair<ItemId, ItemId>, int, PairHash> pair_counts;
  for (const std::vector<ItemId>& members : concept_items) {
    for (std::size_t i = 0; i < members.size(); ++i)
      for (std::size_t j = i + 1; j < members.size(); ++j)
        ++pair_counts[std::minmax(members[i], members[j])];
  }
  for (const auto& [pair, count] : pair_counts)
    if (count >= 2) g.item_item_edges.push_back(pair);
  std::sort(g.item_item_edges.begin(), g.item_item_edges.end());
  return g;
}

int shared_concepts(const HeteroGraph& graph,
                    const std::unordered_set<ItemId>& history_items,
                    ItemId candidate) {
  const std::vector<int>& cand = graph.concepts_of(candidate);
  if (cand.empty()) return 0;
  std::unordered_set<int> history_concepts;
  for (ItemId item : history_items)
    for (int c : graph.concepts_of(item)) history_concepts.insert(c);
  int shared = 0;
  for (int c : cand)
    if (history_concepts.count(c)) ++shared;
  return shared;
}

void save_graph(const HeteroGraph& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write graph file: " + path);
  out << "heterograph\tv1\t" << g.min_concept_freq << "\n";
  for (ItemId id : g.item_nodes) out << "item\t" << id << "\n";
  for (const std::string& c : g.category_nodes) out << "category\t" << c << "\n";
  for (const std::string& c : g.concept_nodes) out << "concept\t" << c << "\n";
  for (ItemId id : g.item_nodes) {
    for (int c : g.categories_of(id))
      out << "edge_ic\t" << id << "\t" << g.category_nodes[c] << "\n";
    for (int c : g.concepts_of(id))
      out << "edge_it\t" << id << "\t" << g.concept_nodes[c] << "\n";
  }
  for (const auto& [a, b] : g.item_item_edges)
    out << "edge_ii\t" << a << "\t" << b << "\n";
}

HeteroGraph load_graph(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open graph file: " + path);
  HeteroGraph g;
  std::string line;
  if (!std::getline(in, line) || line.rfind("heterograph\tv1\t", 0) != 0)
    throw DataError(path + ": not a graph file");
  g.min_concept_freq = std::stoi(line.substr(line.rfind('\t') + 1));
  std::vector<std::pair<ItemId, std::string>> ic, it;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::size_t t1 = line.find('\t');
    if (t1 == std::string::npos) throw DataError(path + ": malformed line");
    const std::string kind = line.substr(0, t1);
    const std::string rest = line.substr(t1 + 1);
    if (kind == "item") {
      g.item_nodes.push_back(std::stoll(rest));
    } else if (kind == "category") {
      g.category_nodes.push_back(rest);
    } else if (kind == "concept") {
      g.concept_nodes.push_back(rest);
    } else {
      const std::size_t t2 = rest.find('\t');
      if (t2 == std::string::npos) throw DataError(path + ": malformed edge");
      const ItemId a = std::stoll(rest.substr(0, t2));
      const std::string b = rest.substr(t2 + 1);
      if (kind == "edge_ic")
        ic.emplace_back(a, b);
      else if (kind == "edge_it")
        it.emplace_back(a, b);
      else if (kind == "edge_ii")
        g.item_item_edges.emplace_back(a, std::stoll(b));
      else
        throw DataError(path + ": unknown record '" + kind + "'");
    }
  }
  for (const auto& [item, label] : ic) {
    const int idx = g.category_index(label);
    if (idx < 0) throw DataError(path + ": edge to unknown category " + label);
    g.item_categories[item].push_back(idx);
    ++g.n_item_category_edges;
  }
  for (const auto& [item, label] : it) {
    const int idx = g.concept_index(label);
    if (idx < 0) throw DataError(path + ": edge to unknown concept " + label);
    g.item_concepts[item].push_back(idx);
    ++g.n_item_concept_edges;
  }
  return g;
}

}  // namespace irlrec
