#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "irlrec/graph.hpp"
#include "irlrec/text_index.hpp"
#include "testutil.hpp"

using namespace irlrec;
using testutil::make_item;

TEST_CASE("tokenize lowercases, splits and drops single characters") {
  CHECK(tokenize("Heat, The (1995)") ==
        std::vector<std::string>{"heat", "the", "1995"});
  CHECK(tokenize("a b c") == std::vector<std::string>{});
  CHECK(tokenize("Sci-Fi") == std::vector<std::string>{"sci", "fi"});
}

TEST_CASE("normalize_tag trims and collapses whitespace") {
  CHECK(normalize_tag("  Film   Noir ") == "film noir");
  CHECK(normalize_tag("NOIR") == "noir");
  CHECK(normalize_tag("   ") == "");
}

TEST_CASE("item_document keeps title, categories and top tags") {
  const ItemMeta heat = make_item(1, "Heat", {"Action", "Crime"},
                                  {{"heist", 3}, {"pacino", 1}});
  const std::string doc = item_document(heat, 1);
  CHECK(tokenize(doc) ==
        std::vector<std::string>{"heat", "action", "crime", "heist"});

  CHECK(item_document(make_item(2, "", {}), 10).empty());

  const std::string no_tags = item_document(heat, 0);
  CHECK(tokenize(no_tags) ==
        std::vector<std::string>{"heat", "action", "crime"});
}

TEST_CASE("item_document ranks tags by frequency with lexicographic ties") {
  const ItemMeta m = make_item(1, "", {}, {{"zz", 2}, {"aa", 2}, {"mm", 5}});
  CHECK(tokenize(item_document(m, 2)) == std::vector<std::string>{"mm", "aa"});
}

TEST_CASE("build_graph: concepts respect the frequency threshold") {
  std::unordered_map<ItemId, ItemMeta> items;
  items.emplace(1, make_item(1, "One", {"A"}, {{"rare", 1}, {"common", 3}}));
  items.emplace(2, make_item(2, "Two", {"B"}, {{"common", 2}}));
  const HeteroGraph g = build_graph(items, 5);
  CHECK(g.concept_nodes == std::vector<std::string>{"common"});
  CHECK(g.category_nodes == std::vector<std::string>{"A", "B"});
  CHECK(g.item_nodes == std::vector<ItemId>{1, 2});
  CHECK(g.n_item_category_edges == 2);
  CHECK(g.n_item_concept_edges == 2);

  // "common" has 5 applications but only 2 carrying items, so the
  // distinct-item metric drops it at the same threshold.
  const HeteroGraph by_items = build_graph(items, 5, ConceptFrequency::items);
  CHECK(by_items.concept_nodes.empty());
  const HeteroGraph by_items2 = build_graph(items, 2, ConceptFrequency::items);
  CHECK(by_items2.concept_nodes == std::vector<std::string>{"common"});
}

TEST_CASE("build_graph: two shared concepts make one edge, one does not") {
  std::unordered_map<ItemId, ItemMeta> items;
  items.emplace(1, make_item(1, "", {}, {{"x", 1}, {"y", 1}}));
  items.emplace(2, make_item(2, "", {}, {{"x", 1}, {"y", 1}}));
  items.emplace(3, make_item(3, "", {}, {{"x", 1}}));
  const HeteroGraph g = build_graph(items, 1);
  REQUIRE(g.item_item_edges.size() == 1);
  CHECK(g.item_item_edges[0] == std::make_pair(ItemId{1}, ItemId{2}));
}

TEST_CASE("build_graph: tag-free corpus yields no concepts and no edges") {
  std::unordered_map<ItemId, ItemMeta> items;
  items.emplace(1, make_item(1, "One", {"A"}));
  items.emplace(2, make_item(2, "Two", {"A"}));
  const HeteroGraph g = build_graph(items, 1);
  CHECK(g.concept_nodes.empty());
  CHECK(g.item_item_edges.empty());
  CHECK(g.n_item_concept_edges == 0);
}

TEST_CASE("build_graph matches the brute-force pairwise oracle") {
  std::mt19937_64 rng(99);
  std::unordered_map<ItemId, ItemMeta> items;
  const std::vector<std::string> vocab = {"t0", "t1", "t2", "t3",
                                          "t4", "t5", "t6", "t7"};
  for (ItemId id = 1; id <= 120; ++id) {
    std::vector<std::pair<std::string, int>> tags;
    for (const std::string& t : vocab)
      if (next_below(rng, 3) == 0) tags.emplace_back(t, 1);
    items.emplace(id, make_item(id, "x", {}, tags));
  }
  const HeteroGraph g = build_graph(items, 1);

  std::set<std::pair<ItemId, ItemId>> expected;
  for (ItemId a = 1; a <= 120; ++a) {
    for (ItemId b = a + 1; b <= 120; ++b) {
      std::set<std::string> ta;
      std::set<std::string> shared;
      for (const auto& [t, c] : items.at(a).tags) ta.insert(t);
      for (const auto& [t, c] : items.at(b).tags)
        if (ta.count(t)) shared.insert(t);
      if (shared.size() >= 2) expected.emplace(a, b);
    }
  }
  const std::set<std::pair<ItemId, ItemId>> got(g.item_item_edges.begin(),
                                                g.item_item_edges.end());
  CHECK(got == expected);
}

TEST_CASE("raising the concept threshold never adds nodes or edges") {
  std::mt19937_64 rng(3);
  std::unordered_map<ItemId, ItemMeta> items;
  for (ItemId id = 1; id <= 40; ++id) {
    std::vector<std::pair<std::string, int>> tags;
    for (int t = 0; t < 6; ++t)
      if (next_below(rng, 2) == 0)
        tags.emplace_back("t" + std::to_string(t),
                          1 + static_cast<int>(next_below(rng, 3)));
    items.emplace(id, make_item(id, "x", {}, tags));
  }
  std::size_t prev_concepts = SIZE_MAX;
  std::size_t prev_edges = SIZE_MAX;
  for (int threshold = 1; threshold <= 8; ++threshold) {
    const HeteroGraph g = build_graph(items, threshold);
    CHECK(g.concept_nodes.size() <= prev_concepts);
    CHECK(g.item_item_edges.size() <= prev_edges);
    prev_concepts = g.concept_nodes.size();
    prev_edges = g.item_item_edges.size();
  }
}

TEST_CASE("tf-idf: identical documents have cosine 1, disjoint have 0") {
  std::map<ItemId, std::string> docs{{1, "alpha beta"},
                                     {2, "alpha beta"},
                                     {3, "gamma delta"}};
  const TfIdfIndex index = build_text_index(docs);
  CHECK(sparse_dot(index.doc_vectors.at(1), index.doc_vectors.at(2)) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(sparse_dot(index.doc_vectors.at(1), index.doc_vectors.at(3)) == 0.0);
}

TEST_CASE("tf-idf matches the hand-computed weighting") {
  // Corpus {"aa bb", "aa cc", "cc cc"}; the oracle below reimplements
  // tf * (ln((1+N)/(1+df)) + 1) with L2 normalization from scratch.
  std::map<ItemId, std::string> docs{{1, "aa bb"}, {2, "aa cc"}, {3, "cc cc"}};
  const TfIdfIndex index = build_text_index(docs);

  const double n = 3.0;
  const double idf_aa = std::log((1.0 + n) / (1.0 + 2.0)) + 1.0;
  const double idf_bb = std::log((1.0 + n) / (1.0 + 1.0)) + 1.0;
  const double idf_cc = std::log((1.0 + n) / (1.0 + 2.0)) + 1.0;

  const double n1 = std::sqrt(idf_aa * idf_aa + idf_bb * idf_bb);
  const double n2 = std::sqrt(idf_aa * idf_aa + idf_cc * idf_cc);
  const double expected12 = (idf_aa * idf_aa) / (n1 * n2);
  CHECK(sparse_dot(index.doc_vectors.at(1), index.doc_vectors.at(2)) ==
        doctest::Approx(expected12).epsilon(1e-12));

  // doc3 is a single repeated term, so its normalized vector is a unit
  // vector and cosine(doc2, doc3) is cc's weight inside doc2.
  const double expected23 = idf_cc / n2;
  CHECK(sparse_dot(index.doc_vectors.at(2), index.doc_vectors.at(3)) ==
        doctest::Approx(expected23).epsilon(1e-12));

  CHECK(text_similarity(index, "aa", 1) ==
        doctest::Approx(idf_aa / n1).epsilon(1e-12));
}

TEST_CASE("text_similarity edge cases") {
  std::map<ItemId, std::string> docs{{1, "alpha beta"}, {2, "gamma"}};
  const TfIdfIndex index = build_text_index(docs);
  CHECK(text_similarity(index, "alpha beta", 1) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(text_similarity(index, "", 1) == 0.0);
  CHECK(text_similarity(index, "unknownterm", 1) == 0.0);
  CHECK_THROWS_AS(text_similarity(index, "alpha", 99), DataError);
}

TEST_CASE("cosine is symmetric and bounded on random docs") {
  std::mt19937_64 rng(17);
  std::map<ItemId, std::string> docs;
  const std::vector<std::string> words = {"aa", "bb", "cc", "dd", "ee"};
  for (ItemId id = 1; id <= 20; ++id) {
    std::string d;
    for (const std::string& w : words)
      for (std::uint64_t k = next_below(rng, 3); k > 0; --k) d += w + " ";
    docs[id] = d;
  }
  const TfIdfIndex index = build_text_index(docs);
  for (ItemId a = 1; a <= 20; ++a) {
    for (ItemId b = a; b <= 20; ++b) {
      const double ab =
          sparse_dot(index.doc_vectors.at(a), index.doc_vectors.at(b));
      const double ba =
          sparse_dot(index.doc_vectors.at(b), index.doc_vectors.at(a));
      CHECK(ab == ba);
      CHECK(ab >= 0.0);
      CHECK(ab <= 1.0 + 1e-12);
    }
  }
}

TEST_CASE("shared_concepts counts the history-candidate intersection") {
  std::unordered_map<ItemId, ItemMeta> items;
  items.emplace(1, make_item(1, "", {}, {{"x", 1}, {"y", 1}, {"z", 1}}));
  items.emplace(2, make_item(2, "", {}, {{"x", 1}, {"w", 1}}));
  items.emplace(3, make_item(3, "", {}, {{"y", 1}, {"z", 1}, {"w", 1}}));
  items.emplace(4, make_item(4, "", {}));
  const HeteroGraph g = build_graph(items, 1);

  CHECK(shared_concepts(g, {4}, 1) == 0);        // untagged history
  CHECK(shared_concepts(g, {1, 2}, 3) == 3);     // subset case: y, z, w
  CHECK(shared_concepts(g, {2}, 1) == 1);        // only x shared
  CHECK(shared_concepts(g, {1, 2, 3}, 4) == 0);  // untagged candidate

  // Brute-force oracle over all (history pair, candidate) combinations.
  const std::vector<ItemId> ids = {1, 2, 3, 4};
  for (ItemId h1 : ids) {
    for (ItemId h2 : ids) {
      for (ItemId cand : ids) {
        std::set<std::string> hist;
        for (const auto& [t, c] : items.at(h1).tags) hist.insert(t);
        for (const auto& [t, c] : items.at(h2).tags) hist.insert(t);
        int expected = 0;
        for (const auto& [t, c] : items.at(cand).tags)
          if (hist.count(t)) ++expected;
        const int got = shared_concepts(g, {h1, h2}, cand);
        CHECK(got == expected);
        CHECK(got <= static_cast<int>(g.concepts_of(cand).size()));
      }
    }
  }
}

TEST_CASE("graph save/load round-trips nodes and edges") {
  testutil::TempDir dir("graphio");
  std::unordered_map<ItemId, ItemMeta> items;
  items.emplace(1, make_item(1, "One", {"A", "B"}, {{"x", 2}, {"y", 2}}));
  items.emplace(2, make_item(2, "Two", {"B"}, {{"x", 2}, {"y", 1}}));
  const HeteroGraph g = build_graph(items, 2);
  save_graph(g, dir.file("g.tsv"));
  const HeteroGraph loaded = load_graph(dir.file("g.tsv"));
  CHECK(loaded.item_nodes == g.item_nodes);
  CHECK(loaded.category_nodes == g.category_nodes);
  CHECK(loaded.concept_nodes == g.concept_nodes);
  CHECK(loaded.item_item_edges == g.item_item_edges);
  CHECK(loaded.n_item_category_edges == g.n_item_category_edges);
  CHECK(loaded.n_item_concept_edges == g.n_item_concept_edges);
  CHECK(loaded.categories_of(1) == g.categories_of(1));
  CHECK(loaded.concepts_of(2) == g.concepts_of(2));
}
