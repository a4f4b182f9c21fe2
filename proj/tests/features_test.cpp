#include <doctest.h>

#include <cmath>

#include "irlrec/features.hpp"
#include "testutil.hpp"

using namespace irlrec;
using testutil::make_item;

TEST_CASE("layout arithmetic: 20 categories give d = 48, base 44") {
  FeatureLayout layout;
  layout.n_categories = 20;
  layout.graph_features = true;
  CHECK(layout.d_base() == 44);
  CHECK(layout.d() == 48);
  layout.graph_features = false;
  CHECK(layout.d() == 44);
}

TEST_CASE("behavioral features: analytic spot values") {
  Vec dist(2);
  dist << 0.5, 0.5;
  BehavioralInputs in;
  in.n_prior = 0;
  in.delta_days = 730.0;
  in.popularity = 0;
  const Vec f = behavioral_features(dist, in, {0}, 2);
  REQUIRE(f.size() == 8);
  CHECK(f[2] == 0.0);  // log1p(0) activity
  CHECK(f[3] == 1.0);  // clamped recency
  CHECK(f[6] == 0.0);  // log1p(0) popularity

  // Parallel distribution and indicator: cosine 1.
  Vec onehot(2);
  onehot << 1.0, 0.0;
  const Vec g = behavioral_features(onehot, in, {0}, 2);
  CHECK(g[7] == doctest::Approx(1.0));

  CHECK_THROWS_AS(behavioral_features(dist, {-1, 0.0, 0}, {0}, 2), UsageError);
}

TEST_CASE("graph_features packs the four signals in order") {
  CommunitySignals s;
  s.support = 0.25;
  s.avg_feedback = 3.5;
  s.shared_concept_count = 2;
  const Vec f = graph_features(0.75, s);
  REQUIRE(f.size() == 4);
  CHECK(f[0] == 0.75);
  CHECK(f[1] == 0.25);
  CHECK(f[2] == 2.0);
  CHECK(f[3] == 3.5);
}

TEST_CASE("standardizer: z-scores, constant dims, invertibility") {
  Mat x(2, 2);
  x << 1.0, 3.0,  // non-constant dim
      5.0, 5.0;   // constant dim
  const Standardizer s = fit_standardizer(x);

  // Two-point set {1, 3}: population sigma 1, so z-scores are -1 and +1.
  Vec a = x.col(0), b = x.col(1);
  s.apply_vector(a);
  s.apply_vector(b);
  CHECK(a[0] == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(b[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(a[1] == 0.0);  // constant dim maps to zero
  CHECK(b[1] == 0.0);

  // Fitting-set mean within 1e-9 of zero.
  Mat z = x;
  s.apply(z);
  CHECK(std::abs(z.row(0).mean()) < 1e-9);

  // Round trip on the non-constant dim.
  const Vec back = s.unapply(a);
  CHECK(back[0] == doctest::Approx(1.0).epsilon(1e-9));

  CHECK_THROWS_AS(StandardizerAccumulator(2).finish(), DataError);
}

TEST_CASE("standardizer streaming fit equals batch fit") {
  std::mt19937_64 rng(11);
  Mat x(3, 50);
  for (int j = 0; j < 50; ++j)
    for (int i = 0; i < 3; ++i)
      x(i, j) = static_cast<double>(next_below(rng, 1000)) / 100.0;
  const Standardizer batch = fit_standardizer(x);
  StandardizerAccumulator acc(3);
  for (int j = 0; j < 50; ++j) acc.add(x.col(j));
  const Standardizer stream = acc.finish();
  CHECK((batch.mean - stream.mean).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((batch.sigma - stream.sigma).cwiseAbs().maxCoeff() < 1e-12);
}

namespace {

// Two categories, four items, hand-traceable tags.
struct HandFixture {
  RawData raw;
  FilteredDataset data;
  HeteroGraph graph;
  TfIdfIndex index;

  HandFixture() {
    raw.items.emplace(101, make_item(101, "alphafilm", {"Action"},
                                     {{"x", 2}, {"y", 2}}));
    raw.items.emplace(102, make_item(102, "betafilm", {"Action"}, {{"x", 2}}));
    raw.items.emplace(103, make_item(103, "gammafilm", {"Drama"},
                                     {{"y", 2}, {"z", 2}}));
    raw.items.emplace(104, make_item(104, "deltafilm", {"Drama"}));
    auto add = [&](UserId u, ItemId i, double f, std::int64_t t) {
      raw.interactions.push_back({u, i, f, t});
    };
    add(1, 101, 5.0, 100);
    add(1, 103, 4.5, 200);
    add(2, 102, 4.0, 50);  // gives item 102 a popularity event before t=300
    add(2, 104, 5.0, 60);
    data = filter_dataset(raw, 0, 0, 0, {});
    graph = build_graph(raw.items, 1);
    std::map<ItemId, std::string> docs;
    for (const auto& [id, meta] : raw.items)
      docs.emplace(id, item_document(meta, 10));
    index = build_text_index(docs);
  }
};

}  // namespace

TEST_CASE("assemble matches the hand oracle for every entry") {
  HandFixture f;
  FeatureLayout layout;
  layout.n_categories = 2;  // Action, Drama
  layout.graph_features = true;
  const FeatureAssembler assembler(f.data, f.graph, f.index, layout);

  // Hand community: one member with weight 1.0 who rated the candidate 4.0
  // positively, one member with weight 0.5 who never saw it.
  Community com;
  com.members = {{2, 1.0}, {3, 0.5}};
  std::unordered_map<UserId, std::unordered_map<ItemId, MemberEngagement>>
      member_items;
  member_items[2][102] = {4.0, 1, true};
  const CommunitySignalIndex signals(com, member_items, 3.0);

  StateBuilder state(f.data.positives.at(1), f.graph, f.index, f.data.items,
                     10);
  const std::int64_t t = 300;
  state.advance_to(t);

  Vec phi(layout.d());
  assembler.assemble(state, 1, t, 102, signals, phi);

  // User block: history {101 Action, 103 Drama} -> (0.5, 0.5).
  CHECK(phi[0] == doctest::Approx(0.5));
  CHECK(phi[1] == doctest::Approx(0.5));
  CHECK(phi[2] == doctest::Approx(std::log1p(2.0)));  // two prior events
  const double delta_days = (300.0 - 200.0) / 86400.0;
  CHECK(phi[3] == doctest::Approx(delta_days / 365.0));

  // Candidate block: 102 is Action with one interaction before t=300.
  CHECK(phi[4] == 1.0);
  CHECK(phi[5] == 0.0);
  CHECK(phi[6] == doctest::Approx(std::log1p(1.0)));

  // Interaction scalar: cosine((.5,.5), (1,0)) = 0.5 / sqrt(0.5).
  CHECK(phi[7] == doctest::Approx(0.5 / std::sqrt(0.5)));

  // Graph block, each via its independent upstream oracle.
  const std::string query_doc = item_document(f.raw.items.at(101), 10) + " " +
                                item_document(f.raw.items.at(103), 10);
  CHECK(phi[8] == doctest::Approx(text_similarity(f.index, query_doc, 102))
                      .epsilon(1e-12));
  CHECK(phi[9] == doctest::Approx(0.5));  // 1 of 2 members positive
  CHECK(phi[10] ==
        doctest::Approx(static_cast<double>(shared_concepts(
            f.graph, {101, 103}, 102))));  // {x,y,z} vs {x} -> 1
  CHECK(phi[10] == 1.0);
  CHECK(phi[11] == doctest::Approx(4.0));  // sim-weighted mean of one rating

  // Ablation layout drops exactly the 4 trailing dims.
  FeatureLayout base = layout;
  base.graph_features = false;
  const FeatureAssembler base_assembler(f.data, f.graph, f.index, base);
  Vec phi_base(base.d());
  base_assembler.assemble(state, 1, t, 102, signals, phi_base);
  CHECK(phi_base.size() + 4 == phi.size());
  CHECK((phi.head(base.d()) - phi_base).cwiseAbs().maxCoeff() == 0.0);

  CHECK(phi.allFinite());
}

TEST_CASE("assemble rejects a mismatched output size") {
  HandFixture f;
  FeatureLayout layout;
  layout.n_categories = 2;
  const FeatureAssembler assembler(f.data, f.graph, f.index, layout);
  Community com;
  const CommunitySignalIndex signals(com, {}, 0.0);
  StateBuilder state(f.data.positives.at(1), f.graph, f.index, f.data.items,
                     10);
  Vec wrong(layout.d() + 1);
  CHECK_THROWS_AS(assembler.assemble(state, 1, 300, 102, signals, wrong),
                  UsageError);
}

TEST_CASE("features never depend on interactions at or after the state time") {
  HandFixture clean;
  FeatureLayout layout;
  layout.n_categories = 2;
  layout.graph_features = true;

  auto phi_at_300 = [&](const HandFixture& f) {
    const FeatureAssembler assembler(f.data, f.graph, f.index, layout);
    Community com;
    com.members = {{2, 1.0}};
    std::unordered_map<UserId, std::unordered_map<ItemId, MemberEngagement>>
        member_items;
    member_items[2][102] = {4.0, 1, true};
    const CommunitySignalIndex signals(com, member_items, 3.0);
    StateBuilder state(f.data.positives.at(1), f.graph, f.index, f.data.items,
                       10);
    state.advance_to(300);
    Vec phi(layout.d());
    assembler.assemble(state, 1, 300, 102, signals, phi);
    return phi;
  };
  const Vec before = phi_at_300(clean);

  // Future interactions (>= t) for the query user and for others.
  HandFixture perturbed;
  perturbed.raw.interactions.push_back({1, 104, 5.0, 300});
  perturbed.raw.interactions.push_back({1, 102, 5.0, 350});
  perturbed.raw.interactions.push_back({2, 102, 4.0, 301});
  perturbed.data = filter_dataset(perturbed.raw, 0, 0, 0, {});
  const Vec after = phi_at_300(perturbed);

  CHECK((before - after).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("untagged corpus zeroes the shared-concept feature everywhere") {
  RawData raw;
  raw.items.emplace(1, make_item(1, "one", {"A"}));
  raw.items.emplace(2, make_item(2, "two", {"A"}));
  raw.interactions = {{1, 1, 5.0, 100}, {1, 2, 5.0, 200}};
  FilteredDataset data = filter_dataset(raw, 0, 0, 0, {});
  const HeteroGraph graph = build_graph(raw.items, 1);
  std::map<ItemId, std::string> docs;
  for (const auto& [id, meta] : raw.items)
    docs.emplace(id, item_document(meta, 10));
  const TfIdfIndex index = build_text_index(docs);
  FeatureLayout layout;
  layout.n_categories = 1;
  const FeatureAssembler assembler(data, graph, index, layout);
  Community com;
  const CommunitySignalIndex signals(com, {}, 0.0);
  StateBuilder state(data.positives.at(1), graph, index, data.items, 10);
  state.advance_to(250);
  for (ItemId cand : {1, 2}) {
    Vec phi(layout.d());
    assembler.assemble(state, 1, 250, cand, signals, phi);
    CHECK(phi[layout.d_base() + 2] == 0.0);
  }
}
