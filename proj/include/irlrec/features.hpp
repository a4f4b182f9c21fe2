#pragma once

#include <unordered_map>
#include <vector>

#include "irlrec/dataset.hpp"
#include "irlrec/graph.hpp"
#include "irlrec/retrieval.hpp"
#include "irlrec/text_index.hpp"

namespace irlrec {

// Fixed feature layout: user block (|categories| + 2), candidate block
// (|categories| + 1), interaction scalar, then optionally the four
// graph-derived features in the order text similarity, community support,
// shared concepts, community average feedback.
struct FeatureLayout {
  int n_categories = 0;
  bool graph_features = true;

  int d_base() const { return 2 * n_categories + 4; }
  int d() const { return d_base() + (graph_features ? 4 : 0); }
};

// Z-score transform with training-set statistics. Population sigma, floored
// at epsilon; constant dimensions map to zero.
struct Standardizer {
  Vec mean;
  Vec sigma;
  static constexpr double kEpsilon = 1e-8;

  bool fitted() const { return mean.size() > 0; }
  void apply(Eigen::Ref<Mat> columns) const;  // columns are samples
  void apply_vector(Eigen::Ref<Vec> x) const;
  Vec unapply(const Vec& z) const;
};

// Columns are samples.
Standardizer fit_standardizer(const Mat& train_columns);

// Streaming fit so the feature matrix never has to be materialized.
class StandardizerAccumulator {
 public:
  explicit StandardizerAccumulator(int d)
      : n_(0), sum_(Vec::Zero(d)), sumsq_(Vec::Zero(d)) {}
  void add(const Vec& x) {
    ++n_;
    sum_ += x;
    sumsq_ += x.cwiseProduct(x);
  }
  void add_columns(const Mat& cols) {
    n_ += cols.cols();
    sum_ += cols.rowwise().sum();
    sumsq_ += cols.cwiseProduct(cols).rowwise().sum();
  }
  Standardizer finish() const;

 private:
  std::int64_t n_;
  Vec sum_;
  Vec sumsq_;
};

// Inputs for one (state, candidate) pair, resolved by the caller.
struct BehavioralInputs {
  int n_prior = 0;
  double delta_days = 0.0;
  int popularity = 0;
};

// User block + candidate block + interaction scalar (d_base dims).
Vec behavioral_features(const Vec& user_distribution,
                        const BehavioralInputs& in,
                        const std::vector<int>& candidate_categories,
                        int n_categories);

// [text similarity, support, shared concepts, community average feedback].
Vec graph_features(double text_sim, const CommunitySignals& signals);

// Binds the immutable experiment structures and writes feature columns.
class FeatureAssembler {
 public:
  FeatureAssembler(const FilteredDataset& data, const HeteroGraph& graph,
                   const TfIdfIndex& index, const FeatureLayout& layout);

  const FeatureLayout& layout() const { return layout_; }
  const HeteroGraph& graph() const { return graph_; }
  const TfIdfIndex& text_index() const { return index_; }
  const FilteredDataset& data() const { return data_; }

  // Fills `out` (a d-vector view) for one candidate at state time t.
  void assemble(const StateBuilder& state, UserId user, std::int64_t t,
                ItemId candidate, const CommunitySignalIndex& signals,
                Eigen::Ref<Vec> out) const;

  // Assembles all candidates as columns of a d x |candidates| matrix.
  void assemble_set(const StateBuilder& state, UserId user, std::int64_t t,
                    const std::vector<ItemId>& candidates,
                    const CommunitySignalIndex& signals, Mat& out) const;

  // Sorted category indices of an item (graph axis), cached.
  const std::vector<int>& candidate_categories(ItemId item) const;

 private:
  const FilteredDataset& data_;
  const HeteroGraph& graph_;
  const TfIdfIndex& index_;
  FeatureLayout layout_;
  mutable std::unordered_map<ItemId, std::vector<int>> category_cache_;
};

}  // namespace irlrec
