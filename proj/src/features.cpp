#include "irlrec/features.hpp"

#include <algorithm>
#include <cmath>

namespace irlrec {

void Standardizer::apply(Eigen::Ref<Mat> columns) const {
  columns.colwise() -= mean;
  columns.array().colwise() /= sigma.array();
}

void Standardizer::apply_vector(Eigen::Ref<Vec> x) const {
  x = (x - mean).cwiseQuotient(sigma);
}

Vec Standardizer::unapply(const Vec& z) const {
  return z.cwiseProduct(sigma) + mean;
}

Standardizer fit_standardizer(const Mat& train_columns) {
  StandardizerAccumulator acc(static_cast<int>(train_columns.rows()));
  acc.add_columns(train_columns);
  return acc.finish();
}

Standardizer StandardizerAccumulator::finish() const {
  if (n_ == 0) throw DataError("standardizer: empty training set");
  Standardizer s;
  const double n = static_cast<double>(n_);
  s.mean = sum_ / n;
  Vec var = sumsq_ / n - s.mean.cwiseProduct(s.mean);
  s.sigma = var.cwiseMax(0.0).cwiseSqrt().cwiseMax(Standardizer::kEpsilon);
  return s;
}

Vec behavioral_features(const Vec& user_distribution,
                        const BehavioralInputs& in,
                        const std::vector<int>& candidate_categories,
                        int n_categories) {
  if (in.n_prior < 0 || in.delta_days < 0.0 || in.popularity < 0)
    throw UsageError("behavioral features: negative input");
  const int g = n_categories;
  Vec out = Vec::Zero(2 * g + 4);
  out.head(g) = user_distribution;
  out[g] = std::log1p(static_cast<double>(in.n_prior));
  out[g + 1] = std::min(in.delta_days / 365.0, 1.0);
  double dot = 0.0;
  for (int c : candidate_categories) {
    out[g + 2 + c] = 1.0;
    dot += user_distribution[c];
  }
  out[2 * g + 2] = std::log1p(static_cast<double>(in.popularity));
  const double un = user_distribution.norm();
  const double cn = std::sqrt(static_cast<double>(candidate_categories.size()));
  out[2 * g + 3] = (un == 0.0 || cn == 0.0) ? 0.0 : dot / (un * cn);
  return out;
}

Vec graph_features(double text_sim, const CommunitySignals& signals) {
  Vec out(4);
  out << text_sim, signals.support,
      static_cast<double>(signals.shared_concept_count), signals.avg_feedback;
  return out;
}

FeatureAssembler::FeatureAssembler(const FilteredDataset& data,
                                   const HeteroGraph& graph,
                                   const TfIdfIndex& index,
                                   const FeatureLayout& layout)
    : data_(data), graph_(graph), index_(index), layout_(layout) {
  if (layout.n_categories != static_cast<int>(graph.category_nodes.size()))
    throw UsageError("feature layout does not match graph category count");
}

const std::vector<int>& FeatureAssembler::candidate_categories(
    ItemId item) const {
  auto it = category_cache_.find(item);
  if (it != category_cache_.end()) return it->second;
  std::vector<int> idx;
  auto meta = data_.items.find(item);
  if (meta != data_.items.end()) {
    for (const std::string& c : meta->second.categories) {
      const int i = graph_.category_index(c);
      if (i >= 0) idx.push_back(i);
    }
    std::sort(idx.begin(), idx.end());
    idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
  }
  return category_cache_.emplace(item, std::move(idx)).first->second;
}

void FeatureAssembler::assemble(const StateBuilder& state, UserId user,
                                std::int64_t t, ItemId candidate,
                                const CommunitySignalIndex& signals,
                                Eigen::Ref<Vec> out) const {
  const int g = layout_.n_categories;
  if (out.size() != layout_.d())
    throw UsageError("assemble: output size does not match layout d");
  out.setZero();

  const Vec& dist = state.category_distribution();
  out.head(g) = dist;
  out[g] = std::log1p(static_cast<double>(data_.prior_interactions(user, t)));
  double delta_days = 365.0;  // no prior interaction: maximal staleness
  if (auto last = data_.last_interaction_before(user, t))
    delta_days = static_cast<double>(t - *last) / 86400.0;
  out[g + 1] = std::min(delta_days / 365.0, 1.0);

  const std::vector<int>& cats = candidate_categories(candidate);
  double dot = 0.0;
  for (int c : cats) {
    out[g + 2 + c] = 1.0;
    dot += dist[c];
  }
  out[2 * g + 2] =
      std::log1p(static_cast<double>(data_.item_count_before(candidate, t)));
  const double un = dist.norm();
  const double cn = std::sqrt(static_cast<double>(cats.size()));
  out[2 * g + 3] = (un == 0.0 || cn == 0.0) ? 0.0 : dot / (un * cn);

  if (layout_.graph_features) {
    auto doc = index_.doc_vectors.find(candidate);
    const double text_sim =
        doc == index_.doc_vectors.end()
            ? 0.0
            : sparse_dot(state.query_vector(), doc->second);
    out[2 * g + 4] = text_sim;
    out[2 * g + 5] = signals.support(candidate);
    out[2 * g + 6] = static_cast<double>(state.shared_concepts_with(candidate));
    out[2 * g + 7] = signals.avg_feedback(candidate);
  }

  if (!out.allFinite())
    throw NumericError("non-finite feature for user " + std::to_string(user) +
                       " candidate " + std::to_string(candidate));
}

void FeatureAssembler::assemble_set(const StateBuilder& state, UserId user,
                                    std::int64_t t,
                                    const std::vector<ItemId>& candidates,
                                    const CommunitySignalIndex& signals,
                                    Mat& out) const {
  out.resize(layout_.d(), static_cast<Eigen::Index>(candidates.size()));
  for (std::size_t i = 0; i < candidates.size(); ++i)
    assemble(state, user, t, candidates[i], signals,
             out.col(static_cast<Eigen::Index>(i)));
  }

}  // namespace irlrec
