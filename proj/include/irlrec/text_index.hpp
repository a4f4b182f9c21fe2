#pragma once

#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "irlrec/common.hpp"
#include "irlrec/dataset.hpp"

namespace irlrec {

// Sparse tf-idf vector: (vocabulary index, weight) pairs sorted by index.
using SparseVec = std::vector<std::pair<int, double>>;

// Lowercase, split on non-alphanumeric runs, drop single-character tokens.
std::vector<std::string> tokenize(const std::string& text);

// Lowercase, trim, collapse internal whitespace.
std::string normalize_tag(const std::string& tag);

// Item text: title, category labels, and the top_tags most frequent
// normalized tags (ties by ascending tag string), whitespace-separated.
std::string item_document(const ItemMeta& item, int top_tags);

double sparse_dot(const SparseVec& a, const SparseVec& b);
double sparse_norm(const SparseVec& a);

// tf = raw count; idf = ln((1 + N) / (1 + df)) + 1; vectors L2-normalized.
struct TfIdfIndex {
  std::map<std::string, int> vocabulary;  // term -> index, lexicographic
  Vec idf;
  std::unordered_map<ItemId, SparseVec> doc_vectors;  // normalized
  std::unordered_map<ItemId, SparseVec> doc_counts;   // raw term counts

  // Build a normalized query vector from raw term counts keyed by vocabulary
  // index. Unknown terms must already be dropped.
  SparseVec vectorize_counts(
      const std::unordered_map<int, double>& counts) const;
  SparseVec vectorize(const std::string& text) const;
};

TfIdfIndex build_text_index(
    const std::map<ItemId, std::string>& documents);

// Cosine of the query text's tf-idf vector and the stored item vector.
// Throws DataError for an unindexed item; zero vectors score 0.
double text_similarity(const TfIdfIndex& index, const std::string& query_doc,
                       ItemId item);

}  // namespace irlrec
