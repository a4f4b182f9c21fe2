#include "irlrec/text_index.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace irlrec {

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string tok;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      tok += static_cast<char>(std::tolower(c));
    } else if (!tok.empty()) {
      if (tok.size() > 1) out.push_back(tok);
      tok.clear();
    }
  }
  if (tok.size() > 1) out.push_back(tok);
  return out;
}

std::string normalize_tag(const std::string& tag) {
  std::string out;
  bool pending_space = false;
  for (unsigned char c : tag) {
    if (std::isspace(c)) {
      pending_space = !out.empty();
    } else {
      if (pending_space) out += ' ';
      pending_space = false;
      out += static_cast<char>(std::tolower(c));
    }
  }
  return out;
}

std::string item_document(const ItemMeta& item, int top_tags) {
  std::string doc = item.title;
  for (const std::string& cat : item.categories) {
    if (!doc.empty()) doc += ' ';
    doc += cat;
  }
  if (top_tags > 0 && !item.tags.empty()) {
    std::map<std::string, int> normalized;
    for (const auto& [tag, count] : item.tags) {
      const std::string norm = normalize_tag(tag);
      if (!norm.empty()) normalized[norm] += count;
    }
    std::vector<std::pair<std::string, int>> ranked(normalized.begin(),
                                                    normalized.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    const std::size_t keep =
        std::min<std::size_t>(ranked.size(), static_cast<std::size_t>(top_tags));
    for (std::size_t i = 0; i < keep; ++i) {
      if (!doc.empty()) doc += ' ';
      doc += ranked[i].first;
    }
  }
  return doc;
}

double sparse_dot(const SparseVec& a, const SparseVec& b) {
  double dot = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i].first == b[j].first) {
      dot += a[i].second * b[j].second;
      ++i;
      ++j;
    } else if (a[i].first < b[j].first) {
      ++i;
    } else {
      ++j;
    }
  }
  return dot;
}

double sparse_norm(const SparseVec& a) {
  double s = 0.0;
  for (const auto& [idx, v] : a) s += v * v;
  return std::sqrt(s);
}

namespace {

void normalize(SparseVec& v) {
  const double n = sparse_norm(v);
  if (n == 0.0) return;
  for (auto& [idx, val] : v) val /= n;
}

}  // namespace

SparseVec TfIdfIndex::vectorize_counts(
    const std::unordered_map<int, double>& counts) const {
  SparseVec v;
  v.reserve(counts.size());
  for (const auto& [idx, count] : counts)
    if (count > 0.0) v.emplace_back(idx, count * idf[idx]);
  std::sort(v.begin(), v.end());
  normalize(v);
  return v;
}

SparseVec TfIdfIndex::vectorize(const std::string& text) const {
  std::unordered_map<int, double> counts;
  for (const std::string& tok : tokenize(text)) {
    auto it = vocabulary.find(tok);
    if (it != vocabulary.end()) counts[it->second] += 1.0;
  }
  return vectorize_counts(counts);
}

TfIdfIndex build_text_index(const std::map<ItemId, std::string>& documents) {
  TfIdfIndex index;
  std::unordered_map<ItemId, std::unordered_map<std::string, int>> term_counts;
  std::map<std::string, int> df;
  for (const auto& [item, text] : documents) {
    auto& counts = term_counts[item];
    for (const std::string& tok : tokenize(text)) ++counts[tok];
    for (const auto& [term, count] : counts) ++df[term];
  }
  int next = 0;
  for (const auto& [term, freq] : df) index.vocabulary.emplace(term, next++);
  const double n_docs = static_cast<double>(documents.size());
  index.idf.resize(next);
  for (const auto& [term, freq] : df)
    index.idf[index.vocabulary[term]] =
        std::log((1.0 + n_docs) / (1.0 + freq)) + 1.0;

  for (const auto& [item, counts] : term_counts) {
    SparseVec raw;
    raw.reserve(counts.size());
    for (const auto& [term, count] : counts)
      raw.emplace_back(index.vocabulary[term], static_cast<double>(count));
    std::sort(raw.begin(), raw.end());
    SparseVec weighted = raw;
    for (auto& [idx, v] : weighted) v *= index.idf[idx];
    normalize(weighted);
    index.doc_counts.emplace(item, std::move(raw));
    index.doc_vectors.emplace(item, std::move(weighted));
  }
  return index;
}

double text_similarity(const TfIdfIndex& index, const std::string& query_doc,
                       ItemId item) {
  auto it = index.doc_vectors.find(item);
  if (it == index.doc_vectors.end())
    throw DataError("text_similarity: item not indexed: " +
                    std::to_string(item));
  return sparse_dot(index.vectorize(query_doc), it->second);
}

}  // namespace irlrec
