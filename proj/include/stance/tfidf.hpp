#pragma once

// TF.IDF vectors and cosine similarity. Weighting is raw term frequency
// times log((1+N)/(1+df)) + 1; the variant is recorded in cache metadata
// so scores stay reproducible. Immutable once fitted.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "stance/corpus.hpp"

namespace stance {

// Sparse vector sorted by token id.
using SparseVec = std::vector<std::pair<int, double>>;

inline double sparse_dot(const SparseVec& a, const SparseVec& b) {
  double s = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i].first < b[j].first) ++i;
    else if (a[i].first > b[j].first) ++j;
    else s += a[i++].second * b[j++].second;
  }
  return s;
}

inline double sparse_norm(const SparseVec& a) {
  double s = 0.0;
  for (auto& [_, w] : a) s += w * w;
  return std::sqrt(s);
}

class TfidfModel {
 public:
  TfidfModel() = default;

  void fit(const std::vector<std::vector<int>>& docs, int vocab_size) {
    df_.assign(vocab_size, 0);
    num_docs_ = static_cast<int>(docs.size());
    std::vector<std::uint8_t> seen(vocab_size, 0);
    for (const auto& doc : docs) {
      for (int id : doc)
        if (countable(id) && !seen[id]) {
          seen[id] = 1;
          ++df_[id];
        }
      for (int id : doc)
        if (countable(id)) seen[id] = 0;
    }
    fitted_ = true;
  }

  bool fitted() const { return fitted_; }
  int num_docs() const { return num_docs_; }
  int dim() const { return static_cast<int>(df_.size()); }
  const std::vector<int>& df() const { return df_; }

  void restore(std::vector<int> df, int num_docs) {
    df_ = std::move(df);
    num_docs_ = num_docs;
    fitted_ = true;
  }

  double idf(int token_id) const {
    return std::log((1.0 + num_docs_) / (1.0 + df_[token_id])) + 1.0;
  }

  SparseVec transform(const std::vector<int>& token_ids) const {
    if (!fitted_) throw std::logic_error("TfidfModel used before fit");
    std::vector<int> ids;
    ids.reserve(token_ids.size());
    for (int id : token_ids)
      if (countable(id)) ids.push_back(id);
    std::sort(ids.begin(), ids.end());
    SparseVec vec;
    std::size_t i = 0;
    while (i < ids.size()) {
      std::size_t j = i;
      while (j < ids.size() && ids[j] == ids[i]) ++j;
      vec.emplace_back(ids[i], static_cast<double>(j - i) * idf(ids[i]));
      i = j;
    }
    return vec;
  }

  static double cosine(const SparseVec& a, const SparseVec& b) {
    double na = sparse_norm(a), nb = sparse_norm(b);
    if (na == 0.0 || nb == 0.0) return 0.0;
    return sparse_dot(a, b) / (na * nb);
  }

  double cosine(const std::vector<int>& a, const std::vector<int>& b) const {
    return cosine(transform(a), transform(b));
  }

 private:
  static bool countable(int id) {
    return id != Vocabulary::kPad && id != Vocabulary::kOov;
  }

  std::vector<int> df_;
  int num_docs_ = 0;
  bool fitted_ = false;
};

}  // namespace stance
