#pragma once

// Accuracy, macro-F1 and the two-level weighted accuracy used by the
// Fake News Challenge: +0.25 for getting the related/unrelated split
// right, a further +0.75 for the exact label on related examples. The
// default normalizer is the maximum achievable score; dividing by the
// raw example count is available as the literal variant.

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "stance/corpus.hpp"

namespace stance {

enum class WeightedNorm { max_achievable, total_examples };

struct ScoreReport {
  double accuracy = 0.0;           // percent
  double macro_f1 = 0.0;           // percent
  double weighted_accuracy = 0.0;  // percent
  std::array<std::array<long, kNumStances>, kNumStances> confusion{};  // [gold][pred]
  long n = 0;

  nlohmann::json to_json() const {
    nlohmann::json conf = nlohmann::json::array();
    for (int g = 0; g < kNumStances; ++g) {
      nlohmann::json row = nlohmann::json::array();
      for (int p = 0; p < kNumStances; ++p) row.push_back(confusion[g][p]);
      conf.push_back(std::move(row));
    }
    return {{"accuracy", accuracy},
            {"macro_f1", macro_f1},
            {"weighted_accuracy", weighted_accuracy},
            {"confusion", std::move(conf)},
            {"labels", {"agree", "disagree", "discuss", "unrelated"}},
            {"n", n}};
  }
};

inline void check_lengths(const std::vector<Stance>& gold,
                          const std::vector<Stance>& pred) {
  if (gold.size() != pred.size())
    throw std::invalid_argument("gold and prediction lengths differ");
  if (gold.empty()) throw std::invalid_argument("empty evaluation set");
}

inline double accuracy(const std::vector<Stance>& gold,
                       const std::vector<Stance>& pred) {
  check_lengths(gold, pred);
  long correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i)
    if (gold[i] == pred[i]) ++correct;
  return 100.0 * correct / gold.size();
}

// Mean per-class F1 over all four classes; a class with neither gold
// instances nor predictions contributes zero.
inline double macro_f1(const std::vector<Stance>& gold,
                       const std::vector<Stance>& pred) {
  check_lengths(gold, pred);
  double sum = 0.0;
  for (int c = 0; c < kNumStances; ++c) {
    long tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      bool g = static_cast<int>(gold[i]) == c;
      bool p = static_cast<int>(pred[i]) == c;
      tp += g && p;
      fp += !g && p;
      fn += g && !p;
    }
    long denom = 2 * tp + fp + fn;
    sum += denom == 0 ? 0.0 : 2.0 * tp / denom;
  }
  return 100.0 * sum / kNumStances;
}

inline double weighted_accuracy(const std::vector<Stance>& gold,
                                const std::vector<Stance>& pred,
                                WeightedNorm norm = WeightedNorm::max_achievable) {
  check_lengths(gold, pred);
  double score = 0.0, max_score = 0.0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    bool gold_unrelated = gold[i] == Stance::unrelated;
    bool pred_unrelated = pred[i] == Stance::unrelated;
    if (gold_unrelated) {
      max_score += 0.25;
      if (pred_unrelated) score += 0.25;
    } else {
      max_score += 1.0;
      if (!pred_unrelated) score += 0.25;
      if (gold[i] == pred[i]) score += 0.75;
    }
  }
  double denom = norm == WeightedNorm::max_achievable
                     ? max_score
                     : static_cast<double>(gold.size());
  return denom == 0.0 ? 0.0 : 100.0 * score / denom;
}

inline ScoreReport score(const std::vector<Stance>& gold,
                         const std::vector<Stance>& pred,
                         WeightedNorm norm = WeightedNorm::max_achievable) {
  check_lengths(gold, pred);
  ScoreReport rep;
  rep.n = static_cast<long>(gold.size());
  for (std::size_t i = 0; i < gold.size(); ++i)
    ++rep.confusion[static_cast<int>(gold[i])][static_cast<int>(pred[i])];
  rep.accuracy = accuracy(gold, pred);
  rep.macro_f1 = macro_f1(gold, pred);
  rep.weighted_accuracy = weighted_accuracy(gold, pred, norm);
  return rep;
}

// Labels every example with the same stance and scores that.
inline ScoreReport constant_baseline(Stance label,
                                     const std::vector<Stance>& gold,
                                     WeightedNorm norm = WeightedNorm::max_achievable) {
  std::vector<Stance> pred(gold.size(), label);
  return score(gold, pred, norm);
}

}  // namespace stance
