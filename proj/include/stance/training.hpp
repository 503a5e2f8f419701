#pragma once

// Class-balanced training: every epoch draws z = min class count
// instances from each stance without replacement, so the smallest class
// is fully covered from epoch one while the dominant class is sampled
// down. Tracks cumulative per-class coverage, validates each epoch, and
// keeps the parameters of the best validation loss.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <limits>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "stance/cache.hpp"
#include "stance/model.hpp"
#include "stance/nn.hpp"

namespace stance {

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ull * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

struct EpochPlan {
  std::array<std::vector<int>, kNumStances> per_class;  // sampled indices
  std::vector<int> order;  // shuffled concatenation, 4z long
  int z = 0;
};

// Samples z indices per class from the pool, without replacement within
// the epoch. Every class must be represented in the pool.
inline EpochPlan balanced_epoch(const std::vector<Stance>& labels,
                                const std::vector<int>& pool,
                                std::uint64_t seed) {
  std::array<std::vector<int>, kNumStances> by_class;
  for (int idx : pool) by_class[static_cast<int>(labels.at(idx))].push_back(idx);
  std::size_t z = SIZE_MAX;
  for (int c = 0; c < kNumStances; ++c) {
    if (by_class[c].empty())
      throw std::runtime_error(std::string("balanced_epoch: class '") +
                               kStanceNames[c] + "' has no instances");
    z = std::min(z, by_class[c].size());
  }
  EpochPlan plan;
  plan.z = static_cast<int>(z);
  std::mt19937_64 rng(seed);
  for (int c = 0; c < kNumStances; ++c) {
    std::shuffle(by_class[c].begin(), by_class[c].end(), rng);
    by_class[c].resize(z);
    plan.per_class[c] = by_class[c];
    plan.order.insert(plan.order.end(), by_class[c].begin(), by_class[c].end());
  }
  std::shuffle(plan.order.begin(), plan.order.end(), rng);
  return plan;
}

// Cumulative fraction of distinct training instances seen per class.
class CoverageTracker {
 public:
  CoverageTracker(const std::vector<Stance>& labels, const std::vector<int>& pool)
      : labels_(&labels) {
    for (int idx : pool) ++total_[static_cast<int>(labels.at(idx))];
  }

  void observe(const EpochPlan& plan) {
    for (int c = 0; c < kNumStances; ++c)
      for (int idx : plan.per_class[c]) seen_[c].insert(idx);
  }

  std::array<double, kNumStances> fractions() const {
    std::array<double, kNumStances> f{};
    for (int c = 0; c < kNumStances; ++c)
      f[c] = total_[c] ? static_cast<double>(seen_[c].size()) / total_[c] : 0.0;
    return f;
  }

 private:
  const std::vector<Stance>* labels_;
  std::array<std::set<int>, kNumStances> seen_;
  std::array<long, kNumStances> total_{};
};

struct TrainOptions {
  int epochs = 50;
  int patience = 5;
  int batch = 64;
  double lr = 1e-3;
  double val_fraction = 0.2;  // 0 validates on the training pool itself
  std::uint64_t seed = 42;
  bool verbose = true;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  std::array<double, kNumStances> coverage{};
  double wall_time_s = 0.0;
  int z = 0;
};

inline nlohmann::json to_json(const EpochRecord& r) {
  nlohmann::json cov;
  for (int c = 0; c < kNumStances; ++c) cov[kStanceNames[c]] = r.coverage[c];
  return {{"epoch", r.epoch},       {"train_loss", r.train_loss},
          {"val_loss", r.val_loss}, {"coverage", cov},
          {"wall_time_s", r.wall_time_s}, {"z", r.z}};
}

struct TrainResult {
  double best_val_loss = 0.0;
  int best_epoch = 0;
  std::vector<EpochRecord> history;
};

inline double mean_loss_over(const StanceModel& model, const PreparedCorpus& pc,
                             const std::vector<int>& indices, bool with_bow) {
  double total = 0.0;
  for (int idx : indices) {
    Instance inst = pc.instance_for(idx, with_bow);
    total += model.forward(inst, pc.embeddings).loss;
  }
  return indices.empty() ? 0.0 : total / indices.size();
}

inline TrainResult train_model(StanceModel& model, const PreparedCorpus& pc,
                               const TrainOptions& opts,
                               std::ostream* log_jsonl = nullptr) {
  bool with_bow = model.config().variant == Variant::with_tf;

  std::vector<Stance> labels(pc.pairs.size(), Stance::unrelated);
  std::vector<ClaimDocumentPair> as_pairs(pc.pairs.size());
  for (std::size_t i = 0; i < pc.pairs.size(); ++i) {
    if (!pc.pairs[i].stance)
      throw std::runtime_error("train: corpus contains unlabeled pairs");
    labels[i] = *pc.pairs[i].stance;
    as_pairs[i].stance = pc.pairs[i].stance;
  }

  std::vector<int> train_pool, val_pool;
  if (opts.val_fraction > 0.0) {
    SplitIndices split =
        train_validation_split(as_pairs, opts.val_fraction, opts.seed);
    train_pool = std::move(split.train);
    val_pool = std::move(split.validation);
  } else {
    train_pool.resize(pc.pairs.size());
    for (std::size_t i = 0; i < pc.pairs.size(); ++i)
      train_pool[i] = static_cast<int>(i);
    val_pool = train_pool;
  }

  nn::Adam adam({.lr = opts.lr});
  CoverageTracker coverage(labels, train_pool);
  TrainResult result;
  result.best_val_loss = std::numeric_limits<double>::infinity();
  std::vector<nn::Matrix> best_params = model.params().snapshot();
  int since_best = 0;

  for (int epoch = 1; epoch <= opts.epochs; ++epoch) {
    auto t0 = std::chrono::steady_clock::now();
    EpochPlan plan = balanced_epoch(labels, train_pool, mix_seed(opts.seed, epoch));
    coverage.observe(plan);

    double epoch_loss = 0.0;
    std::size_t done = 0;
    while (done < plan.order.size()) {
      std::size_t batch_end =
          std::min(done + static_cast<std::size_t>(opts.batch), plan.order.size());
      model.params().zero_grads();
      for (std::size_t i = done; i < batch_end; ++i) {
        Instance inst = pc.instance_for(plan.order[i], with_bow);
        ForwardResult fwd = model.forward(inst, pc.embeddings);
        if (!std::isfinite(fwd.loss))
          throw std::runtime_error(
              "train: non-finite loss at epoch " + std::to_string(epoch) +
              ", sample index " + std::to_string(plan.order[i]));
        fwd.tape->backward(fwd.loss_var);
        epoch_loss += fwd.loss;
      }
      model.params().scale_grads(1.0 / static_cast<double>(batch_end - done));
      adam.step(model.params());
      done = batch_end;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.z = plan.z;
    rec.train_loss = plan.order.empty() ? 0.0 : epoch_loss / plan.order.size();
    rec.val_loss = mean_loss_over(model, pc, val_pool, with_bow);
    rec.coverage = coverage.fractions();
    rec.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    result.history.push_back(rec);
    if (log_jsonl) *log_jsonl << to_json(rec).dump() << "\n";
    if (opts.verbose)
      std::cerr << "epoch " << epoch << " train_loss " << rec.train_loss
                << " val_loss " << rec.val_loss << "\n";

    if (rec.val_loss < result.best_val_loss) {
      result.best_val_loss = rec.val_loss;
      result.best_epoch = epoch;
      best_params = model.params().snapshot();
      since_best = 0;
    } else if (++since_best >= opts.patience) {
      break;
    }
  }

  model.params().restore(best_params);
  return result;
}

// Plot-ready coverage series: one row per epoch, one column per class.
inline void write_coverage_csv(std::ostream& out, const TrainResult& result) {
  out << "epoch";
  for (const char* name : kStanceNames) out << ',' << name;
  out << '\n';
  for (const auto& rec : result.history) {
    out << rec.epoch;
    for (int c = 0; c < kNumStances; ++c) out << ',' << rec.coverage[c];
    out << '\n';
  }
}

}  // namespace stance
