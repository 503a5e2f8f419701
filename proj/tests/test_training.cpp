#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "stance/cache.hpp"
#include "stance/checkpoint.hpp"
#include "stance/training.hpp"
#include "testutil.hpp"

using namespace stance;
using Catch::Matchers::WithinAbs;

namespace {

std::vector<Stance> label_multiset(const std::array<int, 4>& counts) {
  std::vector<Stance> labels;
  for (int c = 0; c < 4; ++c)
    labels.insert(labels.end(), counts[c], static_cast<Stance>(c));
  return labels;
}

std::vector<int> all_indices(std::size_t n) {
  std::vector<int> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = static_cast<int>(i);
  return idx;
}

PreparedCorpus tiny_prepared(const testutil::TempDir& tmp,
                             const std::array<int, 4>& counts,
                             std::uint64_t seed = 7) {
  testutil::SyntheticOptions opts;
  opts.counts = counts;
  opts.topics = 6;
  opts.seed = seed;
  auto synth = testutil::make_synthetic(opts);
  testutil::write_embeddings(tmp.file("emb.txt"), synth.vocabulary, 8);
  BodyMap bodies;
  for (auto& b : synth.bodies) bodies[b.body_id] = b;
  return prepare_corpus(bodies, synth.pairs, tmp.file("emb.txt"),
                        PrepareOptions{3, 12, 6, 8});
}

ModelConfig small_model_config(const PreparedCorpus& pc) {
  ModelConfig cfg;
  cfg.e_dim = pc.options.e_dim;
  cfg.lstm_dim = 6;
  cfg.cnn_channels = 6;
  cfg.cnn_width = 3;
  cfg.k_maxout = 2;
  cfg.p = pc.options.p;
  cfg.L = pc.options.L;
  cfg.claim_len = pc.options.claim_len;
  cfg.mlp_hidden = 8;
  cfg.seed = 5;
  return cfg;
}

}  // namespace

TEST_CASE("balanced epochs sample z per class without replacement") {
  auto labels = label_multiset({10, 5, 20, 40});
  auto pool = all_indices(labels.size());
  EpochPlan plan = balanced_epoch(labels, pool, 99);
  CHECK(plan.z == 5);
  CHECK(plan.order.size() == 20);
  for (int c = 0; c < 4; ++c) {
    REQUIRE(plan.per_class[c].size() == 5);
    std::set<int> distinct(plan.per_class[c].begin(), plan.per_class[c].end());
    CHECK(distinct.size() == 5);  // without replacement
    for (int idx : plan.per_class[c])
      CHECK(labels[idx] == static_cast<Stance>(c));
  }

  EpochPlan again = balanced_epoch(labels, pool, 99);
  CHECK(plan.order == again.order);
  EpochPlan other = balanced_epoch(labels, pool, 100);
  CHECK(plan.order != other.order);

  auto no_disagree = label_multiset({3, 0, 3, 3});
  CHECK_THROWS_WITH(balanced_epoch(no_disagree, all_indices(9), 1),
                    Catch::Matchers::ContainsSubstring("disagree"));
}

TEST_CASE("coverage is monotone and the smallest class is covered at once") {
  auto labels = label_multiset({12, 6, 20, 60});
  auto pool = all_indices(labels.size());
  CoverageTracker tracker(labels, pool);

  auto before = tracker.fractions();
  for (int c = 0; c < 4; ++c) CHECK(before[c] == 0.0);

  std::array<double, 4> prev{};
  for (int epoch = 1; epoch <= 6; ++epoch) {
    tracker.observe(balanced_epoch(labels, pool, 1000 + epoch));
    auto f = tracker.fractions();
    // smallest class is fully covered from the first epoch on
    CHECK(f[static_cast<int>(Stance::disagree)] == 1.0);
    for (int c = 0; c < 4; ++c) {
      CHECK(f[c] >= prev[c]);
      CHECK(f[c] <= 1.0);
    }
    prev = f;
  }
  // the dominant class is still only partially covered
  CHECK(prev[static_cast<int>(Stance::unrelated)] < 1.0);
}

TEST_CASE("two-epoch coverage matches the sampling formula") {
  const int N = 80, z = 16;
  auto labels = label_multiset({z, z, z, N});
  auto pool = all_indices(labels.size());
  double expected = 1.0 - std::pow(1.0 - static_cast<double>(z) / N, 2);
  double sum = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    CoverageTracker tracker(labels, pool);
    tracker.observe(balanced_epoch(labels, pool, 5000 + trial * 2));
    tracker.observe(balanced_epoch(labels, pool, 5001 + trial * 2));
    sum += tracker.fractions()[static_cast<int>(Stance::unrelated)];
  }
  CHECK_THAT(sum / 100.0, WithinAbs(expected, 0.05));
}

TEST_CASE("training runs, logs, selects the best epoch and is deterministic") {
  testutil::TempDir tmp("train");
  PreparedCorpus pc = tiny_prepared(tmp, {6, 6, 6, 10});

  TrainOptions topts;
  topts.epochs = 5;
  topts.patience = 5;
  topts.batch = 8;
  topts.lr = 3e-3;
  topts.val_fraction = 0.25;
  topts.seed = 11;
  topts.verbose = false;

  StanceModel model(small_model_config(pc));
  std::ostringstream log;
  TrainResult result = train_model(model, pc, topts, &log);

  REQUIRE(!result.history.empty());
  double min_val = result.history[0].val_loss;
  for (const auto& rec : result.history) min_val = std::min(min_val, rec.val_loss);
  CHECK(result.best_val_loss == min_val);

  // one JSON record per epoch with the documented keys
  std::istringstream lines(log.str());
  std::string line;
  std::size_t n_lines = 0;
  while (std::getline(lines, line)) {
    auto rec = nlohmann::json::parse(line);
    CHECK(rec.contains("epoch"));
    CHECK(rec.contains("train_loss"));
    CHECK(rec.contains("val_loss"));
    CHECK(rec.contains("coverage"));
    CHECK(rec.at("coverage").contains("unrelated"));
    CHECK(rec.contains("wall_time_s"));
    ++n_lines;
  }
  CHECK(n_lines == result.history.size());

  // smallest-class coverage is 1.0 from epoch one
  CHECK(result.history[0].coverage[static_cast<int>(Stance::agree)] == 1.0);

  SECTION("same seed reproduces the trajectory") {
    StanceModel model2(small_model_config(pc));
    TrainResult result2 = train_model(model2, pc, topts, nullptr);
    REQUIRE(result2.history.size() == result.history.size());
    for (std::size_t i = 0; i < result.history.size(); ++i) {
      CHECK(result.history[i].train_loss == result2.history[i].train_loss);
      CHECK(result.history[i].val_loss == result2.history[i].val_loss);
    }
    for (const auto& p : model.params().all())
      CHECK(p->value == model2.params().find(p->name)->value);
  }

  SECTION("checkpoint round-trip preserves the validation loss") {
    std::vector<int> val_pool;
    SplitIndices split;
    {
      std::vector<ClaimDocumentPair> as_pairs(pc.pairs.size());
      for (std::size_t i = 0; i < pc.pairs.size(); ++i)
        as_pairs[i].stance = pc.pairs[i].stance;
      split = train_validation_split(as_pairs, topts.val_fraction, topts.seed);
    }
    double before = mean_loss_over(model, pc, split.validation, false);
    save_checkpoint(tmp.file("m.ckpt"), model, pc.vocab.hash(), {});
    LoadedCheckpoint loaded = load_checkpoint(tmp.file("m.ckpt"));
    double after = mean_loss_over(*loaded.model, pc, split.validation, false);
    CHECK_THAT(after, WithinAbs(before, 1e-6));
  }

  SECTION("coverage csv is plot-ready") {
    std::ostringstream csv;
    write_coverage_csv(csv, result);
    std::istringstream csv_in(csv.str());
    std::string header;
    std::getline(csv_in, header);
    CHECK(header == "epoch,agree,disagree,discuss,unrelated");
    std::size_t rows = 0;
    while (std::getline(csv_in, line)) ++rows;
    CHECK(rows == result.history.size());
  }
}

TEST_CASE("validation loss improves early on a learnable corpus") {
  testutil::TempDir tmp("learn");
  PreparedCorpus pc = tiny_prepared(tmp, {12, 12, 12, 16}, 21);
  StanceModel model(small_model_config(pc));
  TrainOptions topts;
  topts.epochs = 5;
  topts.patience = 5;
  topts.batch = 8;
  topts.lr = 3e-3;
  topts.val_fraction = 0.0;  // validate on the training pool
  topts.seed = 3;
  topts.verbose = false;
  TrainResult result = train_model(model, pc, topts, nullptr);
  REQUIRE(result.history.size() == 5);
  CHECK(result.history.back().val_loss < result.history.front().val_loss);
}

TEST_CASE("training rejects unlabeled pairs") {
  testutil::TempDir tmp("unlabeled");
  PreparedCorpus pc = tiny_prepared(tmp, {2, 2, 2, 2});
  pc.pairs[0].stance.reset();
  StanceModel model(small_model_config(pc));
  TrainOptions topts;
  topts.verbose = false;
  CHECK_THROWS_WITH(train_model(model, pc, topts, nullptr),
                    Catch::Matchers::ContainsSubstring("unlabeled"));
}
