// Command-line front end: prepare a corpus cache, train a model,
// evaluate/predict/explain against test CSVs, score predictions, and
// export/score annotation samples. Exit codes: 0 success, 1 internal
// error, 2 bad input.

#include <CLI11.hpp>
#include <json.hpp>

#include <deque>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stance/cache.hpp"
#include "stance/checkpoint.hpp"
#include "stance/config.hpp"
#include "stance/corpus.hpp"
#include "stance/csv.hpp"
#include "stance/evaluation.hpp"
#include "stance/explain.hpp"
#include "stance/model.hpp"
#include "stance/training.hpp"

namespace {

using nlohmann::json;
using namespace stance;

struct CommonOpts {
  std::string config_path;
  std::vector<std::string> overrides;  // key=value
};

RunConfig resolve_config(const CommonOpts& common) {
  RunConfig cfg;
  if (!common.config_path.empty()) cfg = RunConfig::from_file(common.config_path);
  for (const auto& kv : common.overrides) {
    std::size_t eq = kv.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("override must be key=value: " + kv);
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& common) {
  cmd->add_option("--config", common.config_path, "key=value config file")
      ->envname("STANCE_CONFIG");
  cmd->add_option("--set", common.overrides,
                  "config override (key=value), repeatable");
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

// Stance CSV without body resolution, for the standalone scorer.
std::vector<std::pair<std::string, std::string>> load_label_rows(
    const std::string& path, std::vector<Stance>* labels) {
  auto rows = csv::read_file(path);
  if (rows.empty() || rows[0].fields.size() != 3)
    throw std::runtime_error(path + ": expected Headline,Body ID,Stance");
  std::vector<std::pair<std::string, std::string>> keys;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.fields.size() != 3)
      throw csv::ParseError("expected 3 fields", row.record_no);
    auto st = parse_stance(row.fields[2]);
    if (!st)
      throw csv::ParseError("unknown stance '" + row.fields[2] + "'",
                            row.record_no);
    keys.emplace_back(row.fields[0], row.fields[1]);
    labels->push_back(*st);
  }
  return keys;
}

struct LoadedModel {
  PreparedCorpus corpus;
  std::unique_ptr<StanceModel> model;
  json run_config;
};

LoadedModel load_model(const std::string& cache_path,
                       const std::string& ckpt_path) {
  LoadedModel lm;
  lm.corpus = load_cache(cache_path);
  LoadedCheckpoint ckpt = load_checkpoint(ckpt_path);
  if (ckpt.vocab_hash != lm.corpus.vocab.hash())
    throw std::runtime_error(
        "checkpoint was trained against a different vocabulary than " +
        cache_path);
  if (ckpt.model->config().p != lm.corpus.options.p ||
      ckpt.model->config().L != lm.corpus.options.L ||
      ckpt.model->config().claim_len != lm.corpus.options.claim_len)
    throw std::runtime_error("checkpoint dimensions do not match cache");
  lm.model = std::move(ckpt.model);
  lm.run_config = std::move(ckpt.run_config);
  return lm;
}

struct TestSet {
  std::vector<ClaimDocumentPair> pairs;
  std::map<int, PreparedBody> bodies;
};

TestSet load_test_set(const PreparedCorpus& pc, const std::string& bodies_path,
                      const std::string& stances_path) {
  TestSet ts;
  BodyMap raw = load_bodies(bodies_path);
  ts.pairs = load_stances(stances_path, raw);
  for (const auto& [id, body] : raw)
    ts.bodies[id] = detail::prepare_body(body, &pc.vocab);
  return ts;
}

std::vector<Stance> predict_all(const StanceModel& model,
                                const PreparedCorpus& pc, const TestSet& ts) {
  bool with_bow = model.config().variant == Variant::with_tf;
  std::vector<Stance> pred;
  pred.reserve(ts.pairs.size());
  for (const auto& pr : ts.pairs) {
    Instance inst = pc.make_instance(pr.claim, ts.bodies.at(pr.body_id),
                                     std::nullopt, with_bow);
    pred.push_back(model.forward(inst, pc.embeddings).predicted);
  }
  return pred;
}

// ---------------------------------------------------------------------------

int cmd_prepare(const RunConfig& cfg) {
  if (cfg.bodies.empty() || cfg.stances.empty() || cfg.embeddings.empty() ||
      cfg.out.empty())
    throw std::runtime_error("prepare needs bodies, stances, embeddings, out");
  BodyMap bodies = load_bodies(cfg.bodies);
  auto pairs = load_stances(cfg.stances, bodies);
  PrepareOptions opts{cfg.p, cfg.L, cfg.claim_len, cfg.e_dim};
  PreparedCorpus pc = prepare_corpus(bodies, pairs, cfg.embeddings, opts);
  save_cache(cfg.out, pc);

  json summary;
  summary["bodies"] = pc.bodies.size();
  summary["pairs"] = pc.pairs.size();
  auto counts = pc.class_counts();
  json per_class;
  for (int c = 0; c < kNumStances; ++c) per_class[kStanceNames[c]] = counts[c];
  summary["pairs_per_class"] = per_class;
  summary["median_paragraph_count"] = pc.median_paragraph_count();
  summary["vocab_size"] = pc.vocab.size();
  summary["cache"] = cfg.out;
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int cmd_train(const RunConfig& cfg) {
  if (cfg.cache.empty() || cfg.out.empty())
    throw std::runtime_error("train needs cache and out");
  PreparedCorpus pc = load_cache(cfg.cache);
  if (pc.options.p != cfg.p || pc.options.L != cfg.L ||
      pc.options.claim_len != cfg.claim_len || pc.options.e_dim != cfg.e_dim)
    throw std::runtime_error(
        "config dimensions differ from the prepared cache; re-run prepare");

  StanceModel model(cfg.model_config(pc.vocab.size()));
  std::cerr << "trainable parameters: " << model.trainable_parameter_count()
            << " (embeddings frozen: " << pc.embeddings.rows.size() << ")\n";

  TrainOptions topts;
  topts.epochs = cfg.epochs;
  topts.patience = cfg.patience;
  topts.batch = cfg.batch;
  topts.lr = cfg.lr;
  topts.val_fraction = cfg.val_fraction;
  topts.seed = cfg.seed;

  std::string log_path = cfg.log.empty() ? cfg.out + ".log.jsonl" : cfg.log;
  std::ofstream log = open_out(log_path);
  TrainResult result = train_model(model, pc, topts, &log);
  save_checkpoint(cfg.out, model, pc.vocab.hash(), cfg.to_json());
  std::ofstream cov = open_out(cfg.out + ".coverage.csv");
  write_coverage_csv(cov, result);

  json summary;
  summary["checkpoint"] = cfg.out;
  summary["log"] = log_path;
  summary["best_epoch"] = result.best_epoch;
  summary["best_val_loss"] = result.best_val_loss;
  summary["epochs_run"] = result.history.size();
  summary["trainable_parameters"] = model.trainable_parameter_count();
  summary["seed"] = cfg.seed;
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int cmd_evaluate(const RunConfig& cfg, bool literal_norm) {
  if (cfg.checkpoint.empty() || cfg.cache.empty() || cfg.bodies.empty() ||
      cfg.stances.empty())
    throw std::runtime_error("evaluate needs checkpoint, cache, bodies, stances");
  LoadedModel lm = load_model(cfg.cache, cfg.checkpoint);
  TestSet ts = load_test_set(lm.corpus, cfg.bodies, cfg.stances);
  std::vector<Stance> gold;
  for (const auto& pr : ts.pairs) {
    if (!pr.stance) throw std::runtime_error("evaluate: unlabeled pair in input");
    gold.push_back(*pr.stance);
  }
  std::vector<Stance> pred = predict_all(*lm.model, lm.corpus, ts);
  ScoreReport rep = score(gold, pred,
                          literal_norm ? WeightedNorm::total_examples
                                       : WeightedNorm::max_achievable);
  json out = rep.to_json();
  std::cout << out.dump(2) << "\n";
  if (!cfg.out.empty()) open_out(cfg.out) << out.dump(2) << "\n";
  return 0;
}

int cmd_predict(const RunConfig& cfg) {
  if (cfg.checkpoint.empty() || cfg.cache.empty() || cfg.bodies.empty() ||
      cfg.stances.empty() || cfg.out.empty())
    throw std::runtime_error(
        "predict needs checkpoint, cache, bodies, stances, out");
  LoadedModel lm = load_model(cfg.cache, cfg.checkpoint);
  TestSet ts = load_test_set(lm.corpus, cfg.bodies, cfg.stances);
  std::vector<Stance> pred = predict_all(*lm.model, lm.corpus, ts);
  std::ofstream out = open_out(cfg.out);
  csv::write_row(out, {"Headline", "Body ID", "Stance"});
  for (std::size_t i = 0; i < ts.pairs.size(); ++i)
    csv::write_row(out, {ts.pairs[i].claim, std::to_string(ts.pairs[i].body_id),
                         to_string(pred[i])});
  std::cout << json({{"predictions", cfg.out}, {"n", ts.pairs.size()}}).dump(2)
            << "\n";
  return 0;
}

int cmd_explain(const RunConfig& cfg) {
  if (cfg.checkpoint.empty() || cfg.cache.empty() || cfg.bodies.empty() ||
      cfg.stances.empty() || cfg.out.empty())
    throw std::runtime_error(
        "explain needs checkpoint, cache, bodies, stances, out");
  LoadedModel lm = load_model(cfg.cache, cfg.checkpoint);
  TestSet ts = load_test_set(lm.corpus, cfg.bodies, cfg.stances);
  bool with_bow = lm.model->config().variant == Variant::with_tf;
  ExplainOptions eopts{cfg.topk, cfg.topk_snippets, cfg.merge_tolerance};
  std::ofstream out = open_out(cfg.out);
  for (const auto& pr : ts.pairs) {
    const PreparedBody& body = ts.bodies.at(pr.body_id);
    Instance inst = lm.corpus.make_instance(pr.claim, body, std::nullopt, with_bow);
    ForwardResult fwd = lm.model->forward(inst, lm.corpus.embeddings, true);
    Explanation ex =
        explain_forward(fwd, inst, body, lm.model->config().cnn_width, eopts);
    out << explanation_to_json(pr.claim, pr.body_id, ex).dump() << "\n";
  }
  std::cout << json({{"explanations", cfg.out}, {"n", ts.pairs.size()}}).dump(2)
            << "\n";
  return 0;
}

int cmd_score(const std::string& gold_path, const std::string& pred_path,
              bool literal_norm, const std::string& out_path) {
  std::vector<Stance> gold, pred;
  auto gold_keys = load_label_rows(gold_path, &gold);
  auto pred_keys = load_label_rows(pred_path, &pred);
  if (gold_keys.size() != pred_keys.size())
    throw std::runtime_error("gold and prediction files differ in length");
  for (std::size_t i = 0; i < gold_keys.size(); ++i)
    if (gold_keys[i] != pred_keys[i])
      throw std::runtime_error("row " + std::to_string(i + 2) +
                               ": gold and prediction rows do not match");
  ScoreReport rep = score(gold, pred,
                          literal_norm ? WeightedNorm::total_examples
                                       : WeightedNorm::max_achievable);
  json out = rep.to_json();
  std::cout << out.dump(2) << "\n";
  if (!out_path.empty()) open_out(out_path) << out.dump(2) << "\n";
  return 0;
}

int cmd_annotate(const RunConfig& cfg, int n_samples) {
  if (cfg.checkpoint.empty() || cfg.cache.empty() || cfg.out.empty())
    throw std::runtime_error("annotate needs checkpoint, cache, out");
  LoadedModel lm = load_model(cfg.cache, cfg.checkpoint);
  ExplainOptions eopts{cfg.topk, cfg.topk_snippets, cfg.merge_tolerance};
  std::ofstream out = open_out(cfg.out);
  int n = export_annotation_sample(*lm.model, lm.corpus, n_samples, eopts,
                                   cfg.seed, out, &std::cerr);
  std::cout << json({{"annotation_sample", cfg.out}, {"samples", n}}).dump(2)
            << "\n";
  return 0;
}

int cmd_precision(const std::string& judgments_path) {
  std::ifstream in(judgments_path);
  if (!in) throw std::runtime_error("cannot open " + judgments_path);
  auto prec = precision_at_k(in);
  json out;
  for (const auto& [g, v] : prec) out[g] = v;
  std::cout << out.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "stance: memory-network stance detection with evidence extraction"};
  app.require_subcommand(1);

  CommonOpts common;
  std::string variant_flag, seed_flag;
  int topk_flag = -1;
  std::string gold_path, pred_path, judgments_path, out_flag;
  bool literal_norm = false;
  int n_samples = 100;

  std::deque<std::string> path_storage;
  std::map<CLI::App*, std::map<std::string, std::string*>> path_opts;
  auto path_option = [&](CLI::App* cmd, const std::string& name,
                         const std::string& help) {
    path_storage.emplace_back();
    std::string* slot = &path_storage.back();
    cmd->add_option("--" + name, *slot, help);
    path_opts[cmd][name] = slot;
  };

  CLI::App* prepare = app.add_subcommand("prepare", "build the corpus cache");
  add_common(prepare, common);
  path_option(prepare, "bodies", "training bodies CSV");
  path_option(prepare, "stances", "training stances CSV");
  path_option(prepare, "embeddings", "pretrained embeddings (token v1..ve per line)");
  path_option(prepare, "out", "cache output path");

  CLI::App* train = app.add_subcommand("train", "train a model from a cache");
  add_common(train, common);
  path_option(train, "cache", "prepared corpus cache");
  path_option(train, "out", "checkpoint output path");
  path_option(train, "log", "training log (JSON lines)");
  train->add_option("--variant", variant_flag, "smemnn | dot | tf")
      ->envname("STANCE_VARIANT");
  train->add_option("--seed", seed_flag, "random seed")->envname("STANCE_SEED");

  CLI::App* evaluate = app.add_subcommand("evaluate", "score a model on labeled CSVs");
  add_common(evaluate, common);
  path_option(evaluate, "checkpoint", "model checkpoint");
  path_option(evaluate, "cache", "prepared corpus cache");
  path_option(evaluate, "bodies", "test bodies CSV");
  path_option(evaluate, "stances", "test stances CSV (with Stance column)");
  path_option(evaluate, "out", "also write the report JSON here");
  evaluate->add_flag("--literal-norm", literal_norm,
                     "normalize weighted accuracy by example count");

  CLI::App* predict = app.add_subcommand("predict", "write predictions CSV");
  add_common(predict, common);
  path_option(predict, "checkpoint", "model checkpoint");
  path_option(predict, "cache", "prepared corpus cache");
  path_option(predict, "bodies", "input bodies CSV");
  path_option(predict, "stances", "input stances CSV (Stance column optional)");
  path_option(predict, "out", "predictions CSV path");

  CLI::App* explain = app.add_subcommand(
      "explain", "rank evidence and extract snippets per pair");
  add_common(explain, common);
  path_option(explain, "checkpoint", "model checkpoint");
  path_option(explain, "cache", "prepared corpus cache");
  path_option(explain, "bodies", "input bodies CSV");
  path_option(explain, "stances", "input stances CSV");
  path_option(explain, "out", "explanations JSONL path");
  explain->add_option("--topk", topk_flag, "evidence paragraphs to keep");

  CLI::App* score_cmd = app.add_subcommand(
      "score", "score a predictions CSV against gold (standalone)");
  score_cmd->add_option("--gold", gold_path, "gold stances CSV")->required();
  score_cmd->add_option("--pred", pred_path, "predicted stances CSV")->required();
  score_cmd->add_option("--out", out_flag, "also write the report JSON here");
  score_cmd->add_flag("--literal-norm", literal_norm,
                      "normalize weighted accuracy by example count");

  CLI::App* annotate = app.add_subcommand(
      "annotate", "export an annotation sample of agree/disagree snippets");
  add_common(annotate, common);
  path_option(annotate, "checkpoint", "model checkpoint");
  path_option(annotate, "cache", "prepared corpus cache");
  path_option(annotate, "out", "annotation JSONL path");
  annotate->add_option("--samples", n_samples, "pairs to sample");
  annotate->add_option("--topk", topk_flag, "evidence paragraphs to keep");
  annotate->add_option("--seed", seed_flag, "random seed")->envname("STANCE_SEED");

  CLI::App* precision = app.add_subcommand(
      "precision", "per-rank precision from a judged annotation file");
  precision->add_option("--judgments", judgments_path, "judged JSONL")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    CLI::App* sub = app.get_subcommands().front();
    RunConfig cfg = resolve_config(common);
    for (auto& [name, slot] : path_opts[sub])
      if (!slot->empty()) cfg.set(name, *slot);
    if (!variant_flag.empty()) cfg.set("variant", variant_flag);
    if (!seed_flag.empty()) cfg.set("seed", seed_flag);
    if (topk_flag >= 0) cfg.topk = topk_flag;

    if (sub == prepare) return cmd_prepare(cfg);
    if (sub == train) return cmd_train(cfg);
    if (sub == evaluate) return cmd_evaluate(cfg, literal_norm);
    if (sub == predict) return cmd_predict(cfg);
    if (sub == explain) return cmd_explain(cfg);
    if (sub == score_cmd) return cmd_score(gold_path, pred_path, literal_norm, out_flag);
    if (sub == annotate) return cmd_annotate(cfg, n_samples);
    if (sub == precision) return cmd_precision(judgments_path);
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::runtime_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
}
