#pragma once

// Inference-time explanations: evidence paragraphs ranked by their CNN
// similarity to the claim, n-gram snippets scored through the same
// bilinear form applied to the pre-pooling CNN features, chains of
// consecutive n-grams with similar scores merged into single snippets
// (scored by their mean), and a sentence-level extension. Also the
// annotation-sample export and precision-at-rank bookkeeping used to
// judge snippet quality by hand.

#include <Eigen/Dense>

#include <algorithm>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "stance/cache.hpp"
#include "stance/model.hpp"
#include "stance/text.hpp"

namespace stance {

enum class Granularity { ngram, merged, sentence };

inline const char* to_string(Granularity g) {
  switch (g) {
    case Granularity::ngram: return "ngram";
    case Granularity::merged: return "merged";
    case Granularity::sentence: return "sentence";
  }
  return "?";
}

struct RankedEvidence {
  int paragraph = 0;  // slot index
  double score = 0.0; // P_cnn, bit-equal to the forward pass
};

struct Snippet {
  int paragraph = 0;
  int start = 0;  // token span [start, end)
  int end = 0;
  std::string text;
  double score = 0.0;
  Granularity granularity = Granularity::ngram;
};

// Top-K real paragraphs by CNN similarity; ties break toward the lower
// index, padded slots never rank.
inline std::vector<RankedEvidence> rank_evidence(const SimilarityProfile& profile,
                                                 const std::vector<std::uint8_t>& mask,
                                                 int k) {
  std::vector<RankedEvidence> ranked;
  for (std::size_t j = 0; j < mask.size(); ++j)
    if (mask[j]) ranked.push_back({static_cast<int>(j), profile.cnn[j]});
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const RankedEvidence& a, const RankedEvidence& b) {
                     return a.score > b.score;
                   });
  if (static_cast<int>(ranked.size()) > k) ranked.resize(k);
  return ranked;
}

// Per-position bilinear scores: scorer is M'^T s_cnn (or the projected
// claim code in dot-product mode), positions the T x channels pre-pooling
// features of one paragraph.
inline Eigen::VectorXd score_ngrams(const Eigen::VectorXd& scorer,
                                    const Eigen::MatrixXd& positions) {
  return positions * scorer;
}

// The best-scoring n-grams that lie fully inside the paragraph's real
// tokens. Sorted by score, ties toward the earlier position.
inline std::vector<Snippet> top_ngram_snippets(
    const Eigen::VectorXd& scores, int paragraph, int token_count, int width,
    const std::vector<std::string>& tokens, int n_top) {
  std::vector<Snippet> out;
  for (int t = 0; t + width <= token_count && t < scores.size(); ++t) {
    Snippet s;
    s.paragraph = paragraph;
    s.start = t;
    s.end = t + width;
    s.score = scores(t);
    s.text = join_tokens(tokens, t, t + width);
    s.granularity = Granularity::ngram;
    out.push_back(std::move(s));
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const Snippet& a, const Snippet& b) { return a.score > b.score; });
  if (static_cast<int>(out.size()) > n_top) out.resize(n_top);
  return out;
}

// Merges chains of overlapping/adjacent n-grams whose scores all lie
// within the tolerance of each other; the merged snippet covers the
// union of the member spans and reports the average score. Snippets that
// are already merged or sentence-level pass through untouched, which
// makes the operation idempotent.
inline std::vector<Snippet> merge_consecutive(
    std::vector<Snippet> snippets, double tolerance,
    const std::vector<std::vector<std::string>>& paragraph_tokens) {
  std::stable_sort(snippets.begin(), snippets.end(),
                   [](const Snippet& a, const Snippet& b) {
                     if (a.paragraph != b.paragraph) return a.paragraph < b.paragraph;
                     return a.start < b.start;
                   });
  std::vector<Snippet> out;
  std::vector<const Snippet*> chain;

  auto flush = [&] {
    if (chain.empty()) return;
    if (chain.size() == 1) {
      out.push_back(*chain[0]);
    } else {
      Snippet m;
      m.paragraph = chain[0]->paragraph;
      m.start = chain[0]->start;
      m.end = chain[0]->end;
      double sum = 0.0;
      for (const Snippet* s : chain) {
        m.start = std::min(m.start, s->start);
        m.end = std::max(m.end, s->end);
        sum += s->score;
      }
      m.score = sum / static_cast<double>(chain.size());
      m.granularity = Granularity::merged;
      m.text = join_tokens(paragraph_tokens.at(m.paragraph), m.start, m.end);
      out.push_back(std::move(m));
    }
    chain.clear();
  };

  for (const Snippet& s : snippets) {
    if (s.granularity != Granularity::ngram) {
      flush();
      out.push_back(s);
      continue;
    }
    bool joins = !chain.empty() && chain.back()->paragraph == s.paragraph;
    if (joins) {
      int chain_end = 0;
      for (const Snippet* m : chain) chain_end = std::max(chain_end, m->end);
      joins = s.start <= chain_end;
    }
    if (joins)
      for (const Snippet* m : chain)
        if (std::abs(m->score - s.score) > tolerance) {
          joins = false;
          break;
        }
    if (!joins) flush();
    chain.push_back(&s);
  }
  flush();
  return out;
}

// Every sentence containing at least one extracted n-gram becomes a
// snippet scored by the maximum contained n-gram score. An n-gram that
// crosses a sentence boundary belongs to the sentence of its start token.
inline std::vector<Snippet> to_sentence_level(
    const std::vector<Snippet>& ngrams,
    const std::vector<std::vector<std::string>>& paragraph_tokens) {
  std::map<std::pair<int, std::size_t>, Snippet> by_sentence;
  for (const Snippet& s : ngrams) {
    const auto& tokens = paragraph_tokens.at(s.paragraph);
    auto spans = sentence_spans(tokens);
    for (std::size_t si = 0; si < spans.size(); ++si) {
      auto [b, e] = spans[si];
      if (static_cast<std::size_t>(s.start) < b ||
          static_cast<std::size_t>(s.start) >= e)
        continue;
      auto key = std::make_pair(s.paragraph, si);
      auto it = by_sentence.find(key);
      if (it == by_sentence.end()) {
        Snippet sent;
        sent.paragraph = s.paragraph;
        sent.start = static_cast<int>(b);
        sent.end = static_cast<int>(e);
        sent.score = s.score;
        sent.granularity = Granularity::sentence;
        sent.text = join_tokens(tokens, b, e);
        by_sentence.emplace(key, std::move(sent));
      } else {
        it->second.score = std::max(it->second.score, s.score);
      }
      break;
    }
  }
  std::vector<Snippet> out;
  for (auto& [_, s] : by_sentence) out.push_back(std::move(s));
  std::stable_sort(out.begin(), out.end(),
                   [](const Snippet& a, const Snippet& b) { return a.score > b.score; });
  return out;
}

struct Explanation {
  Stance predicted = Stance::unrelated;
  Eigen::Vector4d probs = Eigen::Vector4d::Zero();
  SimilarityProfile profile;
  std::vector<RankedEvidence> evidence;
  std::vector<Snippet> ngrams;     // across ranked paragraphs, score-sorted
  std::vector<Snippet> merged;
  std::vector<Snippet> sentences;
};

struct ExplainOptions {
  int top_k = 5;            // evidence paragraphs
  int top_ngrams = 5;       // n-grams kept per ranked paragraph
  double tolerance = 0.05;  // merge tolerance
};

inline Explanation explain_forward(const ForwardResult& fwd,
                                   const Instance& inst,
                                   const PreparedBody& body, int cnn_width,
                                   const ExplainOptions& opts) {
  Explanation ex;
  ex.predicted = fwd.predicted;
  ex.probs = fwd.probs;
  ex.profile = fwd.profile;
  ex.evidence = rank_evidence(fwd.profile, inst.tensor.mask, opts.top_k);

  // Budgeted view of each slot's tokens.
  std::vector<std::vector<std::string>> slot_tokens(inst.tensor.num_slots());
  for (int j = 0; j < inst.tensor.num_slots(); ++j) {
    if (j < static_cast<int>(body.paragraph_tokens.size())) {
      slot_tokens[j] = body.paragraph_tokens[j];
      if (static_cast<int>(slot_tokens[j].size()) > inst.tensor.budget())
        slot_tokens[j].resize(inst.tensor.budget());
    }
  }

  for (const RankedEvidence& ev : ex.evidence) {
    Eigen::VectorXd scores =
        score_ngrams(fwd.snippet_scorer, fwd.positions.at(ev.paragraph));
    auto ngrams = top_ngram_snippets(scores, ev.paragraph,
                                     inst.tensor.token_counts[ev.paragraph],
                                     cnn_width, slot_tokens[ev.paragraph],
                                     opts.top_ngrams);
    ex.ngrams.insert(ex.ngrams.end(), ngrams.begin(), ngrams.end());
  }
  ex.merged = merge_consecutive(ex.ngrams, opts.tolerance, slot_tokens);
  ex.sentences = to_sentence_level(ex.ngrams, slot_tokens);

  auto by_score = [](const Snippet& a, const Snippet& b) { return a.score > b.score; };
  std::stable_sort(ex.ngrams.begin(), ex.ngrams.end(), by_score);
  std::stable_sort(ex.merged.begin(), ex.merged.end(), by_score);
  return ex;
}

// Records carry the evaluation level of the list a snippet was ranked
// in; an unmerged singleton ranked at the merged level is still a
// merged-level record.
inline nlohmann::json snippet_to_json(const Snippet& s, Granularity level) {
  return {{"granularity", to_string(level)},
          {"paragraph", s.paragraph},
          {"span", {s.start, s.end}},
          {"text", s.text},
          {"score", s.score}};
}

inline nlohmann::json explanation_to_json(const std::string& claim, int body_id,
                                          const Explanation& ex) {
  nlohmann::json evidence = nlohmann::json::array();
  for (const auto& ev : ex.evidence)
    evidence.push_back({{"j", ev.paragraph}, {"score", ev.score}});
  nlohmann::json snippets = nlohmann::json::array();
  const std::pair<const std::vector<Snippet>*, Granularity> levels[] = {
      {&ex.ngrams, Granularity::ngram},
      {&ex.merged, Granularity::merged},
      {&ex.sentences, Granularity::sentence}};
  for (const auto& [list, level] : levels)
    for (const auto& s : *list) snippets.push_back(snippet_to_json(s, level));
  return {{"claim", claim},
          {"body_id", body_id},
          {"predicted_stance", to_string(ex.predicted)},
          {"evidence", std::move(evidence)},
          {"p_lstm", ex.profile.lstm},
          {"p_cnn", ex.profile.cnn},
          {"p_tfidf", ex.profile.tfidf},
          {"snippets", std::move(snippets)}};
}

// Writes a JSON-lines file of agree/disagree examples with their top
// snippets at every granularity, one line per snippet, with an empty
// judgment slot for a human annotator. Returns the number of sampled
// pairs (all available ones, with a warning, if fewer than requested).
inline int export_annotation_sample(const StanceModel& model,
                                    const PreparedCorpus& pc, int n_samples,
                                    const ExplainOptions& opts,
                                    std::uint64_t seed, std::ostream& out,
                                    std::ostream* warn = nullptr) {
  std::vector<int> candidates;
  for (std::size_t i = 0; i < pc.pairs.size(); ++i)
    if (pc.pairs[i].stance && (*pc.pairs[i].stance == Stance::agree ||
                               *pc.pairs[i].stance == Stance::disagree))
      candidates.push_back(static_cast<int>(i));
  if (static_cast<int>(candidates.size()) < n_samples) {
    if (warn)
      *warn << "only " << candidates.size()
            << " agree/disagree pairs available, sampling them all\n";
    n_samples = static_cast<int>(candidates.size());
  }
  std::mt19937_64 rng(seed);
  std::shuffle(candidates.begin(), candidates.end(), rng);
  candidates.resize(n_samples);
  std::sort(candidates.begin(), candidates.end());

  bool with_bow = model.config().variant == Variant::with_tf;
  for (int idx : candidates) {
    const PreparedPair& pr = pc.pairs[idx];
    const PreparedBody& body = pc.body(pr.body_id);
    Instance inst = pc.make_instance(pr.claim, body, pr.stance, with_bow);
    ForwardResult fwd = model.forward(inst, pc.embeddings, true);
    Explanation ex =
        explain_forward(fwd, inst, body, model.config().cnn_width, opts);
    const std::pair<const std::vector<Snippet>*, Granularity> levels[] = {
        {&ex.ngrams, Granularity::ngram},
        {&ex.merged, Granularity::merged},
        {&ex.sentences, Granularity::sentence}};
    for (const auto& [list, level] : levels) {
      int rank = 0;
      for (const Snippet& s : *list) {
        nlohmann::json rec = snippet_to_json(s, level);
        rec["sample"] = idx;
        rec["claim"] = pr.claim;
        rec["body_id"] = pr.body_id;
        rec["gold_stance"] = to_string(*pr.stance);
        rec["predicted_stance"] = to_string(ex.predicted);
        rec["rank"] = ++rank;
        rec["judgment"] = nullptr;
        out << rec.dump() << "\n";
      }
    }
  }
  return n_samples;
}

// Per-rank precision from a judged annotation file: at each rank, the
// fraction of judged snippets marked positive. Lines with a null
// judgment are skipped.
inline std::map<std::string, std::vector<double>> precision_at_k(
    std::istream& in) {
  std::map<std::string, std::vector<long>> pos, cnt;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json rec = nlohmann::json::parse(line);
    if (!rec.contains("judgment") || rec.at("judgment").is_null()) continue;
    std::string g = rec.at("granularity").get<std::string>();
    int rank = rec.at("rank").get<int>();
    auto& p = pos[g];
    auto& c = cnt[g];
    if (static_cast<int>(p.size()) < rank) {
      p.resize(rank, 0);
      c.resize(rank, 0);
    }
    ++c[rank - 1];
    if (rec.at("judgment").get<int>() != 0) ++p[rank - 1];
  }
  std::map<std::string, std::vector<double>> out;
  for (auto& [g, c] : cnt) {
    std::vector<double> prec(c.size(), 0.0);
    for (std::size_t r = 0; r < c.size(); ++r)
      prec[r] = c[r] ? static_cast<double>(pos[g][r]) / c[r] : 0.0;
    out[g] = std::move(prec);
  }
  return out;
}

}  // namespace stance
