#pragma once

// Claim/body ingestion, vocabulary and pretrained embeddings, and the
// paragraph-budgeted token grid each document is encoded from.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "stance/csv.hpp"
#include "stance/text.hpp"

namespace stance {

enum class Stance : int { agree = 0, disagree = 1, discuss = 2, unrelated = 3 };

constexpr int kNumStances = 4;
constexpr std::array<const char*, 4> kStanceNames = {"agree", "disagree",
                                                     "discuss", "unrelated"};

inline const char* to_string(Stance s) { return kStanceNames[static_cast<int>(s)]; }

inline std::optional<Stance> parse_stance(std::string_view s) {
  for (int i = 0; i < kNumStances; ++i)
    if (s == kStanceNames[i]) return static_cast<Stance>(i);
  return std::nullopt;
}

struct ArticleBody {
  int body_id = 0;
  std::string text;
  std::vector<std::string> paragraphs;
};

struct ClaimDocumentPair {
  std::string claim;
  int body_id = 0;
  std::optional<Stance> stance;  // absent in prediction input
};

using BodyMap = std::map<int, ArticleBody>;

inline int parse_body_id(const std::string& s, std::size_t record_no) {
  try {
    std::size_t pos = 0;
    int id = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return id;
  } catch (const std::exception&) {
    throw csv::ParseError("bad Body ID '" + s + "'", record_no);
  }
}

// Bodies CSV: header `Body ID,articleBody`.
inline BodyMap load_bodies(const std::string& path) {
  auto rows = csv::read_file(path);
  if (rows.empty()) throw std::runtime_error(path + ": empty bodies file");
  if (rows[0].fields.size() != 2)
    throw csv::ParseError("expected 2 columns in bodies header", 1);
  BodyMap bodies;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.fields.size() != 2)
      throw csv::ParseError("expected 2 fields", row.record_no);
    ArticleBody body;
    body.body_id = parse_body_id(row.fields[0], row.record_no);
    body.text = row.fields[1];
    body.paragraphs = split_paragraphs(body.text);
    if (!bodies.emplace(body.body_id, std::move(body)).second)
      throw csv::ParseError("duplicate body id " + row.fields[0], row.record_no);
  }
  return bodies;
}

// Stances CSV: header `Headline,Body ID[,Stance]`. The stance column is
// optional so unlabeled prediction input parses through the same path.
inline std::vector<ClaimDocumentPair> load_stances(const std::string& path,
                                                   const BodyMap& bodies) {
  auto rows = csv::read_file(path);
  if (rows.empty()) throw std::runtime_error(path + ": empty stances file");
  std::size_t ncols = rows[0].fields.size();
  if (ncols != 2 && ncols != 3)
    throw csv::ParseError("expected 2 or 3 columns in stances header", 1);
  std::vector<ClaimDocumentPair> pairs;
  pairs.reserve(rows.size() - 1);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.fields.size() != ncols)
      throw csv::ParseError("expected " + std::to_string(ncols) + " fields",
                            row.record_no);
    ClaimDocumentPair pair;
    pair.claim = row.fields[0];
    pair.body_id = parse_body_id(row.fields[1], row.record_no);
    if (!bodies.count(pair.body_id))
      throw csv::ParseError("unknown body id " + row.fields[1], row.record_no);
    if (ncols == 3) {
      auto st = parse_stance(row.fields[2]);
      if (!st)
        throw csv::ParseError("unknown stance '" + row.fields[2] + "'",
                              row.record_no);
      pair.stance = *st;
    }
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

// Token ids 0 and 1 are reserved: 0 is padding (always the zero
// embedding), 1 is the shared out-of-vocabulary slot.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kOov = 1;

  Vocabulary() : tokens_{"<pad>", "<oov>"} { rebuild_index(); }

  explicit Vocabulary(std::vector<std::string> sorted_tokens)
      : tokens_{"<pad>", "<oov>"} {
    tokens_.insert(tokens_.end(), sorted_tokens.begin(), sorted_tokens.end());
    rebuild_index();
  }

  int size() const { return static_cast<int>(tokens_.size()); }

  int lookup(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? kOov : it->second;
  }

  const std::string& token(int id) const { return tokens_.at(id); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  // FNV-1a over the token list; embedded in checkpoints so a model is
  // never applied against a different vocabulary.
  std::uint64_t hash() const {
    std::uint64_t h = 1469598103934665603ull;
    for (const auto& t : tokens_) {
      for (unsigned char c : t) {
        h ^= c;
        h *= 1099511628211ull;
      }
      h ^= '\n';
      h *= 1099511628211ull;
    }
    return h;
  }

 private:
  void rebuild_index() {
    index_.clear();
    for (std::size_t i = 0; i < tokens_.size(); ++i)
      index_.emplace(tokens_[i], static_cast<int>(i));
    if (index_.size() != tokens_.size())
      throw std::runtime_error("vocabulary contains duplicate tokens");
  }

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

// Frozen v x e_dim table. Row kPad stays zero; tokens missing from the
// pretrained file keep the zero row they share with <oov>.
struct EmbeddingTable {
  Eigen::MatrixXd rows;

  int dim() const { return static_cast<int>(rows.cols()); }
  Eigen::VectorXd vector_for(int token_id) const { return rows.row(token_id); }
};

// Pretrained file: one `token v1 ... v_e` line per entry.
inline std::pair<Vocabulary, EmbeddingTable> build_vocabulary(
    const std::vector<std::vector<std::string>>& token_seqs,
    const std::string& pretrained_path, int e_dim) {
  std::map<std::string, int> seen;  // sorted -> deterministic ids
  for (const auto& seq : token_seqs)
    for (const auto& t : seq) seen[t] = 0;
  std::vector<std::string> tokens;
  tokens.reserve(seen.size());
  for (auto& [t, _] : seen) tokens.push_back(t);
  Vocabulary vocab(std::move(tokens));

  EmbeddingTable table;
  table.rows = Eigen::MatrixXd::Zero(vocab.size(), e_dim);

  std::ifstream in(pretrained_path);
  if (!in)
    throw std::runtime_error("cannot open embeddings file: " + pretrained_path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string token;
    ss >> token;
    int id = vocab.lookup(token);
    bool writable = id > Vocabulary::kOov;  // reserved rows stay zero
    double v;
    int count = 0;
    while (ss >> v) {
      if (count < e_dim && writable) table.rows(id, count) = v;
      ++count;
    }
    if (count != e_dim)
      throw std::runtime_error("embeddings file line " + std::to_string(line_no) +
                               ": expected " + std::to_string(e_dim) +
                               " values, got " + std::to_string(count));
  }
  return {std::move(vocab), std::move(table)};
}

// A document rendered as p paragraph slots of L token ids each. Slots
// beyond the document's paragraph count are all-padding with mask false.
struct EvidenceTensor {
  Eigen::MatrixXi token_ids;       // p x L
  std::vector<std::uint8_t> mask;  // 1 = real paragraph
  std::vector<int> token_counts;   // real tokens per slot, <= L

  int num_slots() const { return static_cast<int>(mask.size()); }
  int budget() const { return static_cast<int>(token_ids.cols()); }
};

inline std::vector<int> ids_for(const Vocabulary& vocab,
                                const std::vector<std::string>& tokens) {
  std::vector<int> ids(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) ids[i] = vocab.lookup(tokens[i]);
  return ids;
}

// First p paragraphs, each tokenized then truncated/padded to L ids.
inline EvidenceTensor segment_and_budget(
    const std::vector<std::vector<std::string>>& paragraph_tokens,
    const Vocabulary& vocab, int p, int L) {
  if (p < 1 || L < 1) throw std::invalid_argument("segment_and_budget: p,L >= 1");
  EvidenceTensor t;
  t.token_ids = Eigen::MatrixXi::Constant(p, L, Vocabulary::kPad);
  t.mask.assign(p, 0);
  t.token_counts.assign(p, 0);
  for (int j = 0; j < p && j < static_cast<int>(paragraph_tokens.size()); ++j) {
    const auto& toks = paragraph_tokens[j];
    int n = std::min<int>(L, static_cast<int>(toks.size()));
    for (int i = 0; i < n; ++i) t.token_ids(j, i) = vocab.lookup(toks[i]);
    t.token_counts[j] = n;
    t.mask[j] = n > 0 ? 1 : 0;
  }
  return t;
}

// Stratified split: per stance, a seeded shuffle sends round(fraction*n)
// indices to validation. Unlabeled pairs are rejected.
struct SplitIndices {
  std::vector<int> train;
  std::vector<int> validation;
};

inline SplitIndices train_validation_split(
    const std::vector<ClaimDocumentPair>& pairs, double fraction,
    std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0))
    throw std::invalid_argument("split fraction must be in (0,1)");
  std::array<std::vector<int>, kNumStances> by_class;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (!pairs[i].stance)
      throw std::invalid_argument("train_validation_split: unlabeled pair");
    by_class[static_cast<int>(*pairs[i].stance)].push_back(static_cast<int>(i));
  }
  SplitIndices out;
  std::mt19937_64 rng(seed);
  for (auto& idx : by_class) {
    std::shuffle(idx.begin(), idx.end(), rng);
    std::size_t k = static_cast<std::size_t>(fraction * idx.size() + 0.5);
    for (std::size_t i = 0; i < idx.size(); ++i)
      (i < k ? out.validation : out.train).push_back(idx[i]);
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.validation.begin(), out.validation.end());
  return out;
}

}  // namespace stance
