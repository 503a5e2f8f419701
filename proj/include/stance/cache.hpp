#pragma once

// Prepared corpus: tokenized bodies and claims, vocabulary, pretrained
// embedding table, fitted TF.IDF statistics, and the featurizer that
// turns a claim-document pair into a model Instance. Serialized as a
// versioned binary cache so preparation runs once.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "stance/container.hpp"
#include "stance/corpus.hpp"
#include "stance/model.hpp"
#include "stance/text.hpp"
#include "stance/tfidf.hpp"

namespace stance {

constexpr char kCacheMagic[8] = {'S', 'T', 'C', 'A', 'C', 'H', 'E', '1'};
constexpr std::uint32_t kCacheVersion = 1;

struct PrepareOptions {
  int p = 9;
  int L = 100;
  int claim_len = 30;
  int e_dim = 100;
};

struct PreparedPair {
  std::string claim;
  int body_id = 0;
  std::optional<Stance> stance;
};

struct PreparedBody {
  std::vector<std::string> paragraphs;                 // raw text
  std::vector<std::vector<std::string>> paragraph_tokens;
  std::vector<int> all_token_ids;                      // full document
};

class PreparedCorpus {
 public:
  PrepareOptions options;
  Vocabulary vocab;
  EmbeddingTable embeddings;
  TfidfModel tfidf;
  std::map<int, PreparedBody> bodies;
  std::vector<PreparedPair> pairs;

  const PreparedBody& body(int body_id) const {
    auto it = bodies.find(body_id);
    if (it == bodies.end())
      throw std::runtime_error("unknown body id " + std::to_string(body_id));
    return it->second;
  }

  std::vector<int> claim_ids(const std::string& claim) const {
    auto toks = tokenize(claim);
    if (static_cast<int>(toks.size()) > options.claim_len)
      toks.resize(options.claim_len);
    return ids_for(vocab, toks);
  }

  // Featurize one claim against one loaded body. TF.IDF gating scores
  // are fixed inputs computed here, not inside the network.
  Instance make_instance(const std::string& claim, const PreparedBody& b,
                         std::optional<Stance> gold, bool with_bow) const {
    Instance inst;
    inst.gold = gold;
    inst.claim_ids = claim_ids(claim);
    inst.tensor =
        segment_and_budget(b.paragraph_tokens, vocab, options.p, options.L);
    SparseVec claim_vec = tfidf.transform(ids_for(vocab, tokenize(claim)));
    inst.p_tfidf.assign(options.p, 0.0);
    for (int j = 0; j < options.p; ++j) {
      if (!inst.tensor.mask[j]) continue;
      std::vector<int> para_ids(inst.tensor.token_counts[j]);
      for (int i = 0; i < inst.tensor.token_counts[j]; ++i)
        para_ids[i] = inst.tensor.token_ids(j, i);
      inst.p_tfidf[j] = TfidfModel::cosine(claim_vec, tfidf.transform(para_ids));
    }
    if (with_bow) {
      inst.doc_bow = tfidf.transform(b.all_token_ids);
      inst.claim_bow = claim_vec;
      inst.bow_cosine = TfidfModel::cosine(inst.claim_bow, inst.doc_bow);
    }
    return inst;
  }

  Instance instance_for(std::size_t pair_index, bool with_bow) const {
    const PreparedPair& pr = pairs.at(pair_index);
    return make_instance(pr.claim, body(pr.body_id), pr.stance, with_bow);
  }

  int median_paragraph_count() const {
    std::vector<int> counts;
    counts.reserve(bodies.size());
    for (const auto& [_, b] : bodies)
      counts.push_back(static_cast<int>(b.paragraphs.size()));
    if (counts.empty()) return 0;
    std::sort(counts.begin(), counts.end());
    return counts[counts.size() / 2];
  }

  std::array<long, kNumStances> class_counts() const {
    std::array<long, kNumStances> counts{};
    for (const auto& pr : pairs)
      if (pr.stance) ++counts[static_cast<int>(*pr.stance)];
    return counts;
  }
};

namespace detail {

inline PreparedBody prepare_body(const ArticleBody& body, const Vocabulary* vocab) {
  PreparedBody pb;
  pb.paragraphs = body.paragraphs;
  pb.paragraph_tokens.reserve(pb.paragraphs.size());
  for (const auto& para : pb.paragraphs)
    pb.paragraph_tokens.push_back(tokenize(para));
  if (vocab) {
    for (const auto& toks : pb.paragraph_tokens)
      for (const auto& t : toks) pb.all_token_ids.push_back(vocab->lookup(t));
  }
  return pb;
}

}  // namespace detail

// Builds vocabulary and TF.IDF statistics from the training pairs and
// bodies, and attaches the pretrained embedding rows.
inline PreparedCorpus prepare_corpus(const BodyMap& bodies,
                                     const std::vector<ClaimDocumentPair>& pairs,
                                     const std::string& embeddings_path,
                                     const PrepareOptions& opts) {
  PreparedCorpus pc;
  pc.options = opts;

  std::vector<std::vector<std::string>> token_seqs;
  std::map<std::string, std::vector<std::string>> claim_tokens;  // unique claims
  for (const auto& pr : pairs)
    if (!claim_tokens.count(pr.claim)) claim_tokens[pr.claim] = tokenize(pr.claim);
  for (const auto& [_, toks] : claim_tokens) token_seqs.push_back(toks);
  std::map<int, PreparedBody> prepared;
  for (const auto& [id, body] : bodies) {
    prepared[id] = detail::prepare_body(body, nullptr);
    for (const auto& toks : prepared[id].paragraph_tokens)
      token_seqs.push_back(toks);
  }

  auto [vocab, table] = build_vocabulary(token_seqs, embeddings_path, opts.e_dim);
  pc.vocab = std::move(vocab);
  pc.embeddings = std::move(table);

  for (auto& [id, pb] : prepared) {
    for (const auto& toks : pb.paragraph_tokens)
      for (const auto& t : toks) pb.all_token_ids.push_back(pc.vocab.lookup(t));
    pc.bodies[id] = std::move(pb);
  }

  // Document frequencies over full documents plus unique claims.
  std::vector<std::vector<int>> docs;
  docs.reserve(pc.bodies.size() + claim_tokens.size());
  for (const auto& [_, pb] : pc.bodies) docs.push_back(pb.all_token_ids);
  for (const auto& [_, toks] : claim_tokens)
    docs.push_back(ids_for(pc.vocab, toks));
  pc.tfidf.fit(docs, pc.vocab.size());

  pc.pairs.reserve(pairs.size());
  for (const auto& pr : pairs)
    pc.pairs.push_back({pr.claim, pr.body_id, pr.stance});
  return pc;
}

inline void save_cache(const std::string& path, const PreparedCorpus& pc) {
  nlohmann::json meta;
  meta["options"] = {{"p", pc.options.p},
                     {"L", pc.options.L},
                     {"claim_len", pc.options.claim_len},
                     {"e_dim", pc.options.e_dim}};
  meta["tfidf"] = {{"num_docs", pc.tfidf.num_docs()},
                   {"df", pc.tfidf.df()},
                   {"weighting", "tf*(ln((1+N)/(1+df))+1)"}};
  std::vector<std::string> tokens(pc.vocab.tokens().begin() + 2,
                                  pc.vocab.tokens().end());
  meta["vocab"] = tokens;
  meta["vocab_hash"] = pc.vocab.hash();
  nlohmann::json bodies = nlohmann::json::array();
  for (const auto& [id, pb] : pc.bodies)
    bodies.push_back({{"id", id}, {"paragraphs", pb.paragraphs}});
  meta["bodies"] = std::move(bodies);
  nlohmann::json prs = nlohmann::json::array();
  for (const auto& pr : pc.pairs) {
    nlohmann::json j = {{"claim", pr.claim}, {"body", pr.body_id}};
    if (pr.stance) j["stance"] = to_string(*pr.stance);
    prs.push_back(std::move(j));
  }
  meta["pairs"] = std::move(prs);
  meta["embedding"] = {{"rows", pc.embeddings.rows.rows()},
                       {"cols", pc.embeddings.rows.cols()}};
  container::write_container(path, kCacheMagic, kCacheVersion, meta,
                             {pc.embeddings.rows.data()},
                             {static_cast<std::size_t>(pc.embeddings.rows.size())});
}

inline PreparedCorpus load_cache(const std::string& path) {
  auto r = container::open_container(path, kCacheMagic, kCacheVersion);
  PreparedCorpus pc;
  const auto& opts = r.meta.at("options");
  pc.options.p = opts.at("p").get<int>();
  pc.options.L = opts.at("L").get<int>();
  pc.options.claim_len = opts.at("claim_len").get<int>();
  pc.options.e_dim = opts.at("e_dim").get<int>();

  pc.vocab = Vocabulary(r.meta.at("vocab").get<std::vector<std::string>>());
  if (r.meta.contains("vocab_hash") &&
      pc.vocab.hash() != r.meta.at("vocab_hash").get<std::uint64_t>())
    throw std::runtime_error(path + ": vocabulary hash mismatch");

  pc.tfidf.restore(r.meta.at("tfidf").at("df").get<std::vector<int>>(),
                   r.meta.at("tfidf").at("num_docs").get<int>());

  for (const auto& jb : r.meta.at("bodies")) {
    ArticleBody body;
    body.body_id = jb.at("id").get<int>();
    body.paragraphs = jb.at("paragraphs").get<std::vector<std::string>>();
    pc.bodies[body.body_id] = detail::prepare_body(body, &pc.vocab);
  }
  for (const auto& jp : r.meta.at("pairs")) {
    PreparedPair pr;
    pr.claim = jp.at("claim").get<std::string>();
    pr.body_id = jp.at("body").get<int>();
    if (jp.contains("stance")) {
      auto st = parse_stance(jp.at("stance").get<std::string>());
      if (!st) throw std::runtime_error(path + ": bad stance in cache");
      pr.stance = st;
    }
    pc.pairs.push_back(std::move(pr));
  }

  Eigen::Index rows = r.meta.at("embedding").at("rows").get<Eigen::Index>();
  Eigen::Index cols = r.meta.at("embedding").at("cols").get<Eigen::Index>();
  if (rows != pc.vocab.size())
    throw std::runtime_error(path + ": embedding row count mismatch");
  pc.embeddings.rows.resize(rows, cols);
  container::read_block(r, pc.embeddings.rows.data(),
                        static_cast<std::size_t>(rows * cols), "embeddings");
  return pc;
}

}  // namespace stance
