#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <sstream>

#include "stance/cache.hpp"
#include "testutil.hpp"

using namespace stance;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

TEST_CASE("prepared corpus round-trips through the cache file") {
  testutil::TempDir tmp("cache");
  testutil::SyntheticOptions opts;
  opts.counts = {4, 4, 4, 6};
  auto synth = testutil::make_synthetic(opts);
  testutil::write_embeddings(tmp.file("emb.txt"), synth.vocabulary, 8);
  BodyMap bodies;
  for (auto& b : synth.bodies) bodies[b.body_id] = b;

  PreparedCorpus pc = prepare_corpus(bodies, synth.pairs, tmp.file("emb.txt"),
                                     PrepareOptions{3, 12, 6, 8});
  save_cache(tmp.file("c.bin"), pc);
  PreparedCorpus loaded = load_cache(tmp.file("c.bin"));

  CHECK(loaded.vocab.hash() == pc.vocab.hash());
  CHECK(loaded.tfidf.num_docs() == pc.tfidf.num_docs());
  CHECK(loaded.tfidf.df() == pc.tfidf.df());
  CHECK(loaded.embeddings.rows == pc.embeddings.rows);
  CHECK(loaded.bodies.size() == pc.bodies.size());
  CHECK(loaded.pairs.size() == pc.pairs.size());

  // featurization is identical before and after the round trip
  for (std::size_t i : {std::size_t(0), pc.pairs.size() - 1}) {
    Instance a = pc.instance_for(i, true);
    Instance b = loaded.instance_for(i, true);
    CHECK(a.tensor.token_ids == b.tensor.token_ids);
    CHECK(a.tensor.mask == b.tensor.mask);
    CHECK(a.claim_ids == b.claim_ids);
    CHECK(a.p_tfidf == b.p_tfidf);
    CHECK(a.doc_bow == b.doc_bow);
    CHECK(a.bow_cosine == b.bow_cosine);
    CHECK(a.gold == b.gold);
  }

  SECTION("rerunning prepare yields a byte-identical cache") {
    PreparedCorpus pc2 = prepare_corpus(bodies, synth.pairs, tmp.file("emb.txt"),
                                        PrepareOptions{3, 12, 6, 8});
    save_cache(tmp.file("c2.bin"), pc2);
    CHECK(slurp(tmp.file("c.bin")) == slurp(tmp.file("c2.bin")));
  }

  SECTION("corrupted magic is rejected") {
    std::string raw = slurp(tmp.file("c.bin"));
    raw[0] = 'X';
    std::ofstream(tmp.file("bad.bin"), std::ios::binary) << raw;
    CHECK_THROWS(load_cache(tmp.file("bad.bin")));
  }
}

TEST_CASE("prepare summary statistics") {
  testutil::TempDir tmp("summary");
  {
    std::ofstream out(tmp.file("emb.txt"));
    out << "w 1 0\n";
  }
  BodyMap bodies;
  auto add_body = [&](int id, int paragraphs) {
    ArticleBody b;
    b.body_id = id;
    for (int i = 0; i < paragraphs; ++i) {
      if (i) b.text += "\n\n";
      b.text += "w w";
    }
    b.paragraphs = split_paragraphs(b.text);
    bodies[id] = b;
  };
  add_body(1, 1);
  add_body(2, 5);
  add_body(3, 9);
  std::vector<ClaimDocumentPair> pairs = {{"w", 1, Stance::agree},
                                          {"w", 2, Stance::unrelated},
                                          {"w", 3, Stance::unrelated}};
  PreparedCorpus pc =
      prepare_corpus(bodies, pairs, tmp.file("emb.txt"), PrepareOptions{2, 4, 3, 2});
  CHECK(pc.median_paragraph_count() == 5);
  auto counts = pc.class_counts();
  CHECK(counts[static_cast<int>(Stance::agree)] == 1);
  CHECK(counts[static_cast<int>(Stance::unrelated)] == 2);
  CHECK(counts[static_cast<int>(Stance::discuss)] == 0);
}

TEST_CASE("instances budget claims and gate padded slots") {
  testutil::TempDir tmp("inst");
  {
    std::ofstream out(tmp.file("emb.txt"));
    for (const char* w : {"alpha", "beta", "gamma", "delta", "omega"})
      out << w << " 1 0 0\n";
  }
  BodyMap bodies;
  ArticleBody b;
  b.body_id = 1;
  b.text = "alpha beta gamma.\n\nbeta beta.\n\ndelta.\n\nomega omega omega.";
  b.paragraphs = split_paragraphs(b.text);
  bodies[1] = b;
  std::vector<ClaimDocumentPair> pairs = {
      {"alpha beta alpha beta alpha beta alpha beta", 1, Stance::agree}};

  PreparedCorpus pc =
      prepare_corpus(bodies, pairs, tmp.file("emb.txt"), PrepareOptions{3, 8, 4, 3});
  Instance inst = pc.instance_for(0, true);

  // claim budget truncates to claim_len tokens
  CHECK(inst.claim_ids.size() == 4);
  // p = 3 keeps the first three paragraphs only
  CHECK(inst.tensor.num_slots() == 3);
  CHECK(inst.tensor.mask == std::vector<std::uint8_t>({1, 1, 1}));
  // the claim shares tokens with paragraphs 1-2 but not 3
  CHECK(inst.p_tfidf[0] > 0.0);
  CHECK(inst.p_tfidf[1] > 0.0);
  CHECK(inst.p_tfidf[2] == 0.0);

  // the document BOW covers all paragraphs, beyond the first p: "omega"
  // lives only in paragraph 4
  int omega = pc.vocab.lookup("omega");
  bool found = false;
  for (auto& [id, w] : inst.doc_bow) found |= id == omega;
  CHECK(found);
}
