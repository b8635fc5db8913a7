#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gasl/semantic.hpp"
#include "gradcheck.hpp"

using namespace gasl;
using ad::Var;

TEST_CASE("character encoding") {
  std::vector<int> ids = sem::encode_chars(" a~", 10);
  REQUIRE(ids.size() == 3);
  CHECK(ids[0] == 1);            // space = 32 -> 1
  CHECK(ids[1] == 'a' - 31);     // printable offset
  CHECK(ids[2] == 95);           // '~' = 126 -> top of the vocabulary
  CHECK(sem::encode_chars("x\ny", 10)[1] == 0);  // control chars pad
  CHECK(sem::encode_chars("abcdef", 4).size() == 4);
  std::vector<int> empty = sem::encode_chars("", 10);
  REQUIRE(empty.size() == 1);
  CHECK(empty[0] == 0);
  for (int id : sem::encode_chars("Hello, world!", 64)) {
    CHECK(id >= 0);
    CHECK(id < sem::kVocab);
  }
}

TEST_CASE("toy corpus is deterministic and class-complete") {
  sem::TextCorpus a = sem::toy_corpus(4, 3, 9);
  sem::TextCorpus b = sem::toy_corpus(4, 3, 9);
  REQUIRE(a.texts.size() == 4);
  for (Label c = 1; c <= 4; ++c) {
    REQUIRE(a.texts.at(c).size() == 3);
    CHECK(a.texts.at(c) == b.texts.at(c));
    for (const auto& t : a.texts.at(c)) CHECK(!t.empty());
  }
  sem::TextCorpus c = sem::toy_corpus(4, 3, 10);
  CHECK(a.texts.at(1) != c.texts.at(1));
}

TEST_CASE("joint-embedding direction loss hand values") {
  Mat pool(2, 2);
  pool << 1, 0, 0, 1;
  // Perfectly aligned anchors violate nothing.
  Mat good(2, 2);
  good << 1, 0, 0, 1;
  CHECK(sem::sje_direction_loss(good, {1, 2}, pool) == doctest::Approx(0.0));
  // Fully swapped anchors: margin 1 plus cosine gap 1 each.
  Mat bad(2, 2);
  bad << 0, 1, 1, 0;
  CHECK(sem::sje_direction_loss(bad, {1, 2}, pool) == doctest::Approx(2.0));
  // Mixed: one aligned (0) and one swapped (2) average to 1.
  Mat mixed(2, 2);
  mixed << 1, 0, 1, 0;
  CHECK(sem::sje_direction_loss(mixed, {1, 2}, pool) == doctest::Approx(1.0));
  // A single-class pool can never be violated.
  Mat one(1, 2);
  one << 0.3, 0.7;
  CHECK(sem::sje_direction_loss(one, {1}, pool.topRows(1)) ==
        doctest::Approx(0.0));
  CHECK_THROWS_AS(sem::sje_direction_loss(good, {1, 2}, Mat(0, 2)),
                  DegenerateInput);
  CHECK_THROWS_AS(sem::sje_direction_loss(good, {1}, pool), ShapeError);
  CHECK_THROWS_AS(sem::sje_direction_loss(good, {1, 3}, pool), ShapeError);
}

TEST_CASE("joint-embedding loss differentiates") {
  nn::Params p;
  Rng rng(23);
  p.gaussian("anchors", 4, 3, rng, 1.0);
  p.gaussian("pool", 3, 3, rng, 1.0);
  const std::vector<Label> y{1, 2, 3, 1};
  auto value = [&] {
    ad::Tape t;
    nn::Binder b(t, p);
    return t.val(sem::sje_direction_loss_t(t, b("anchors"), y, b("pool")))(0,
                                                                           0);
  };
  std::map<std::string, Mat> grads;
  {
    ad::Tape t;
    nn::Binder b(t, p);
    t.backward(sem::sje_direction_loss_t(t, b("anchors"), y, b("pool")));
    grads = b.grads();
  }
  CHECK(test::fd_worst_rel(p, grads, value) < 1e-4);
}

namespace {

sem::TextEncoderConfig tiny_cfg(sem::CoreKind core, double alpha) {
  sem::TextEncoderConfig cfg;
  cfg.core = core;
  cfg.hidden = 8;
  cfg.emb_dim = 4;
  cfg.max_len = 12;
  cfg.alpha = alpha;
  cfg.epochs = 2;
  cfg.seed = 5;
  return cfg;
}

}  // namespace

TEST_CASE("text encoding is deterministic with the configured width") {
  sem::TextEncoderState s;
  s.cfg = tiny_cfg(sem::CoreKind::gru_like, 0.5);
  // Train on a matching toy problem to populate the parameters.
  sem::TextCorpus corpus = sem::toy_corpus(3, 2, 7);
  Rng rng(6);
  FeatureSet visual(nn::randn(6, 5, rng), {1, 1, 2, 2, 3, 3},
                    VisualProvenance::original, "toy");
  s = sem::train_text_encoder(corpus, visual, s.cfg);
  Vec h1 = sem::encode_text(s, "hello");
  Vec h2 = sem::encode_text(s, "hello");
  CHECK(h1.size() == 8);
  CHECK((h1 - h2).cwiseAbs().maxCoeff() == 0.0);
  CHECK((h1 - sem::encode_text(s, "other")).cwiseAbs().maxCoeff() > 0.0);

  SemanticTable table = sem::class_embeddings(s, corpus, "toy");
  CHECK(table.classes() == 3);
  CHECK(table.dim() == 8);

  // Gaps in the corpus are missing descriptions.
  sem::TextCorpus gap = corpus;
  gap.texts.erase(2);
  CHECK_THROWS_AS(sem::class_embeddings(s, gap, "toy"), MissingDescription);
  CHECK_THROWS_AS(sem::train_text_encoder(gap, visual, s.cfg),
                  MissingDescription);
  sem::TextEncoderConfig bad = s.cfg;
  bad.alpha = 1.5;
  CHECK_THROWS_AS(sem::train_text_encoder(corpus, visual, bad), ConfigError);
}

TEST_CASE("lstm core trains too") {
  sem::TextCorpus corpus = sem::toy_corpus(2, 2, 11);
  Rng rng(8);
  FeatureSet visual(nn::randn(4, 5, rng), {1, 1, 2, 2},
                    VisualProvenance::original, "toy");
  sem::TextEncoderState s = sem::train_text_encoder(
      corpus, visual, tiny_cfg(sem::CoreKind::lstm_like, 0.5));
  CHECK(sem::encode_text(s, "abc").size() == 8);
}

TEST_CASE("provenance follows core and balance") {
  sem::TextEncoderState s;
  s.cfg = tiny_cfg(sem::CoreKind::lstm_like, 0.5);
  CHECK(s.provenance() == SemanticProvenance::naive);
  s.cfg = tiny_cfg(sem::CoreKind::gru_like, 0.5);
  CHECK(s.provenance() == SemanticProvenance::gru);
  s.cfg = tiny_cfg(sem::CoreKind::gru_like, 0.8);
  CHECK(s.provenance() == SemanticProvenance::imb_gru);
}
