#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "gasl/classify.hpp"

using namespace gasl;

namespace {

struct Fixture {
  SemanticTable table;
  int d_x = 6, p = 3, q = 2;
  HyperParams hp;

  Fixture() : table(make_table()) {
    hp.hidden_dim = 8;
    hp.latent_dim = 3;
    hp.noise_dim = 3;
  }

  static SemanticTable make_table() {
    Rng rng(7);
    return SemanticTable(nn::randn(5, 4, rng), SemanticProvenance::original,
                         "toy");
  }

  gen::ModelState state(ModelKind kind) const {
    return gen::make_model_state(kind, d_x, table, p, hp, 21);
  }

  FeatureSet features(std::vector<Label> y, int width,
                      VisualProvenance prov) const {
    Rng rng(static_cast<std::uint64_t>(y.size() + width));
    Mat X = nn::randn(static_cast<long>(y.size()), width, rng);
    return FeatureSet(std::move(X), std::move(y), prov, "toy");
  }
};

const Fixture& fx() {
  static Fixture f;
  return f;
}

// Three well-separated 2-d clusters around (0,0), (10,0), (0,10).
FeatureSet separable(int per_class, std::uint64_t seed) {
  Rng rng(seed);
  Mat X(3 * per_class, 2);
  std::vector<Label> y;
  Mat centers(3, 2);
  centers << 0, 0, 10, 0, 0, 10;
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < per_class; ++i) {
      long r = c * per_class + i;
      X.row(r) = centers.row(c) + 0.3 * nn::randn(1, 2, rng);
      y.push_back(c + 1);
    }
  return FeatureSet(std::move(X), std::move(y), VisualProvenance::original,
                    "toy");
}

}  // namespace

TEST_CASE("classifier family per model") {
  CHECK(cls::classifier_for(ModelKind::cvae, Task::zsl) ==
        cls::ClassifierKind::svm);
  CHECK(cls::classifier_for(ModelKind::lisgan, Task::gzsl) ==
        cls::ClassifierKind::cascade);
  CHECK(cls::classifier_for(ModelKind::lisgan, Task::zsl) ==
        cls::ClassifierKind::softmax_1layer);
  CHECK(cls::classifier_for(ModelKind::fclswgan, Task::gufsl) ==
        cls::ClassifierKind::softmax_1layer);
}

TEST_CASE("composition: plain model, unseen-only scope keeps synthetic rows") {
  gen::ModelState s = fx().state(ModelKind::fclswgan);
  FeatureSet real = fx().features({1, 2, 3}, fx().d_x,
                                  VisualProvenance::original);
  FeatureSet synth = fx().features({4, 4, 5, 5}, fx().d_x,
                                   VisualProvenance::synthetic);
  FeatureSet train =
      cls::compose_training_set(ModelKind::fclswgan, &s, real, nullptr, synth,
                                Task::zsl);
  CHECK(train.size() == 4);  // every real seen row is out of scope
  for (Label y : train.y) CHECK(y > fx().p);
  // Generalized scope keeps the real rows too.
  FeatureSet gtrain =
      cls::compose_training_set(ModelKind::fclswgan, &s, real, nullptr, synth,
                                Task::gzsl);
  CHECK(gtrain.size() == 7);
  // A null state works for identity-recipe kinds: scope comes from the
  // synthetic labels.
  FeatureSet ntrain = cls::compose_training_set(
      ModelKind::fclswgan, nullptr, real, nullptr, synth, Task::zsl);
  CHECK(ntrain.size() == 4);
}

TEST_CASE("composition: synthetic-both-sides drops every real row") {
  gen::ModelState s = fx().state(ModelKind::cvae);
  FeatureSet real = fx().features({1, 2, 3}, fx().d_x,
                                  VisualProvenance::original);
  FeatureSet synth = fx().features({1, 2, 3, 4, 5}, fx().d_x,
                                   VisualProvenance::synthetic);
  FeatureSet train = cls::compose_training_set(ModelKind::cvae, &s, real,
                                               nullptr, synth, Task::gzsl);
  CHECK(train.size() == 5);
  CHECK(train.provenance == VisualProvenance::synthetic);
}

TEST_CASE("composition: latent and concatenated recipes change the width") {
  FeatureSet real = fx().features({1, 2, 3}, fx().d_x,
                                  VisualProvenance::original);
  {
    gen::ModelState s = fx().state(ModelKind::tfvaegan);
    FeatureSet synth = fx().features({4, 5}, fx().d_x,
                                     VisualProvenance::synthetic);
    FeatureSet train = cls::compose_training_set(ModelKind::tfvaegan, &s, real,
                                                 nullptr, synth, Task::gzsl);
    CHECK(train.dim() == fx().d_x + fx().hp.hidden_dim);
    CHECK(train.size() == 5);
  }
  {
    gen::ModelState s = fx().state(ModelKind::free_model);
    FeatureSet synth = fx().features({4, 5}, fx().d_x,
                                     VisualProvenance::synthetic);
    FeatureSet train = cls::compose_training_set(ModelKind::free_model, &s,
                                                 real, nullptr, synth,
                                                 Task::gzsl);
    CHECK(train.dim() == fx().d_x + fx().hp.hidden_dim + fx().table.dim());
  }
  {
    gen::ModelState s = fx().state(ModelKind::cadavae);
    // Latent-space synthesis arrives already in classifier space.
    FeatureSet synth = fx().features({4, 5}, fx().hp.latent_dim,
                                     VisualProvenance::synthetic);
    FeatureSet train = cls::compose_training_set(ModelKind::cadavae, &s, real,
                                                 nullptr, synth, Task::gzsl);
    CHECK(train.dim() == fx().hp.latent_dim);
    CHECK(train.size() == 5);
  }
  FeatureSet synth = fx().features({4, 5}, fx().d_x,
                                   VisualProvenance::synthetic);
  CHECK_THROWS_AS(cls::compose_training_set(ModelKind::tfvaegan, nullptr, real,
                                            nullptr, synth, Task::gzsl),
                  ConfigError);
}

TEST_CASE("composition: few-shot rows survive when in scope") {
  gen::ModelState s = fx().state(ModelKind::fclswgan);
  FeatureSet real = fx().features({1, 2, 3}, fx().d_x,
                                  VisualProvenance::original);
  FeatureSet shots = fx().features({4, 5}, fx().d_x,
                                   VisualProvenance::original);
  FeatureSet synth = fx().features({4, 5}, fx().d_x,
                                   VisualProvenance::synthetic);
  FeatureSet train = cls::compose_training_set(ModelKind::fclswgan, &s, real,
                                               &shots, synth, Task::ufsl);
  CHECK(train.size() == 4);  // 2 shots + 2 synthetic, no real seen rows
}

TEST_CASE("all three classifier kinds separate the toy clusters") {
  FeatureSet train = separable(30, 3);
  FeatureSet test = separable(10, 4);
  cls::ClassifierSchedule sched;
  sched.seed = 9;
  for (cls::ClassifierKind kind :
       {cls::ClassifierKind::softmax_1layer, cls::ClassifierKind::svm,
        cls::ClassifierKind::cascade}) {
    cls::ClassifierBundle c =
        cls::train_classifier(kind, train, {1, 2, 3}, 2, sched);
    std::vector<Label> preds = c.predict(test.X);
    double acc = cls::per_class_top1(preds, test.y, {1, 2, 3});
    INFO(cls::to_string(kind));
    CHECK(acc == doctest::Approx(100.0));
  }
}

TEST_CASE("svm needs at least two classes") {
  FeatureSet train = separable(10, 3);
  std::vector<Label> ones(train.y.size(), 1);
  FeatureSet degenerate(train.X, ones, VisualProvenance::original, "toy");
  cls::ClassifierSchedule sched;
  CHECK_THROWS_AS(
      cls::train_classifier(cls::ClassifierKind::svm, degenerate, {1}, 1,
                            sched),
      DegenerateInput);
}

TEST_CASE("per-class accuracy weights every class equally") {
  // All correct.
  CHECK(cls::per_class_top1({1, 2, 2}, {1, 2, 2}, {1, 2}) ==
        doctest::Approx(100.0));
  // 10 correct rows of one class against 1000 wrong rows of another: the
  // sample average would be 1%, the class average is exactly 50.
  std::vector<Label> preds, labels;
  for (int i = 0; i < 10; ++i) {
    preds.push_back(1);
    labels.push_back(1);
  }
  for (int i = 0; i < 1000; ++i) {
    preds.push_back(1);
    labels.push_back(2);
  }
  CHECK(cls::per_class_top1(preds, labels, {1, 2}) == 50.0);
  // Duplicating every row leaves the score unchanged.
  double once = cls::per_class_top1({1, 2}, {2, 2}, {2});
  CHECK(cls::per_class_top1({1, 1, 2, 2}, {2, 2, 2, 2}, {2}) ==
        doctest::Approx(once));
  std::map<Label, double> per_class;
  cls::per_class_top1(preds, labels, {1, 2}, &per_class);
  CHECK(per_class.at(1) == doctest::Approx(1.0));
  CHECK(per_class.at(2) == doctest::Approx(0.0));
  // A scope class with no test rows is an evaluation error.
  CHECK_THROWS_AS(cls::per_class_top1({1}, {1}, {1, 2}), EvalError);
}

TEST_CASE("harmonic mean conventions") {
  CHECK(cls::harmonic_mean(61.5, 77.2) ==
        doctest::Approx(2 * 61.5 * 77.2 / (61.5 + 77.2)));
  CHECK(cls::harmonic_mean(43.9, 57.4) == doctest::Approx(49.75).epsilon(1e-3));
  CHECK(cls::harmonic_mean(40.0, 40.0) == doctest::Approx(40.0));
  CHECK(cls::harmonic_mean(0.0, 0.0) == 0.0);
  CHECK(cls::harmonic_mean(0.0, 80.0) == 0.0);
}

TEST_CASE("timing wrapper") {
  auto [v, hours] = cls::timed([] { return 42; });
  CHECK(v == 42);
  CHECK(hours >= 0.0);
  CHECK(hours < 1.0 / 60.0);  // well under a minute of wall clock
}
