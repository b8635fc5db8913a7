#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "gasl/config.hpp"
#include "gasl/io.hpp"
#include "gasl/types.hpp"

using namespace gasl;
namespace fs = std::filesystem;

TEST_CASE("task helpers") {
  CHECK(!task_is_generalized(Task::zsl));
  CHECK(task_is_generalized(Task::gzsl));
  CHECK(task_is_generalized(Task::gufsl));
  CHECK(task_is_generalized(Task::gsfsl));
  CHECK(!task_is_few_shot(Task::zsl));
  CHECK(task_is_few_shot(Task::ufsl));
  CHECK(task_is_few_shot(Task::gsfsl));
  CHECK(task_targets_unseen_shots(Task::ufsl));
  CHECK(task_targets_unseen_shots(Task::gufsl));
  CHECK(!task_targets_unseen_shots(Task::sfsl));
  for (Task t : {Task::zsl, Task::gzsl, Task::ufsl, Task::gufsl, Task::sfsl,
                 Task::gsfsl})
    CHECK(task_from_string(to_string(t)) == t);
  CHECK_THROWS_AS(task_from_string("nope"), InvalidTask);
}

TEST_CASE("feature set validation") {
  Mat X = Mat::Zero(3, 2);
  CHECK_THROWS_AS(FeatureSet(X, {1, 2}, VisualProvenance::original, "d"),
                  ShapeError);
  Mat bad = X;
  bad(0, 0) = std::nan("");
  CHECK_THROWS_AS(FeatureSet(bad, {1, 2, 3}, VisualProvenance::original, "d"),
                  DomainError);
  CHECK_THROWS_AS(FeatureSet(X, {1, 2, 5}, VisualProvenance::original, "d", 3),
                  ConfigError);
  FeatureSet ok(X, {1, 2, 3}, VisualProvenance::original, "d");
  CHECK(ok.size() == 3);
  CHECK(ok.dim() == 2);
}

TEST_CASE("semantic table rows and degeneracy") {
  Mat A(3, 2);
  A << 1, 0, 0, 1, 1, 1;
  SemanticTable tab(A, SemanticProvenance::original, "d");
  CHECK(tab.row(2)(1) == 1.0);
  CHECK_THROWS_AS(tab.row(4), MissingDescription);
  Mat dup(2, 2);
  dup << 1, 2, 1, 2;
  CHECK_THROWS_AS(SemanticTable(dup, SemanticProvenance::original, "d"),
                  DegenerateInput);
}

TEST_CASE("hyperparameter validation") {
  HyperParams hp;
  CHECK_NOTHROW(hp.validate());
  hp.beta = -1;
  CHECK_THROWS_AS(hp.validate(), ConfigError);
  hp = HyperParams{};
  hp.samc_eta = 1.5;
  CHECK_THROWS_AS(hp.validate(), ConfigError);
  hp = HyperParams{};
  hp.latent_dim = 0;
  CHECK_THROWS_AS(hp.validate(), ConfigError);
}

TEST_CASE("config json round trip and fingerprint sensitivity") {
  ExperimentConfig cfg;
  cfg.dataset_id = "FLO";
  cfg.model = ModelKind::lisgan;
  cfg.task = Task::gufsl;
  cfg.shots = 5;
  cfg.seed = 42;
  cfg.hp.gamma = 0.25;
  ExperimentConfig back = config_from_json(config_to_json(cfg));
  CHECK(back.dataset_id == cfg.dataset_id);
  CHECK(back.model == cfg.model);
  CHECK(back.task == cfg.task);
  CHECK(back.shots == cfg.shots);
  CHECK(back.hp.gamma == cfg.hp.gamma);
  CHECK(fingerprint(back) == fingerprint(cfg));
  ExperimentConfig other = cfg;
  other.seed = 43;
  CHECK(fingerprint(other) != fingerprint(cfg));
  other = cfg;
  other.hp.tau = 0.5;
  CHECK(fingerprint(other) != fingerprint(cfg));
}

TEST_CASE("result record consistency") {
  ResultRecord r;
  r.U = 40.0;
  r.S = 60.0;
  r.H = 48.0;
  CHECK_NOTHROW(r.validate());
  r.H = 55.0;
  CHECK_THROWS_AS(r.validate(), DomainError);
  std::string text = io::result_to_json(ResultRecord{});
  ResultRecord empty = io::result_from_json(text);
  CHECK(!empty.Z.has_value());
  CHECK(!empty.H.has_value());
}

TEST_CASE("matrix blobs and atomic writes") {
  fs::path dir = fs::temp_directory_path() / "gasl_dm_test";
  fs::create_directories(dir);
  Mat m(2, 3);
  m << 1.5, -2.25, 3, 4, 5.125, -6;
  io::write_matrix_f64(dir / "m.f64", m);
  Mat back = io::read_matrix_f64(dir / "m.f64", 2, 3);
  CHECK((m - back).cwiseAbs().maxCoeff() == 0.0);
  io::atomic_write(dir / "x.txt", "payload");
  CHECK(io::read_file(dir / "x.txt") == "payload");
  FeatureSet f(m, {1, 2}, VisualProvenance::original, "d");
  io::save_feature_set(f, dir / "fs");
  FeatureSet f2 = io::load_feature_set(dir / "fs");
  CHECK(f2.size() == 2);
  CHECK(f2.y == f.y);
  CHECK((f2.X - f.X).cwiseAbs().maxCoeff() < 1e-6);  // f32 container
  fs::remove_all(dir);
}
