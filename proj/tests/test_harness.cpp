#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "gasl/harness.hpp"
#include "gasl/io.hpp"

using namespace gasl;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& leaf) {
  fs::path p = fs::temp_directory_path() / "gasl_harness_test" / leaf;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

hrn::SyntheticDatasetSpec small_spec() {
  hrn::SyntheticDatasetSpec spec;
  spec.p = 4;
  spec.q = 2;
  spec.d_x = 8;
  spec.d_a = 4;
  spec.samples_per_class = 12;
  spec.noise = 0.1;
  spec.seed = 5;
  return spec;
}

ExperimentConfig small_config(Task task) {
  ExperimentConfig cfg;
  cfg.dataset_id = "synthetic";
  cfg.model = ModelKind::fclswgan;
  cfg.task = task;
  cfg.hp.hidden_dim = 16;
  cfg.hp.latent_dim = 4;
  cfg.hp.noise_dim = 4;
  cfg.hp.syn_per_class = 15;
  cfg.hp.batch_size = 16;
  cfg.hp.lr = 1e-3;
  cfg.schedule.gen_epochs = 3;
  cfg.schedule.cls_epochs = 12;
  cfg.schedule.eval_every = 2;
  cfg.seed = 11;
  return cfg;
}

}  // namespace

TEST_CASE("synthetic dataset: geometry and counts") {
  hrn::SyntheticDatasetSpec spec;
  spec.p = 8;
  spec.q = 4;
  spec.samples_per_class = 50;
  hrn::DatasetBundle b = hrn::make_synthetic_dataset(spec);
  CHECK(b.features.size() == 600);
  CHECK(b.features.dim() == 32);
  CHECK(b.semantics.classes() == 12);
  CHECK(b.meta.seen_classes == 8);
  CHECK(b.meta.n_seen == 400);
  CHECK(b.meta.per_class_counts.at(12) == 50);
  // Base partition tiles the seen rows roughly 80/20 and stays disjoint.
  CHECK(b.base.train_seen.size() + b.base.test_seen.size() ==
        b.base.seen_full.size());
  CHECK(b.base.unseen_pool.size() == 200);

  // Zero noise collapses every class onto its prototype image.
  hrn::SyntheticDatasetSpec clean = spec;
  clean.noise = 0.0;
  hrn::DatasetBundle c = hrn::make_synthetic_dataset(clean);
  CHECK((c.features.X.row(0) - c.features.X.row(49)).cwiseAbs().maxCoeff() ==
        0.0);
  CHECK((c.features.X.row(0) - c.features.X.row(50)).cwiseAbs().maxCoeff() >
        0.0);

  // The class descriptions genuinely predict the features: nearest class mean
  // classifies nearly everything at this noise level.
  Mat means = Mat::Zero(12, b.features.dim());
  for (long i = 0; i < b.features.size(); ++i)
    means.row(b.features.y[i] - 1) += b.features.X.row(i) / 50.0;
  long hits = 0;
  for (long i = 0; i < b.features.size(); ++i) {
    long best = 0;
    (means.rowwise() - b.features.X.row(i)).rowwise().norm().minCoeff(&best);
    if (best + 1 == b.features.y[i]) ++hits;
  }
  CHECK(double(hits) / b.features.size() > 0.99);

  // Determinism.
  hrn::DatasetBundle again = hrn::make_synthetic_dataset(spec);
  CHECK((again.features.X - b.features.X).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("synthetic spec json round trip and validation") {
  hrn::SyntheticDatasetSpec spec = small_spec();
  hrn::SyntheticDatasetSpec back =
      hrn::synthetic_spec_from_json(hrn::synthetic_spec_to_json(spec));
  CHECK(back.p == spec.p);
  CHECK(back.samples_per_class == spec.samples_per_class);
  CHECK(back.noise == spec.noise);
  CHECK(back.seed == spec.seed);

  hrn::SyntheticDatasetSpec bad = spec;
  bad.p = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = spec;
  bad.samples_per_class = 1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = spec;
  bad.noise = -0.1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

namespace {

// Six rows across raw classes {2, 5, 1}: 2 and 5 are trained (seen), 1 is
// test-only (unseen). Attribute rows are indexed by raw label.
std::string community_archive() {
  return R"({
    "dataset_id": "mini",
    "features": [[0,0],[0,1],[1,0],[1,1],[2,0],[2,1]],
    "attributes": [[9,9],[1,1],[0,0],[0,0],[5,5]],
    "labels": [2, 2, 5, 5, 1, 1],
    "train_idx": [0, 2],
    "test_seen_idx": [1, 3],
    "test_unseen_idx": [4, 5]
  })";
}

}  // namespace

TEST_CASE("community archive ingestion relabels seen-first") {
  fs::path dir = scratch("ingest");
  fs::path file = dir / "mini.json";
  io::atomic_write(file, community_archive());
  hrn::DatasetBundle b = hrn::ingest_community_splits(file);
  CHECK(b.meta.dataset_id == "mini");
  CHECK(b.meta.seen_classes == 2);
  CHECK(b.meta.unseen_classes == 1);
  // Raw 2 -> 1, raw 5 -> 2 (seen, ascending raw order), raw 1 -> 3 (unseen).
  CHECK(b.features.y == std::vector<Label>{1, 1, 2, 2, 3, 3});
  CHECK(b.semantics.A(0, 0) == doctest::Approx(1.0));  // raw class 2
  CHECK(b.semantics.A(1, 0) == doctest::Approx(5.0));  // raw class 5
  CHECK(b.semantics.A(2, 0) == doctest::Approx(9.0));  // raw class 1
  CHECK(b.base.train_seen == IndexList{0, 2});
  CHECK(b.base.unseen_pool == IndexList{4, 5});
  CHECK(b.base.seen_full == IndexList{0, 1, 2, 3});
}

TEST_CASE("community archive ingestion names the broken field") {
  fs::path dir = scratch("ingest_bad");
  auto expect_ingest = [&](const std::string& body, const char* needle) {
    fs::path file = dir / "bad.json";
    io::atomic_write(file, body);
    try {
      hrn::ingest_community_splits(file);
      FAIL_CHECK("expected IngestError for " << needle);
    } catch (const IngestError& e) {
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
  };
  std::string base = community_archive();
  expect_ingest(
      R"({"features": [[0]], "labels": [1], "train_idx": [0],
          "test_seen_idx": [], "test_unseen_idx": []})",
      "attributes");
  // Out-of-range index.
  std::string oor = base;
  oor.replace(oor.find("\"train_idx\": [0, 2]"), 19, "\"train_idx\": [0, 9]");
  expect_ingest(oor, "train_idx");
  // Ragged feature matrix.
  std::string ragged = base;
  ragged.replace(ragged.find("[0,1]"), 5, "[0]");
  expect_ingest(ragged, "ragged");
  // A seen test row whose class never appears in training.
  std::string leak = base;
  leak.replace(leak.find("\"train_idx\": [0, 2]"), 19, "\"train_idx\": [0]");
  expect_ingest(leak, "untrained");
}

TEST_CASE("dataset bundle save/load round trip") {
  fs::path dir = scratch("bundle");
  hrn::DatasetBundle b = hrn::make_synthetic_dataset(small_spec());
  hrn::save_dataset_bundle(b, dir);
  hrn::DatasetBundle back = hrn::load_dataset_bundle(dir);
  CHECK(back.meta.seen_classes == b.meta.seen_classes);
  CHECK(back.meta.unseen_classes == b.meta.unseen_classes);
  CHECK(back.features.y == b.features.y);
  CHECK((back.features.X - b.features.X).cwiseAbs().maxCoeff() < 1e-5);
  CHECK((back.semantics.A - b.semantics.A).cwiseAbs().maxCoeff() < 1e-5);
  CHECK(back.base.train_seen == b.base.train_seen);
  CHECK(back.base.unseen_pool == b.base.unseen_pool);
}

TEST_CASE("experiment runs: record shape, determinism, persistence") {
  hrn::DatasetBundle data = hrn::make_synthetic_dataset(small_spec());

  ExperimentConfig zcfg = small_config(Task::zsl);
  SplitSpec zsplit = build_split(data.meta, data.features.y, data.base,
                                 Task::zsl, std::nullopt, zcfg.seed);
  ResultRecord z = hrn::run_experiment(zcfg, data.features, data.semantics,
                                       zsplit);
  REQUIRE(z.Z.has_value());
  REQUIRE(z.ZT.has_value());
  CHECK(!z.U);
  CHECK(!z.S);
  CHECK(!z.H);
  CHECK(*z.Z >= 0.0);
  CHECK(*z.Z <= 100.0);
  CHECK(z.config_hash == fingerprint(zcfg));
  ResultRecord z2 = hrn::run_experiment(zcfg, data.features, data.semantics,
                                        zsplit);
  CHECK(*z2.Z == *z.Z);  // bit-identical rerun, wall clock aside

  ExperimentConfig gcfg = small_config(Task::gzsl);
  SplitSpec gsplit = build_split(data.meta, data.features.y, data.base,
                                 Task::gzsl, std::nullopt, gcfg.seed);
  fs::path results = scratch("results");
  setenv("GASL_RESULTS_DIR", results.string().c_str(), 1);
  ResultRecord g = hrn::run_experiment(gcfg, data.features, data.semantics,
                                       gsplit);
  unsetenv("GASL_RESULTS_DIR");
  REQUIRE(g.U.has_value());
  REQUIRE(g.S.has_value());
  REQUIRE(g.H.has_value());
  CHECK(!g.Z);
  CHECK(*g.H ==
        doctest::Approx(cls::harmonic_mean(*g.U, *g.S)).epsilon(1e-9));

  fs::path persisted = results / (fingerprint(gcfg) + ".json");
  REQUIRE(fs::exists(persisted));
  hrn::ExperimentRecord back =
      hrn::experiment_record_from_json(io::read_file(persisted));
  CHECK(back.result.H == g.H);
  CHECK(fingerprint(back.cfg) == fingerprint(gcfg));
}

TEST_CASE("experiment protocol guards") {
  hrn::DatasetBundle data = hrn::make_synthetic_dataset(small_spec());
  ExperimentConfig cfg = small_config(Task::zsl);
  SplitSpec gsplit = build_split(data.meta, data.features.y, data.base,
                                 Task::gzsl, std::nullopt, cfg.seed);
  // Task mismatch between split and configuration.
  CHECK_THROWS_AS(
      hrn::run_experiment(cfg, data.features, data.semantics, gsplit),
      ProtocolViolation);

  SplitSpec zsplit = build_split(data.meta, data.features.y, data.base,
                                 Task::zsl, std::nullopt, cfg.seed);
  // A test index leaking into training.
  SplitSpec leaked = zsplit;
  leaked.train_seen.push_back(leaked.test_unseen.front());
  CHECK_THROWS_AS(
      hrn::run_experiment(cfg, data.features, data.semantics, leaked),
      ProtocolViolation);

  // Generalized evaluation without seen test rows must refuse, not reduce.
  ExperimentConfig gcfg = small_config(Task::gzsl);
  SplitSpec g2 = build_split(data.meta, data.features.y, data.base, Task::gzsl,
                             std::nullopt, gcfg.seed);
  g2.test_seen.clear();
  CHECK_THROWS_AS(hrn::run_experiment(gcfg, data.features, data.semantics, g2),
                  ProtocolViolation);

  // No unseen test rows at all is a degenerate evaluation.
  SplitSpec z2 = zsplit;
  z2.test_unseen.clear();
  CHECK_THROWS_AS(hrn::run_experiment(cfg, data.features, data.semantics, z2),
                  DegenerateInput);

  // The raised message carries the experiment fingerprint.
  try {
    hrn::run_experiment(cfg, data.features, data.semantics, gsplit);
    FAIL_CHECK("expected ProtocolViolation");
  } catch (const ProtocolViolation& e) {
    CHECK(std::string(e.what()).find(fingerprint(cfg)) != std::string::npos);
  }
}

namespace {

hrn::ExperimentRecord fake_record(const std::string& dataset, ModelKind model,
                                  Task task, double metric) {
  hrn::ExperimentRecord rec;
  rec.cfg = small_config(task);
  rec.cfg.dataset_id = dataset;
  rec.cfg.model = model;
  rec.result.seed = rec.cfg.seed;
  rec.result.config_hash = fingerprint(rec.cfg);
  if (task_is_generalized(task)) {
    rec.result.U = metric;
    rec.result.S = metric;
    rec.result.H = metric;  // H(x, x) = x
    rec.result.HT = 0.01;
  } else {
    rec.result.Z = metric;
    rec.result.ZT = 0.01;
  }
  return rec;
}

}  // namespace

TEST_CASE("report emission") {
  CHECK_THROWS_AS(hrn::emit_report({}, scratch("report_empty")), EmptyReport);

  fs::path dir = scratch("report");
  std::vector<hrn::ExperimentRecord> records{
      fake_record("d1", ModelKind::fclswgan, Task::zsl, 60.0),
      fake_record("d1", ModelKind::lisgan, Task::zsl, 70.0),
      fake_record("d1", ModelKind::fclswgan, Task::gzsl, 50.0),
      fake_record("d1", ModelKind::lisgan, Task::gzsl, 55.0),
  };
  std::vector<std::string> warnings;
  hrn::emit_report(records, dir, &warnings);
  CHECK(warnings.empty());
  REQUIRE(fs::exists(dir / "report.csv"));
  REQUIRE(fs::exists(dir / "report.txt"));
  REQUIRE(fs::exists(dir / "ranks.txt"));
  std::string csv = io::read_file(dir / "report.csv");
  CHECK(csv.find("d1,f-CLSWGAN,ZSL,,original,original,60.0") !=
        std::string::npos);
  std::string txt = io::read_file(dir / "report.txt");
  CHECK(txt.find("70.0*") != std::string::npos);  // best Z starred
  CHECK(txt.find("55.0*") != std::string::npos);  // best H starred
  // LisGAN wins both cells: average rank 1, the other model 2.
  std::string ranks = io::read_file(dir / "ranks.txt");
  std::size_t lis = ranks.find("LisGAN");
  std::size_t fcls = ranks.find("f-CLSWGAN");
  REQUIRE(lis != std::string::npos);
  REQUIRE(fcls != std::string::npos);
  CHECK(lis < fcls);  // sorted by ascending average rank
  CHECK(ranks.find("1.00") != std::string::npos);
  CHECK(ranks.find("2.00") != std::string::npos);

  // A stored harmonic mean drifting from its parts is flagged.
  records[2].result.H = *records[2].result.H + 2.0;
  hrn::emit_report(records, dir, &warnings);
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("harmonic-mean mismatch") != std::string::npos);
  CHECK(io::read_file(dir / "report.txt").find("WARNING:") !=
        std::string::npos);
}
