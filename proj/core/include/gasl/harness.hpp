#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gasl/classify.hpp"
#include "gasl/config.hpp"
#include "gasl/generators.hpp"
#include "gasl/splits.hpp"
#include "gasl/types.hpp"

namespace gasl::hrn {

namespace fs = std::filesystem;

/// Desk-scale stand-in dataset: seeded class prototypes pushed through one
/// fixed random linear map, so the class descriptions genuinely predict the
/// features.
struct SyntheticDatasetSpec {
  int p = 8, q = 4;
  int d_x = 32, d_a = 16;
  int samples_per_class = 50;
  double noise = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

std::string synthetic_spec_to_json(const SyntheticDatasetSpec& spec);
SyntheticDatasetSpec synthetic_spec_from_json(const std::string& text);

struct DatasetBundle {
  FeatureSet features;
  SemanticTable semantics;
  DatasetMeta meta;
  BasePartition base;
};

DatasetBundle make_synthetic_dataset(const SyntheticDatasetSpec& spec);

/// Reads one JSON archive with a feature matrix, labels, a class-attribute
/// matrix and train/test-seen/test-unseen index vectors. Labels are remapped
/// to the dense convention (seen classes first).
DatasetBundle ingest_community_splits(const fs::path& archive);
void save_dataset_bundle(const DatasetBundle& bundle, const fs::path& dir);
DatasetBundle load_dataset_bundle(const fs::path& dir);

struct ExperimentRecord {
  ExperimentConfig cfg;
  ResultRecord result;
};

std::string experiment_record_to_json(const ExperimentRecord& rec);
ExperimentRecord experiment_record_from_json(const std::string& text);

/// Full pipeline for one configuration: generator training, synthesis,
/// classifier composition and training, evaluation, atomic persistence.
/// Non-generalized tasks fill Z/ZT; generalized tasks fill U/S/H/HT with the
/// best-H snapshot over the evaluation schedule.
ResultRecord run_experiment(const ExperimentConfig& cfg,
                            const FeatureSet& features,
                            const SemanticTable& semantics,
                            const SplitSpec& split);

/// CSV + aligned text table + model rank table under out_dir
/// (report.csv, report.txt, ranks.txt).
void emit_report(const std::vector<ExperimentRecord>& records,
                 const fs::path& out_dir,
                 std::vector<std::string>* warnings = nullptr);

}  // namespace gasl::hrn
