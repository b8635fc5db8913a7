#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gasl/types.hpp"

namespace gasl {

/// Canonical seen/unseen and train/test-seen assignment a split is built from.
/// `seen_full` is the zero-shot training pool; `train_seen` and `test_seen`
/// are subsets of it (they need not tile it exactly).
struct BasePartition {
  IndexList seen_full;
  IndexList train_seen;
  IndexList test_seen;
  IndexList unseen_pool;
};

struct ShotSelection {
  std::map<Label, IndexList> chosen;  // exactly N sorted indices per class
  std::uint64_t seed = 0;
  std::string rule = "uniform-without-replacement";
};

/// Seeded uniform N-per-class sampling without replacement; chosen indices are
/// returned sorted so the result is reproducible byte-for-byte.
ShotSelection select_shots(const std::vector<Label>& labels,
                           const IndexList& pool, int shots,
                           std::uint64_t seed);

SplitSpec build_split(const DatasetMeta& meta, const std::vector<Label>& labels,
                      const BasePartition& base, Task task,
                      std::optional<int> shots, std::uint64_t seed);

struct SplitReport {
  bool class_disjointness = true;
  bool index_disjointness = true;
  bool cardinality = true;
  bool shot_counts = true;
  std::vector<std::string> failures;
  bool pass() const {
    return class_disjointness && index_disjointness && cardinality && shot_counts;
  }
};

SplitReport validate_split(const SplitSpec& split,
                           const std::vector<Label>& labels,
                           const DatasetMeta& meta, const BasePartition& base);

/// One benchmark dataset realized at index level with the published
/// cardinalities (class counts distributed as evenly as possible).
struct DatasetRealization {
  DatasetMeta meta;
  std::vector<Label> labels;
  BasePartition base;
};

/// Known ids: FLO, CUB, SUN, AWA2, AWA.
DatasetRealization benchmark_catalog(const std::string& dataset_id);

/// Seeded per-class train/test-seen division for synthetic data
/// (roughly 80/20, remainder to the training side).
BasePartition make_base_partition(const std::vector<Label>& labels,
                                  const DatasetMeta& meta, std::uint64_t seed,
                                  double train_fraction = 0.8);

}  // namespace gasl
