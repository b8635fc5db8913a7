#include "gasl/splits.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <unordered_set>

#include "gasl/rng.hpp"

namespace gasl {

namespace {

std::map<Label, IndexList> group_by_class(const std::vector<Label>& labels,
                                          const IndexList& pool) {
  std::map<Label, IndexList> by_class;
  for (long i : pool) {
    if (i < 0 || i >= static_cast<long>(labels.size()))
      throw IngestError("index out of range: " + std::to_string(i));
    by_class[labels[i]].push_back(i);
  }
  return by_class;
}

IndexList difference_sorted(const IndexList& pool,
                            const std::unordered_set<long>& remove) {
  IndexList out;
  out.reserve(pool.size());
  for (long i : pool)
    if (!remove.count(i)) out.push_back(i);
  return out;
}

}  // namespace

ShotSelection select_shots(const std::vector<Label>& labels,
                           const IndexList& pool, int shots,
                           std::uint64_t seed) {
  auto by_class = group_by_class(labels, pool);
  ShotSelection sel;
  sel.seed = seed;
  for (auto& [cls, idxs] : by_class) {
    if (static_cast<long>(idxs.size()) <= shots)
      throw ShotOverflow("class " + std::to_string(cls) + " has " +
                         std::to_string(idxs.size()) +
                         " samples, cannot select N=" + std::to_string(shots));
    std::sort(idxs.begin(), idxs.end());
    Rng rng(derive_seed(seed, "shots:" + std::to_string(cls)));
    // Partial Fisher-Yates; modulo draw keeps the stream portable.
    for (int k = 0; k < shots; ++k) {
      std::size_t j = k + static_cast<std::size_t>(rng() % (idxs.size() - k));
      std::swap(idxs[k], idxs[j]);
    }
    IndexList chosen(idxs.begin(), idxs.begin() + shots);
    std::sort(chosen.begin(), chosen.end());
    sel.chosen[cls] = std::move(chosen);
  }
  return sel;
}

SplitSpec build_split(const DatasetMeta& meta, const std::vector<Label>& labels,
                      const BasePartition& base, Task task,
                      std::optional<int> shots, std::uint64_t seed) {
  if (task_is_few_shot(task) != shots.has_value())
    throw ConfigError("build_split: shots present iff task is few-shot");

  switch (task) {
    case Task::zsl:
      return SplitSpec(task, {}, seed, base.seen_full, {}, {}, base.unseen_pool);
    case Task::gzsl:
      return SplitSpec(task, {}, seed, base.train_seen, {}, base.test_seen,
                       base.unseen_pool);
    case Task::ufsl:
    case Task::gufsl: {
      ShotSelection sel = select_shots(labels, base.unseen_pool, *shots, seed);
      IndexList train_unseen;
      std::unordered_set<long> taken;
      for (const auto& [cls, idxs] : sel.chosen)
        for (long i : idxs) {
          train_unseen.push_back(i);
          taken.insert(i);
        }
      std::sort(train_unseen.begin(), train_unseen.end());
      IndexList test_unseen = difference_sorted(base.unseen_pool, taken);
      if (task == Task::ufsl)
        return SplitSpec(task, shots, seed, base.seen_full,
                         std::move(train_unseen), {}, std::move(test_unseen));
      return SplitSpec(task, shots, seed, base.train_seen,
                       std::move(train_unseen), base.test_seen,
                       std::move(test_unseen));
    }
    case Task::sfsl:
    case Task::gsfsl: {
      // The non-retained seen samples are dropped entirely, never tested on.
      const IndexList& pool =
          (task == Task::sfsl) ? base.seen_full : base.train_seen;
      ShotSelection sel = select_shots(labels, pool, *shots, seed);
      IndexList train_seen;
      for (const auto& [cls, idxs] : sel.chosen)
        train_seen.insert(train_seen.end(), idxs.begin(), idxs.end());
      std::sort(train_seen.begin(), train_seen.end());
      if (task == Task::sfsl)
        return SplitSpec(task, shots, seed, std::move(train_seen), {}, {},
                         base.unseen_pool);
      return SplitSpec(task, shots, seed, std::move(train_seen), {},
                       base.test_seen, base.unseen_pool);
    }
  }
  throw InvalidTask("unknown task");
}

SplitReport validate_split(const SplitSpec& split,
                           const std::vector<Label>& labels,
                           const DatasetMeta& meta, const BasePartition& base) {
  SplitReport rep;
  auto fail = [&](bool& flag, const std::string& msg) {
    flag = false;
    rep.failures.push_back(msg);
  };

  std::unordered_set<long> all;
  for (const IndexList* lst : {&split.train_seen, &split.train_unseen,
                               &split.test_seen, &split.test_unseen})
    for (long i : *lst)
      if (!all.insert(i).second)
        fail(rep.index_disjointness, "duplicated index " + std::to_string(i));

  for (long i : split.train_seen)
    if (!meta.is_seen(labels[i]))
      fail(rep.class_disjointness, "train_seen holds unseen-class sample");
  for (long i : split.test_seen)
    if (!meta.is_seen(labels[i]))
      fail(rep.class_disjointness, "test_seen holds unseen-class sample");
  for (long i : split.train_unseen)
    if (!meta.is_unseen(labels[i]))
      fail(rep.class_disjointness, "train_unseen holds seen-class sample");
  for (long i : split.test_unseen)
    if (!meta.is_unseen(labels[i]))
      fail(rep.class_disjointness, "test_unseen holds seen-class sample");

  auto expect = [&](long got, long want, const std::string& what) {
    if (got != want)
      fail(rep.cardinality, what + ": expected " + std::to_string(want) +
                                ", got " + std::to_string(got));
  };
  const long pool_u = static_cast<long>(base.unseen_pool.size());
  const long q = meta.unseen_classes;
  const long p = meta.seen_classes;
  const long n = split.shots.value_or(0);
  switch (split.task) {
    case Task::zsl:
      expect(split.train_seen.size(), base.seen_full.size(), "train_seen");
      expect(split.test_unseen.size(), pool_u, "test_unseen");
      break;
    case Task::gzsl:
      expect(split.train_seen.size(), base.train_seen.size(), "train_seen");
      expect(split.test_seen.size(), base.test_seen.size(), "test_seen");
      expect(split.test_unseen.size(), pool_u, "test_unseen");
      break;
    case Task::ufsl:
    case Task::gufsl:
      expect(split.train_unseen.size(), n * q, "train_unseen");
      expect(split.test_unseen.size(), pool_u - n * q, "test_unseen");
      break;
    case Task::sfsl:
    case Task::gsfsl:
      expect(split.train_seen.size(), n * p, "train_seen");
      expect(split.test_unseen.size(), pool_u, "test_unseen");
      break;
  }

  if (split.shots) {
    const IndexList& shot_list = task_targets_unseen_shots(split.task)
                                     ? split.train_unseen
                                     : split.train_seen;
    std::map<Label, long> counts;
    for (long i : shot_list) counts[labels[i]]++;
    for (const auto& [cls, c] : counts)
      if (c != *split.shots)
        fail(rep.shot_counts, "class " + std::to_string(cls) + " has " +
                                  std::to_string(c) + " shots");
    const long classes = task_targets_unseen_shots(split.task) ? q : p;
    if (static_cast<long>(counts.size()) != classes)
      fail(rep.shot_counts, "not all targeted classes have shots");
  }
  return rep;
}

namespace {

// Distributes `total` items as evenly as possible over classes
// first_class..first_class+count-1 (remainder to the lowest ids).
std::map<Label, long> spread(long total, int first_class, int count) {
  std::map<Label, long> out;
  long base = total / count;
  long rem = total % count;
  for (int c = 0; c < count; ++c)
    out[first_class + c] = base + (c < rem ? 1 : 0);
  return out;
}

}  // namespace

DatasetRealization benchmark_catalog(const std::string& dataset_id) {
  struct Row {
    int p, q, d_a;
    long seen_full, gzsl_train, test_seen, unseen;
  };
  // Published split cardinalities. For AWA the seen pool (25517) is larger
  // than gzsl_train + test_seen; the leftover seen samples only appear in
  // the zero-shot training pool.
  static const std::map<std::string, Row> rows = {
      {"FLO", {82, 20, 1024, 7034, 5631, 1403, 1155}},
      {"CUB", {150, 50, 312, 8821, 7057, 1764, 2967}},
      {"SUN", {645, 72, 102, 12900, 10320, 2580, 1440}},
      {"AWA2", {40, 10, 85, 29409, 23527, 5882, 7913}},
      {"AWA", {40, 10, 85, 25517, 19832, 4958, 5685}},
  };
  auto it = rows.find(dataset_id);
  if (it == rows.end())
    throw ConfigError("unknown benchmark dataset: " + dataset_id);
  const Row& r = it->second;

  auto train_counts = spread(r.gzsl_train, 1, r.p);
  auto test_counts = spread(r.test_seen, 1, r.p);
  auto extra_counts =
      spread(r.seen_full - r.gzsl_train - r.test_seen, 1, r.p);
  auto unseen_counts = spread(r.unseen, r.p + 1, r.q);

  DatasetRealization out;
  out.labels.reserve(r.seen_full + r.unseen);
  long idx = 0;
  for (int c = 1; c <= r.p; ++c) {
    for (long k = 0; k < train_counts[c]; ++k) {
      out.labels.push_back(c);
      out.base.train_seen.push_back(idx);
      out.base.seen_full.push_back(idx);
      ++idx;
    }
    for (long k = 0; k < test_counts[c]; ++k) {
      out.labels.push_back(c);
      out.base.test_seen.push_back(idx);
      out.base.seen_full.push_back(idx);
      ++idx;
    }
    for (long k = 0; k < extra_counts[c]; ++k) {
      out.labels.push_back(c);
      out.base.seen_full.push_back(idx);
      ++idx;
    }
  }
  for (int c = r.p + 1; c <= r.p + r.q; ++c)
    for (long k = 0; k < unseen_counts[c]; ++k) {
      out.labels.push_back(c);
      out.base.unseen_pool.push_back(idx);
      ++idx;
    }

  std::map<Label, long> per_class;
  for (Label y : out.labels) per_class[y]++;
  out.meta = DatasetMeta(dataset_id, r.p, r.q, r.d_a, r.seen_full + r.unseen,
                         r.seen_full, r.unseen, std::move(per_class));
  return out;
}

BasePartition make_base_partition(const std::vector<Label>& labels,
                                  const DatasetMeta& meta, std::uint64_t seed,
                                  double train_fraction) {
  IndexList all(labels.size());
  std::iota(all.begin(), all.end(), 0);
  auto by_class = group_by_class(labels, all);

  BasePartition base;
  for (auto& [cls, idxs] : by_class) {
    std::sort(idxs.begin(), idxs.end());
    if (meta.is_unseen(cls)) {
      base.unseen_pool.insert(base.unseen_pool.end(), idxs.begin(), idxs.end());
      continue;
    }
    base.seen_full.insert(base.seen_full.end(), idxs.begin(), idxs.end());
    Rng rng(derive_seed(seed, "base:" + std::to_string(cls)));
    IndexList shuffled = idxs;
    for (std::size_t k = 0; k + 1 < shuffled.size(); ++k) {
      std::size_t j = k + static_cast<std::size_t>(rng() % (shuffled.size() - k));
      std::swap(shuffled[k], shuffled[j]);
    }
    long n_train = static_cast<long>(shuffled.size() * train_fraction);
    if (n_train == 0) n_train = 1;
    IndexList tr(shuffled.begin(), shuffled.begin() + n_train);
    IndexList te(shuffled.begin() + n_train, shuffled.end());
    std::sort(tr.begin(), tr.end());
    std::sort(te.begin(), te.end());
    base.train_seen.insert(base.train_seen.end(), tr.begin(), tr.end());
    base.test_seen.insert(base.test_seen.end(), te.begin(), te.end());
  }
  std::sort(base.seen_full.begin(), base.seen_full.end());
  std::sort(base.train_seen.begin(), base.train_seen.end());
  std::sort(base.test_seen.begin(), base.test_seen.end());
  std::sort(base.unseen_pool.begin(), base.unseen_pool.end());
  return base;
}

}  // namespace gasl
