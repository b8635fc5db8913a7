#include "gasl/harness.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <set>

#include "gasl/io.hpp"
#include "gasl/rng.hpp"

namespace gasl::hrn {

using nlohmann::json;

void SyntheticDatasetSpec::validate() const {
  if (p < 1 || q < 1) throw ConfigError("synthetic spec: p and q must be >= 1");
  if (d_x < 1 || d_a < 1)
    throw ConfigError("synthetic spec: dimensions must be >= 1");
  if (samples_per_class < 2)
    throw ConfigError("synthetic spec: need >= 2 samples per class");
  if (noise < 0.0) throw ConfigError("synthetic spec: negative noise scale");
}

std::string synthetic_spec_to_json(const SyntheticDatasetSpec& s) {
  json j{{"p", s.p},
         {"q", s.q},
         {"d_x", s.d_x},
         {"d_a", s.d_a},
         {"samples_per_class", s.samples_per_class},
         {"noise", s.noise},
         {"seed", s.seed}};
  return j.dump(2);
}

SyntheticDatasetSpec synthetic_spec_from_json(const std::string& text) {
  json j = json::parse(text);
  SyntheticDatasetSpec s;
  s.p = j.at("p");
  s.q = j.at("q");
  s.d_x = j.at("d_x");
  s.d_a = j.at("d_a");
  s.samples_per_class = j.at("samples_per_class");
  s.noise = j.at("noise");
  s.seed = j.value("seed", std::uint64_t{0});
  return s;
}

DatasetBundle make_synthetic_dataset(const SyntheticDatasetSpec& spec) {
  spec.validate();
  const int C = spec.p + spec.q;
  Rng prng(derive_seed(spec.seed, "prototypes"));
  Mat A = nn::randn(C, spec.d_a, prng);
  Rng mrng(derive_seed(spec.seed, "map"));
  Mat M = nn::randn(spec.d_a, spec.d_x, mrng, 1.0 / std::sqrt(double(spec.d_a)));

  const long n = static_cast<long>(C) * spec.samples_per_class;
  Mat X(n, spec.d_x);
  std::vector<Label> labels(n);
  std::map<Label, long> counts;
  Rng nrng(derive_seed(spec.seed, "noise"));
  long at = 0;
  for (Label c = 1; c <= C; ++c) {
    Mat proto = A.row(c - 1) * M;
    for (int k = 0; k < spec.samples_per_class; ++k, ++at) {
      X.row(at) = proto + spec.noise * nn::randn(1, spec.d_x, nrng);
      labels[at] = c;
    }
    counts[c] = spec.samples_per_class;
  }

  DatasetBundle out;
  long n_seen = static_cast<long>(spec.p) * spec.samples_per_class;
  out.meta = DatasetMeta("synthetic", spec.p, spec.q, spec.d_a, n, n_seen,
                         n - n_seen, counts);
  out.features =
      FeatureSet(std::move(X), labels, VisualProvenance::original, "synthetic");
  out.semantics =
      SemanticTable(std::move(A), SemanticProvenance::original, "synthetic");
  out.base =
      make_base_partition(labels, out.meta, derive_seed(spec.seed, "base"));
  return out;
}

namespace {

Mat json_matrix(const json& j, const std::string& field) {
  if (!j.contains(field))
    throw IngestError("community archive missing field: " + field);
  const json& rows = j.at(field);
  if (!rows.is_array() || rows.empty() || !rows[0].is_array())
    throw IngestError("community archive field is not a matrix: " + field);
  Mat m(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != static_cast<std::size_t>(m.cols()))
      throw IngestError("community archive ragged matrix: " + field);
    for (std::size_t k = 0; k < rows[i].size(); ++k) m(i, k) = rows[i][k];
  }
  return m;
}

IndexList json_indices(const json& j, const std::string& field, long n) {
  if (!j.contains(field))
    throw IngestError("community archive missing field: " + field);
  IndexList out;
  for (const auto& v : j.at(field)) {
    long idx = v;
    if (idx < 0 || idx >= n)
      throw IngestError("community archive index out of range in " + field);
    out.push_back(idx);
  }
  return out;
}

}  // namespace

DatasetBundle ingest_community_splits(const fs::path& archive) {
  json j = json::parse(io::read_file(archive));
  Mat X = json_matrix(j, "features");
  Mat attrs = json_matrix(j, "attributes");
  const long n = X.rows();
  if (!j.contains("labels"))
    throw IngestError("community archive missing field: labels");
  std::vector<Label> raw = j.at("labels").get<std::vector<Label>>();
  if (static_cast<long>(raw.size()) != n)
    throw IngestError("community archive label/feature row mismatch");
  IndexList train = json_indices(j, "train_idx", n);
  IndexList test_seen = json_indices(j, "test_seen_idx", n);
  IndexList test_unseen = json_indices(j, "test_unseen_idx", n);
  std::string dataset_id = j.value("dataset_id", archive.stem().string());

  // Dense relabeling: seen classes (training side) first, then unseen.
  std::set<Label> seen_raw, unseen_raw;
  for (long i : train) seen_raw.insert(raw[i]);
  for (long i : test_seen)
    if (!seen_raw.count(raw[i]))
      throw IngestError("community archive: seen test row of untrained class");
  for (long i : test_unseen)
    if (!seen_raw.count(raw[i])) unseen_raw.insert(raw[i]);
  std::map<Label, Label> remap;
  Label next = 1;
  for (Label c : seen_raw) remap[c] = next++;
  for (Label c : unseen_raw) remap[c] = next++;
  const int C = next - 1;

  Mat A(C, attrs.cols());
  for (const auto& [orig, dense] : remap) {
    if (orig < 1 || orig > attrs.rows())
      throw IngestError("community archive: no attribute row for class " +
                        std::to_string(orig));
    A.row(dense - 1) = attrs.row(orig - 1);
  }
  std::vector<Label> labels(n);
  std::map<Label, long> counts;
  for (long i = 0; i < n; ++i) {
    auto it = remap.find(raw[i]);
    // Rows of classes outside every split keep a valid label slot only when
    // their class appears in the splits; otherwise they are unusable.
    labels[i] = it == remap.end() ? 0 : it->second;
    if (labels[i] > 0) ++counts[labels[i]];
  }

  DatasetBundle out;
  out.base.train_seen = train;
  out.base.test_seen = test_seen;
  out.base.unseen_pool = test_unseen;
  std::set<long> seen_full(train.begin(), train.end());
  seen_full.insert(test_seen.begin(), test_seen.end());
  out.base.seen_full.assign(seen_full.begin(), seen_full.end());
  out.meta = DatasetMeta(dataset_id, static_cast<int>(seen_raw.size()),
                         static_cast<int>(unseen_raw.size()),
                         static_cast<int>(attrs.cols()), n,
                         static_cast<long>(out.base.seen_full.size()),
                         static_cast<long>(test_unseen.size()), counts);
  out.features = FeatureSet(std::move(X), std::move(labels),
                            VisualProvenance::original, dataset_id, C);
  out.semantics =
      SemanticTable(std::move(A), SemanticProvenance::original, dataset_id);
  return out;
}

void save_dataset_bundle(const DatasetBundle& bundle, const fs::path& dir) {
  fs::create_directories(dir);
  io::save_feature_set(bundle.features, dir / "features");
  io::save_semantic_table(bundle.semantics, dir / "semantics");
  json j;
  j["dataset_id"] = bundle.meta.dataset_id;
  j["p"] = bundle.meta.seen_classes;
  j["q"] = bundle.meta.unseen_classes;
  j["d_a"] = bundle.meta.semantic_dim;
  j["base"] = {{"seen_full", bundle.base.seen_full},
               {"train_seen", bundle.base.train_seen},
               {"test_seen", bundle.base.test_seen},
               {"unseen_pool", bundle.base.unseen_pool}};
  io::atomic_write(dir / "meta.json", j.dump(2));
}

DatasetBundle load_dataset_bundle(const fs::path& dir) {
  DatasetBundle out;
  out.features = io::load_feature_set(dir / "features");
  out.semantics = io::load_semantic_table(dir / "semantics");
  json j = json::parse(io::read_file(dir / "meta.json"));
  out.base.seen_full = j.at("base").at("seen_full").get<IndexList>();
  out.base.train_seen = j.at("base").at("train_seen").get<IndexList>();
  out.base.test_seen = j.at("base").at("test_seen").get<IndexList>();
  out.base.unseen_pool = j.at("base").at("unseen_pool").get<IndexList>();
  std::map<Label, long> counts;
  for (Label y : out.features.y) ++counts[y];
  out.meta = DatasetMeta(
      j.at("dataset_id"), j.at("p"), j.at("q"), j.at("d_a"),
      out.features.size(), static_cast<long>(out.base.seen_full.size()),
      static_cast<long>(out.base.unseen_pool.size()), counts);
  return out;
}

std::string experiment_record_to_json(const ExperimentRecord& rec) {
  json j;
  j["config"] = json::parse(config_to_json(rec.cfg));
  j["result"] = json::parse(io::result_to_json(rec.result));
  return j.dump(2);
}

ExperimentRecord experiment_record_from_json(const std::string& text) {
  json j = json::parse(text);
  ExperimentRecord rec;
  rec.cfg = config_from_json(j.at("config").dump());
  rec.result = io::result_from_json(j.at("result").dump());
  return rec;
}

namespace {

struct EvalOut {
  double primary = 0.0;  // Z, or H for generalized scopes
  double U = 0.0, S = 0.0, H = 0.0;
  std::map<Label, double> per_class;
};

template <class Fn>
auto with_fingerprint(const std::string& fp, Fn&& fn) {
  auto tag = [&](const char* what) {
    return std::string(what) + " [experiment " + fp + "]";
  };
  try {
    return fn();
  } catch (const ConfigError& e) {
    throw ConfigError(tag(e.what()));
  } catch (const ProtocolViolation& e) {
    throw ProtocolViolation(tag(e.what()));
  } catch (const IngestError& e) {
    throw IngestError(tag(e.what()));
  } catch (const DegenerateInput& e) {
    throw DegenerateInput(tag(e.what()));
  } catch (const Error& e) {
    throw Error(tag(e.what()));
  }
}

Mat take(const Mat& X, const IndexList& rows) {
  Mat out(static_cast<long>(rows.size()), X.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.row(static_cast<long>(i)) = X.row(rows[i]);
  return out;
}

std::vector<Label> take(const std::vector<Label>& y, const IndexList& rows) {
  std::vector<Label> out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out[i] = y[rows[i]];
  return out;
}

}  // namespace

ResultRecord run_experiment(const ExperimentConfig& cfg,
                            const FeatureSet& features,
                            const SemanticTable& semantics,
                            const SplitSpec& split) {
  const std::string fp = fingerprint(cfg);
  return with_fingerprint(fp, [&]() -> ResultRecord {
    cfg.validate();
    if (split.task != cfg.task)
      throw ProtocolViolation("split task does not match the configuration");
    if (task_is_few_shot(cfg.task) && split.shots != cfg.shots)
      throw ProtocolViolation("split shots do not match the configuration");

    // Protocol guard: no test index is visible to training.
    std::set<long> train_set(split.train_seen.begin(), split.train_seen.end());
    train_set.insert(split.train_unseen.begin(), split.train_unseen.end());
    for (const IndexList* test : {&split.test_seen, &split.test_unseen})
      for (long i : *test)
        if (train_set.count(i))
          throw ProtocolViolation("test index " + std::to_string(i) +
                                  " leaks into training");
    const bool generalized = task_is_generalized(cfg.task);
    if (generalized && split.test_seen.empty())
      throw ProtocolViolation(
          "generalized evaluation requires seen test rows; refusing to reduce "
          "to the unseen-only task");
    if (split.test_unseen.empty())
      throw DegenerateInput("no unseen test rows to evaluate");

    Label n_seen = 0;
    for (long i : split.train_seen) n_seen = std::max(n_seen, features.y[i]);
    for (long i : split.test_seen) n_seen = std::max(n_seen, features.y[i]);
    const int C = semantics.classes();
    std::vector<Label> seen_classes, unseen_classes, all_classes;
    for (Label c = 1; c <= C; ++c) {
      (c <= n_seen ? seen_classes : unseen_classes).push_back(c);
      all_classes.push_back(c);
    }

    gen::Batch train = gen::make_batch(take(features.X, split.train_seen),
                                       take(features.y, split.train_seen),
                                       semantics);
    gen::Batch fsb;
    const gen::Batch* fsp = nullptr;
    FeatureSet shots_fs;
    const FeatureSet* shots_p = nullptr;
    if (!split.train_unseen.empty()) {
      fsb = gen::make_batch(take(features.X, split.train_unseen),
                            take(features.y, split.train_unseen), semantics);
      fsp = &fsb;
      shots_fs = FeatureSet(fsb.X, fsb.y, features.provenance,
                            features.dataset_id, C);
      shots_p = &shots_fs;
    }
    FeatureSet real_fs(train.X, train.y, features.provenance,
                       features.dataset_id, C);

    gen::ModelState model =
        gen::make_model_state(cfg.model, features.dim(), semantics, n_seen,
                              cfg.hp, derive_seed(cfg.seed, "model"));

    Mat X_test_unseen = take(features.X, split.test_unseen);
    std::vector<Label> y_test_unseen = take(features.y, split.test_unseen);
    Mat X_test_seen;
    std::vector<Label> y_test_seen;
    if (generalized) {
      X_test_seen = take(features.X, split.test_seen);
      y_test_seen = take(features.y, split.test_seen);
    }

    auto t0 = std::chrono::steady_clock::now();
    auto hours = [&] {
      return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                           t0)
                 .count() /
             3600.0;
    };

    auto evaluate = [&](const gen::ModelState& st,
                        std::uint64_t eval_seed) -> EvalOut {
      std::vector<Label> syn_classes = unseen_classes;
      if (cfg.model == ModelKind::cvae && generalized)
        syn_classes = all_classes;  // synthetic on both sides of the scope
      FeatureSet synth = gen::synthesize_features(
          st, semantics, syn_classes, cfg.hp.syn_per_class,
          derive_seed(eval_seed, "syn"));
      FeatureSet composed = cls::compose_training_set(
          cfg.model, &st, real_fs, shots_p, synth, cfg.task);
      cls::ClassifierSchedule cs;
      cs.epochs = cfg.schedule.cls_epochs;
      cs.seed = derive_seed(eval_seed, "clf");
      cls::ClassifierBundle bundle = cls::train_classifier(
          cls::classifier_for(cfg.model, cfg.task), composed,
          generalized ? all_classes : unseen_classes, n_seen, cs);

      EvalOut out;
      std::vector<Label> preds_u =
          bundle.predict(cls::classifier_features(st, X_test_unseen));
      if (!generalized) {
        out.primary = cls::per_class_top1(preds_u, y_test_unseen,
                                          unseen_classes, &out.per_class);
        return out;
      }
      std::vector<Label> preds_s =
          bundle.predict(cls::classifier_features(st, X_test_seen));
      out.U = cls::per_class_top1(preds_u, y_test_unseen, unseen_classes,
                                  &out.per_class);
      out.S = cls::per_class_top1(preds_s, y_test_seen, seen_classes,
                                  &out.per_class);
      out.H = cls::harmonic_mean(out.U, out.S);
      out.primary = out.H;
      return out;
    };

    ResultRecord rec;
    rec.config_hash = fp;
    rec.seed = cfg.seed;

    if (!generalized) {
      gen::train_model(model, train, fsp, cfg.schedule,
                       derive_seed(cfg.seed, "train"));
      EvalOut ev = evaluate(model, derive_seed(cfg.seed, "eval"));
      rec.Z = ev.primary;
      rec.ZT = hours();
      rec.per_class_acc = std::move(ev.per_class);
    } else {
      const int every = std::max(1, cfg.schedule.eval_every);
      double best_h = -1.0, best_ht = 0.0;
      EvalOut best;
      auto on_epoch = [&](const gen::ModelState& st, int epoch) {
        if (epoch % every != 0 && epoch != cfg.schedule.gen_epochs) return;
        EvalOut ev = evaluate(
            st, derive_seed(cfg.seed, "eval:" + std::to_string(epoch)));
        if (ev.H > best_h) {
          best_h = ev.H;
          best_ht = hours();
          best = std::move(ev);
        }
      };
      gen::train_model(model, train, fsp, cfg.schedule,
                       derive_seed(cfg.seed, "train"), nullptr, on_epoch);
      rec.U = best.U;
      rec.S = best.S;
      rec.H = best.H;
      rec.HT = best_ht;
      rec.per_class_acc = std::move(best.per_class);
    }
    rec.validate();

    const char* env = std::getenv("GASL_RESULTS_DIR");
    std::string root = env && *env ? std::string(env) : cfg.output_path;
    if (!root.empty()) {
      fs::create_directories(root);
      io::atomic_write(fs::path(root) / (fp + ".json"),
                       experiment_record_to_json({cfg, rec}));
    }
    return rec;
  });
}

}  // namespace gasl::hrn
