#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "gasl/classify.hpp"
#include "gasl/harness.hpp"
#include "gasl/io.hpp"
#include "gasl/semantic.hpp"
#include "gasl/visual.hpp"

namespace fs = std::filesystem;
using namespace gasl;

namespace {

int cmd_run(const std::string& config_path, const std::string& data_dir,
            const std::string& spec_path) {
  ExperimentConfig cfg = config_from_json(io::read_file(config_path));
  hrn::DatasetBundle bundle;
  if (!data_dir.empty()) {
    bundle = hrn::load_dataset_bundle(data_dir);
  } else if (!spec_path.empty()) {
    bundle = hrn::make_synthetic_dataset(
        hrn::synthetic_spec_from_json(io::read_file(spec_path)));
  } else {
    throw ConfigError("run: provide --data or --spec");
  }
  SplitSpec split = build_split(bundle.meta, bundle.features.y, bundle.base,
                                cfg.task, cfg.shots, cfg.seed);
  ResultRecord rec =
      hrn::run_experiment(cfg, bundle.features, bundle.semantics, split);
  std::cout << io::result_to_json(rec) << "\n";
  return 0;
}

int cmd_synth(const std::string& spec_path, const std::string& out_dir) {
  hrn::SyntheticDatasetSpec spec =
      hrn::synthetic_spec_from_json(io::read_file(spec_path));
  hrn::save_dataset_bundle(hrn::make_synthetic_dataset(spec), out_dir);
  std::cout << "wrote dataset bundle to " << out_dir << "\n";
  return 0;
}

int cmd_splits(const std::string& dataset, const std::string& task_name,
               int shots, std::uint64_t seed, const std::string& out) {
  DatasetRealization real = benchmark_catalog(dataset);
  Task task = task_from_string(task_name);
  std::optional<int> n;
  if (task_is_few_shot(task)) {
    if (shots <= 0) throw ConfigError("few-shot task needs --shots");
    n = shots;
  }
  SplitSpec split = build_split(real.meta, real.labels, real.base, task, n, seed);
  std::cout << "train_seen=" << split.train_seen.size()
            << " train_unseen=" << split.train_unseen.size()
            << " test_seen=" << split.test_seen.size()
            << " test_unseen=" << split.test_unseen.size() << "\n";
  if (!out.empty()) io::atomic_write(out, io::split_to_json(split));
  return 0;
}

int cmd_report(const std::string& in_dir, const std::string& out_dir) {
  std::vector<hrn::ExperimentRecord> records;
  for (const auto& entry : fs::directory_iterator(in_dir)) {
    if (entry.path().extension() != ".json") continue;
    records.push_back(
        hrn::experiment_record_from_json(io::read_file(entry.path())));
  }
  std::vector<std::string> warnings;
  hrn::emit_report(records, out_dir, &warnings);
  for (const auto& w : warnings) std::cerr << "WARNING: " << w << "\n";
  std::cout << "wrote report for " << records.size() << " records to "
            << out_dir << "\n";
  return 0;
}

int cmd_embed_visual(const std::string& images_dir, const std::string& out_dir,
                     int dim, const std::string& mode,
                     const std::string& semantics_dir, int n_seen,
                     std::uint64_t seed) {
  vis::ImageFolder folder = vis::load_image_dir(images_dir);
  vis::ToyBackbone backbone(dim, seed);
  vis::VisualFinetuneConfig cfg;
  cfg.seed = seed;
  std::string dataset_id = fs::path(images_dir).filename().string();
  if (mode == "ce") {
    vis::finetune_ce(backbone, folder.images, folder.y, n_seen, cfg);
  } else if (mode == "regularized") {
    if (semantics_dir.empty())
      throw ConfigError("regularized finetuning needs --semantics");
    SemanticTable table = io::load_semantic_table(semantics_dir);
    vis::finetune_regularized(backbone, folder.images, folder.y, n_seen, table,
                              cfg);
  } else if (mode != "none") {
    throw ConfigError("unknown finetune mode: " + mode);
  }
  FeatureSet features =
      vis::extract_naive(folder.images, folder.y, backbone, dataset_id);
  if (mode == "ce") features.provenance = VisualProvenance::finetuned;
  if (mode == "regularized") features.provenance = VisualProvenance::regularized;
  io::save_feature_set(features, out_dir);
  std::cout << "wrote " << features.size() << " feature rows to " << out_dir
            << "\n";
  return 0;
}

int cmd_embed_semantic(const std::string& visual_dir, const std::string& out_dir,
                       int classes, int texts_per_class,
                       const std::string& core, double alpha, int hidden,
                       std::uint64_t seed) {
  FeatureSet visual = io::load_feature_set(visual_dir);
  sem::TextCorpus corpus = sem::toy_corpus(classes, texts_per_class, seed);
  sem::TextEncoderConfig cfg;
  cfg.core = core == "lstm" ? sem::CoreKind::lstm_like : sem::CoreKind::gru_like;
  cfg.alpha = alpha;
  cfg.hidden = hidden;
  cfg.seed = seed;
  sem::TextEncoderState enc = sem::train_text_encoder(corpus, visual, cfg);
  io::save_semantic_table(sem::class_embeddings(enc, corpus, visual.dataset_id),
                          out_dir);
  std::cout << "wrote class embeddings to " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"benchmark harness for embedding-aware generative models"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run one experiment");
  std::string run_config, run_data, run_spec;
  run->add_option("--config", run_config, "experiment config JSON")->required();
  run->add_option("--data", run_data, "dataset bundle directory");
  run->add_option("--spec", run_spec, "synthetic dataset spec JSON");

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  std::string synth_spec, synth_out;
  synth->add_option("--spec", synth_spec, "spec JSON")->required();
  synth->add_option("--out", synth_out, "output directory")->required();

  auto* splits = app.add_subcommand("splits", "inspect benchmark splits");
  std::string sp_dataset, sp_task = "zsl", sp_out;
  int sp_shots = 0;
  std::uint64_t sp_seed = 0;
  splits->add_option("--dataset", sp_dataset, "FLO/CUB/SUN/AWA2/AWA")
      ->required();
  splits->add_option("--task", sp_task, "zsl/gzsl/ufsl/gufsl/sfsl/gsfsl");
  splits->add_option("--shots", sp_shots, "N for few-shot tasks");
  splits->add_option("--seed", sp_seed, "split seed");
  splits->add_option("--out", sp_out, "write the split JSON here");

  auto* report = app.add_subcommand("report", "aggregate experiment results");
  std::string rp_in, rp_out;
  report->add_option("--in", rp_in, "results directory")->required();
  report->add_option("--out", rp_out, "report directory")->required();

  auto* ev = app.add_subcommand("embed-visual", "extract visual features");
  std::string ev_images, ev_out, ev_mode = "none", ev_sem;
  int ev_dim = 32, ev_seen = 0;
  std::uint64_t ev_seed = 0;
  ev->add_option("--images", ev_images, "image directory")->required();
  ev->add_option("--out", ev_out, "feature directory")->required();
  ev->add_option("--dim", ev_dim, "feature dimension");
  ev->add_option("--finetune", ev_mode, "none/ce/regularized");
  ev->add_option("--semantics", ev_sem, "semantic table directory");
  ev->add_option("--n-seen", ev_seen, "number of seen classes");
  ev->add_option("--seed", ev_seed, "backbone seed");

  auto* es = app.add_subcommand("embed-semantic", "train class embeddings");
  std::string es_visual, es_out, es_core = "gru";
  int es_classes = 0, es_texts = 5, es_hidden = 64;
  double es_alpha = 0.5;
  std::uint64_t es_seed = 0;
  es->add_option("--visual", es_visual, "visual feature directory")->required();
  es->add_option("--out", es_out, "semantic table directory")->required();
  es->add_option("--classes", es_classes, "number of classes")->required();
  es->add_option("--texts-per-class", es_texts, "corpus size per class");
  es->add_option("--core", es_core, "gru or lstm");
  es->add_option("--alpha", es_alpha, "loss direction weight");
  es->add_option("--hidden", es_hidden, "embedding width");
  es->add_option("--seed", es_seed, "encoder seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(run_config, run_data, run_spec);
    if (*synth) return cmd_synth(synth_spec, synth_out);
    if (*splits)
      return cmd_splits(sp_dataset, sp_task, sp_shots, sp_seed, sp_out);
    if (*report) return cmd_report(rp_in, rp_out);
    if (*ev)
      return cmd_embed_visual(ev_images, ev_out, ev_dim, ev_mode, ev_sem,
                              ev_seen, ev_seed);
    if (*es)
      return cmd_embed_semantic(es_visual, es_out, es_classes, es_texts,
                                es_core, es_alpha, es_hidden, es_seed);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ProtocolViolation& e) {
    std::cerr << "protocol violation: " << e.what() << "\n";
    return 3;
  } catch (const IngestError& e) {
    std::cerr << "ingest error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
