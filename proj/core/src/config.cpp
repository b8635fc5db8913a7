#include "gasl/config.hpp"

#include <json.hpp>

#include "gasl/rng.hpp"

namespace gasl {

using nlohmann::json;

std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::fclswgan: return "f-CLSWGAN";
    case ModelKind::lisgan: return "LisGAN";
    case ModelKind::lsrgan: return "LsrGAN";
    case ModelKind::cvae: return "CVAE";
    case ModelKind::cadavae: return "CADA-VAE";
    case ModelKind::vaecflow: return "VAE-cFlow";
    case ModelKind::fvaegand2: return "f-VAEGAN-D2";
    case ModelKind::tfvaegan: return "tf-VAEGAN";
    case ModelKind::free_model: return "FREE";
    case ModelKind::gcmcf: return "GCM-CF";
  }
  return "?";
}

ModelKind model_kind_from_string(const std::string& s) {
  for (ModelKind k : kAllModels)
    if (to_string(k) == s) return k;
  throw ConfigError("unknown model kind: " + s);
}

void ExperimentConfig::validate() const {
  if (task_is_few_shot(task) != shots.has_value())
    throw ConfigError("config: shots present iff few-shot task");
  if (shots && *shots < 1) throw ConfigError("config: shots must be >= 1");
  hp.validate();
}

static json to_json_obj(const ExperimentConfig& cfg) {
  json j;
  j["dataset_id"] = cfg.dataset_id;
  j["model"] = to_string(cfg.model);
  j["task"] = to_string(cfg.task);
  if (cfg.shots) j["shots"] = *cfg.shots;
  j["visual_provenance"] = to_string(cfg.visual_provenance);
  j["semantic_provenance"] = to_string(cfg.semantic_provenance);
  const HyperParams& h = cfg.hp;
  j["hyperparams"] = {
      {"beta", h.beta},           {"delta", h.delta},
      {"gamma", h.gamma},         {"xi", h.xi},
      {"lambda_gp", h.lambda_gp}, {"sr_margin", h.sr_margin},
      {"samc_margin", h.samc_margin}, {"samc_eta", h.samc_eta},
      {"tau", h.tau},
      {"ca_warm_start", h.ca_warm_start}, {"ca_warm_end", h.ca_warm_end},
      {"da_warm_start", h.da_warm_start}, {"da_warm_end", h.da_warm_end},
      {"soul_clusters", h.soul_clusters}, {"latent_dim", h.latent_dim},
      {"noise_dim", h.noise_dim}, {"syn_per_class", h.syn_per_class},
      {"hidden_dim", h.hidden_dim}, {"lr", h.lr},
      {"epochs", h.epochs},       {"batch_size", h.batch_size}};
  const Schedule& s = cfg.schedule;
  j["schedule"] = {{"gen_epochs", s.gen_epochs},
                   {"cls_epochs", s.cls_epochs},
                   {"critic_steps", s.critic_steps},
                   {"eval_every", s.eval_every}};
  j["seed"] = cfg.seed;
  j["output_path"] = cfg.output_path;
  return j;
}

std::string config_to_json(const ExperimentConfig& cfg) {
  return to_json_obj(cfg).dump(2);
}

ExperimentConfig config_from_json(const std::string& text) {
  json j = json::parse(text);
  ExperimentConfig cfg;
  cfg.dataset_id = j.at("dataset_id");
  cfg.model = model_kind_from_string(j.at("model"));
  cfg.task = task_from_string(j.at("task"));
  if (j.contains("shots")) cfg.shots = j["shots"].get<int>();
  if (j.contains("visual_provenance"))
    cfg.visual_provenance = visual_provenance_from_string(j["visual_provenance"]);
  if (j.contains("semantic_provenance"))
    cfg.semantic_provenance =
        semantic_provenance_from_string(j["semantic_provenance"]);
  if (j.contains("hyperparams")) {
    const json& h = j["hyperparams"];
    HyperParams& p = cfg.hp;
    auto num = [&](const char* k, double& dst) {
      if (h.contains(k)) dst = h[k].get<double>();
    };
    auto inum = [&](const char* k, int& dst) {
      if (h.contains(k)) dst = h[k].get<int>();
    };
    num("beta", p.beta);
    num("delta", p.delta);
    num("gamma", p.gamma);
    num("xi", p.xi);
    num("lambda_gp", p.lambda_gp);
    num("sr_margin", p.sr_margin);
    num("samc_margin", p.samc_margin);
    num("samc_eta", p.samc_eta);
    num("tau", p.tau);
    num("ca_warm_start", p.ca_warm_start);
    num("ca_warm_end", p.ca_warm_end);
    num("da_warm_start", p.da_warm_start);
    num("da_warm_end", p.da_warm_end);
    inum("soul_clusters", p.soul_clusters);
    inum("latent_dim", p.latent_dim);
    inum("noise_dim", p.noise_dim);
    inum("syn_per_class", p.syn_per_class);
    inum("hidden_dim", p.hidden_dim);
    num("lr", p.lr);
    inum("epochs", p.epochs);
    inum("batch_size", p.batch_size);
  }
  if (j.contains("schedule")) {
    const json& s = j["schedule"];
    if (s.contains("gen_epochs")) cfg.schedule.gen_epochs = s["gen_epochs"];
    if (s.contains("cls_epochs")) cfg.schedule.cls_epochs = s["cls_epochs"];
    if (s.contains("critic_steps")) cfg.schedule.critic_steps = s["critic_steps"];
    if (s.contains("eval_every")) cfg.schedule.eval_every = s["eval_every"];
  }
  cfg.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("output_path")) cfg.output_path = j["output_path"];
  cfg.validate();
  return cfg;
}

std::string fingerprint(const ExperimentConfig& cfg) {
  // nlohmann dumps object keys sorted, so the serialization is canonical.
  std::string canon = to_json_obj(cfg).dump();
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(canon)));
  return buf;
}

}  // namespace gasl
