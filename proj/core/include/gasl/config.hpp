#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "gasl/types.hpp"

namespace gasl {

enum class ModelKind {
  fclswgan,
  lisgan,
  lsrgan,
  cvae,
  cadavae,
  vaecflow,
  fvaegand2,
  tfvaegan,
  free_model,
  gcmcf,
};

inline constexpr ModelKind kAllModels[] = {
    ModelKind::fclswgan, ModelKind::lisgan,    ModelKind::lsrgan,
    ModelKind::cvae,     ModelKind::cadavae,   ModelKind::vaecflow,
    ModelKind::fvaegand2, ModelKind::tfvaegan, ModelKind::free_model,
    ModelKind::gcmcf,
};

std::string to_string(ModelKind k);
ModelKind model_kind_from_string(const std::string& s);

struct Schedule {
  int gen_epochs = 20;       // generator training epochs
  int cls_epochs = 25;       // final classifier epochs
  int critic_steps = 2;      // D steps per G step (GAN families)
  int eval_every = 5;        // epochs between H evaluations (generalized tasks)
};

struct ExperimentConfig {
  std::string dataset_id;
  ModelKind model = ModelKind::fclswgan;
  Task task = Task::zsl;
  std::optional<int> shots;
  VisualProvenance visual_provenance = VisualProvenance::original;
  SemanticProvenance semantic_provenance = SemanticProvenance::original;
  HyperParams hp;
  Schedule schedule;
  std::uint64_t seed = 0;
  std::string output_path;

  void validate() const;
};

std::string config_to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const std::string& text);

/// Stable digest of a fully populated config; any field change changes it.
std::string fingerprint(const ExperimentConfig& cfg);

}  // namespace gasl
