#pragma once

#include <chrono>
#include <map>
#include <utility>
#include <vector>

#include "gasl/generators.hpp"
#include "gasl/nn.hpp"
#include "gasl/types.hpp"

namespace gasl::cls {

enum class ClassifierKind { softmax_1layer, svm, cascade };
std::string to_string(ClassifierKind k);

/// Final classifier family each model pairs with. The coarse-to-fine cascade
/// only exists for generalized scopes; elsewhere it degrades to softmax.
ClassifierKind classifier_for(ModelKind kind, Task task);

struct ClassifierSchedule {
  int epochs = 25;
  double lr = 0.05;
  int batch_size = 256;
  double svm_c = 1.0;
  std::uint64_t seed = 0;
};

struct ClassifierBundle {
  ClassifierKind kind = ClassifierKind::softmax_1layer;
  std::vector<Label> scope;  // sorted; one output per entry
  int n_seen = 0;            // cascade routing boundary
  nn::Params params;

  std::vector<Label> predict(const Mat& X) const;
};

/// Maps raw visual features into the space the model's classifier consumes:
/// identity for plain-feature models, the variational latent for latent-space
/// models, and feature/latent (and reconstructed-description) concatenations
/// for the decoder-carrying models. Applies to real training rows and to test
/// rows alike.
Mat classifier_features(const gen::ModelState& s, const Mat& X);

/// Assembles the classifier training set for one model: transformed real rows
/// (dropped entirely for the synthetic-both-sides recipe), few-shot rows in
/// scope, and the synthesized rows. Synthesized rows from the latent-space
/// model are taken as-is; every other kind's pass through the same transform
/// as real rows. `state` may be null only for kinds whose recipe is the
/// identity; otherwise ConfigError.
FeatureSet compose_training_set(ModelKind kind, const gen::ModelState* state,
                                const FeatureSet& real, const FeatureSet* shots,
                                const FeatureSet& synthetic, Task task);

ClassifierBundle train_classifier(ClassifierKind kind, const FeatureSet& train,
                                  const std::vector<Label>& scope, int n_seen,
                                  const ClassifierSchedule& schedule);

/// Mean over scope classes of the within-class top-1 ratio, x100. Optionally
/// emits the per-class ratios.
double per_class_top1(const std::vector<Label>& preds,
                      const std::vector<Label>& labels,
                      const std::vector<Label>& scope,
                      std::map<Label, double>* per_class = nullptr);

double harmonic_mean(double U, double S);

/// Runs a closure and reports wall-clock hours alongside its result.
template <class F>
auto timed(F&& f) {
  auto t0 = std::chrono::steady_clock::now();
  auto result = f();
  double hours = std::chrono::duration<double>(
                     std::chrono::steady_clock::now() - t0)
                     .count() /
                 3600.0;
  return std::make_pair(std::move(result), hours);
}

}  // namespace gasl::cls
