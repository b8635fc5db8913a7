#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gasl/config.hpp"
#include "gasl/flow.hpp"
#include "gasl/nn.hpp"
#include "gasl/rng.hpp"
#include "gasl/types.hpp"

namespace gasl::gen {

/// A mini-batch with its per-row class descriptions attached.
struct Batch {
  Mat X;                 // n x d_x
  std::vector<Label> y;  // length n
  Mat A;                 // n x d_a, row i describes class y[i]
};

Batch make_batch(const Mat& X, const std::vector<Label>& y,
                 const SemanticTable& table);
/// Row subset of a batch.
Batch take_rows(const Batch& b, const IndexList& rows);
Batch concat_batches(const Batch& a, const Batch& b);

/// Encoded feature batch, as handed to classifier composition.
struct LatentBatch {
  Mat h;  // n x latent_dim
  enum class Source { encoder_mean, encoder_sample, feedback };
  Source source = Source::encoder_mean;
};

/// Named loss terms with their effective weights; the reported total is the
/// weighted sum.
struct LossBreakdown {
  std::map<std::string, double> terms;
  std::map<std::string, double> weights;  // defaults to 1 when absent
  double total = 0.0;

  double weighted_sum() const;
};

/// Parameters and auxiliary state of one generative model.
struct ModelState {
  ModelKind kind = ModelKind::fclswgan;
  int d_x = 0;
  int n_seen = 0;  // p; labels 1..p are seen
  Mat sem;         // (p+q) x d_a class descriptions
  HyperParams hp;
  nn::Params params;
  int epoch = 0;  // drives warm-up schedules

  // LisGAN: K soul samples per seen class, refreshed each epoch.
  Mat souls;  // (p*K) x d_x, class-major order
  std::vector<Label> soul_labels;

  // LsrGAN: real per-class means (computed once) and running estimates of the
  // generated means (exponential moving average, decay 0.9).
  Mat mu_real;              // p x d_x
  std::vector<bool> mu_real_set;
  Mat mu_fake_ema;          // (p+q) x d_x
  std::vector<bool> mu_fake_set;

  int d_a() const { return static_cast<int>(sem.cols()); }
  int n_classes() const { return static_cast<int>(sem.rows()); }
  int flow_dim() const { return d_x; }
  Vec sem_row(Label y) const;

  void check() const;
};

ModelState make_model_state(ModelKind kind, int d_x, const SemanticTable& table,
                            int n_seen, const HyperParams& hp,
                            std::uint64_t seed);

// Network descriptors for a state's components (shapes derived from dims).
nn::Mlp net_G(const ModelState& s);
nn::Mlp net_D(const ModelState& s);
nn::Mlp net_E(const ModelState& s);
nn::Mlp net_Ex(const ModelState& s);
nn::Mlp net_Ea(const ModelState& s);
nn::Mlp net_Gx(const ModelState& s);
nn::Mlp net_Ga(const ModelState& s);
nn::Mlp net_Dec(const ModelState& s);
flow::Flow net_flow(const ModelState& s);

/// K centroids per class via seeded k-means (20 iterations); rows are ordered
/// class-major. Each centroid is the mean of its cluster.
Mat soul_samples(const Mat& X, const std::vector<Label>& y, int K,
                 std::uint64_t seed, std::vector<Label>* labels = nullptr);

/// Per-class means of real training features for the semantic-relation terms.
void lsrgan_set_real_means(ModelState& s, const Mat& X,
                           const std::vector<Label>& y);
/// Folds the batch's generated class means into the running estimates.
void lsrgan_update_fake_means(ModelState& s, const Mat& X_fake,
                              const std::vector<Label>& y);

/// Evaluates the model's objective on a batch (few-shot unseen rows appended
/// when given). Pure: state is not mutated; all random draws derive from seed.
LossBreakdown objective(const ModelState& s, const Batch& seen,
                        const Batch* fs_unseen, std::uint64_t seed);
/// Same, also returning d(total)/d(params).
LossBreakdown objective_with_grads(const ModelState& s, const Batch& seen,
                                   const Batch* fs_unseen, std::uint64_t seed,
                                   std::map<std::string, Mat>* grads);

LossBreakdown fclswgan_objective(const ModelState&, const Batch&, const Batch*,
                                 std::uint64_t seed);
LossBreakdown lisgan_objective(const ModelState&, const Batch&, const Batch*,
                               std::uint64_t seed);
LossBreakdown lsrgan_objective(const ModelState&, const Batch&, const Batch*,
                               std::uint64_t seed);
LossBreakdown cvae_objective(const ModelState&, const Batch&, const Batch*,
                             std::uint64_t seed);
LossBreakdown cadavae_objective(const ModelState&, const Batch&, const Batch*,
                                std::uint64_t seed);
LossBreakdown vaecflow_objective(const ModelState&, const Batch&, const Batch*,
                                 std::uint64_t seed);
LossBreakdown fvaegand2_objective(const ModelState&, const Batch&, const Batch*,
                                  std::uint64_t seed, bool transductive = false);
LossBreakdown tfvaegan_objective(const ModelState&, const Batch&, const Batch*,
                                 std::uint64_t seed);
LossBreakdown free_objective(const ModelState&, const Batch&, const Batch*,
                             std::uint64_t seed);
LossBreakdown gcmcf_objective(const ModelState&, const Batch&, const Batch*,
                              std::uint64_t seed);

/// Generated features for the requested classes, n_per_class rows each,
/// deterministic given the seed. For decoder-carrying kinds, *latents and
/// *sem_hat receive the auxiliary features classifier composition needs.
FeatureSet synthesize_features(const ModelState& s, const SemanticTable& table,
                               const std::vector<Label>& classes,
                               int n_per_class, std::uint64_t seed,
                               Mat* latents = nullptr, Mat* sem_hat = nullptr);

/// Encodes real features into the model's latent space (decoder hidden or
/// variational mean, depending on kind) for classifier composition.
Mat encode_latent(const ModelState& s, const Mat& X, const Mat& A);

/// Reconstructed class description of real features (decoder-carrying kinds).
Mat decode_semantic(const ModelState& s, const Mat& X);

/// Binary seen/unseen routing of test samples by counterfactual faithfulness:
/// a sample whose best seen-class reconstruction is within the threshold is
/// routed to the seen branch. Without an explicit threshold the median of the
/// best-reconstruction distances is used.
std::vector<bool> counterfactual_seen_unseen_gate(
    const ModelState& s, const Mat& X_test,
    std::optional<double> threshold = std::nullopt);

// --- training (train.cpp) ---

struct TrainLog {
  std::vector<LossBreakdown> epochs;
};

/// Fits the frozen softmax head used by the discriminative loss terms.
void pretrain_cls_head(ModelState& s, const Batch& data, int epochs,
                       std::uint64_t seed);

/// Trains the state in place on the given batch source. `on_epoch`, when set,
/// runs after each completed epoch (1-based count) for mid-training
/// evaluation.
void train_model(ModelState& s, const Batch& train, const Batch* fs_unseen,
                 const Schedule& schedule, std::uint64_t seed,
                 TrainLog* log = nullptr,
                 const std::function<void(const ModelState&, int)>& on_epoch =
                     {});

void save_checkpoint(const ModelState& s, const std::string& dir);
ModelState load_checkpoint(const std::string& dir);

}  // namespace gasl::gen
