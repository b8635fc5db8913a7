#pragma once

#include <filesystem>
#include <vector>

#include "gasl/nn.hpp"
#include "gasl/types.hpp"

namespace gasl::vis {

namespace fs = std::filesystem;

/// Grayscale image, pixel values in [0, 1].
struct Image {
  int w = 0, h = 0;
  Mat pix;  // h x w
};

/// Loads netpbm images (P2/P5 graymaps, P3/P6 pixmaps; color is reduced to
/// luminance). Failures carry the file identity.
Image load_image(const fs::path& path);
void save_pgm(const fs::path& path, const Image& img);

Image resize_bilinear(const Image& img, int side);
Image center_crop(const Image& img, int side);

struct ImageFolder {
  std::vector<Image> images;
  std::vector<Label> y;
};
/// Directory layout: <class_id>/<file>.
ImageFolder load_image_dir(const fs::path& dir);

/// Pretrained image encoder behind a pluggable interface: a frozen pooling
/// trunk plus a trainable linear projection to the feature space (the part
/// finetuning moves). The stock implementation is a tiny seeded
/// random-projection backbone for desk-scale work.
class Backbone {
 public:
  virtual ~Backbone() = default;
  virtual int pooled_dim() const = 0;
  /// Frozen trunk: preprocessed image -> pooled vector.
  virtual Vec pool(const Image& img) const = 0;

  int out_dim() const { return out_dim_; }
  int resize_side() const { return 256; }
  int crop_side() const { return 224; }

  nn::Params& params() { return params_; }
  const nn::Params& params() const { return params_; }

  /// resize -> center crop -> pool, stacked into a batch matrix.
  Mat pool_batch(const std::vector<Image>& images) const;
  /// Full evaluation pass: pooled batch through the projection layer.
  Mat extract(const std::vector<Image>& images) const;

 protected:
  explicit Backbone(int out_dim) : out_dim_(out_dim) {}
  int out_dim_ = 0;
  nn::Params params_;  // proj.W, proj.b (+ head.W, head.b during finetuning)
};

class ToyBackbone : public Backbone {
 public:
  ToyBackbone(int out_dim, std::uint64_t seed, int grid = 8);
  int pooled_dim() const override { return grid_ * grid_; }
  Vec pool(const Image& img) const override;

 private:
  int grid_;
};

struct VisualFinetuneConfig {
  double alpha_se = 0.01;   // regularizer weight in the total loss
  double delta_se = 1.0;    // margin
  double lambda_se = 0.9;   // positive/negative mixing weight
  int epochs = 10;
  int batch_size = 32;
  double lr0 = 0.01;
  double momentum = 0.9;
  double lr_decay = 0.1;
  int lr_period = 7;        // epochs between decays
  bool printed_form = false;  // legacy sign convention of the hinge
  std::uint64_t seed = 0;

  void validate() const;
};

/// lr(epoch) = lr0 * lr_decay^(epoch / lr_period)
double finetune_lr(const VisualFinetuneConfig& cfg, int epoch);

FeatureSet extract_naive(const std::vector<Image>& images,
                         const std::vector<Label>& y, const Backbone& backbone,
                         const std::string& dataset_id);

struct FinetuneLog {
  std::vector<double> epoch_loss;
};

/// Cross-entropy finetuning on seen classes only (labels above n_seen are
/// zero-shot leakage).
void finetune_ce(Backbone& backbone, const std::vector<Image>& images,
                 const std::vector<Label>& y, int n_seen,
                 const VisualFinetuneConfig& cfg, FinetuneLog* log = nullptr);

/// max(0, Delta - lambda*C(x,a_pos) + (1-lambda)*C(x,a_neg)); printed_form
/// flips the sign of both cosine terms.
double semantic_regularizer(const Vec& x, const Vec& a_pos, const Vec& a_neg,
                            double delta, double lambda,
                            bool printed_form = false);

void finetune_regularized(Backbone& backbone, const std::vector<Image>& images,
                          const std::vector<Label>& y, int n_seen,
                          const SemanticTable& table,
                          const VisualFinetuneConfig& cfg,
                          FinetuneLog* log = nullptr);

}  // namespace gasl::vis
