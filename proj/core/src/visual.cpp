#include "gasl/visual.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "gasl/autodiff.hpp"
#include "gasl/primitives.hpp"
#include "gasl/rng.hpp"

namespace gasl::vis {

using ad::Var;

// ---------------------------------------------------------------------------
// Images

namespace {

int next_token(std::istream& in, const fs::path& path) {
  // Skips whitespace and '#' comments per the netpbm grammar.
  for (;;) {
    int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  int v;
  if (!(in >> v)) throw IngestError("malformed image header: " + path.string());
  return v;
}

}  // namespace

Image load_image(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError("cannot open image: " + path.string());
  std::string magic;
  in >> magic;
  const bool gray = magic == "P2" || magic == "P5";
  const bool color = magic == "P3" || magic == "P6";
  if (!gray && !color)
    throw IngestError("unsupported image format in " + path.string());
  const bool binary = magic == "P5" || magic == "P6";
  int w = next_token(in, path);
  int h = next_token(in, path);
  int maxval = next_token(in, path);
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535)
    throw IngestError("bad image dimensions: " + path.string());
  const int channels = color ? 3 : 1;
  Image img;
  img.w = w;
  img.h = h;
  img.pix.resize(h, w);
  if (binary) in.get();  // single whitespace after the header
  auto read_sample = [&]() -> double {
    if (binary) {
      if (maxval < 256) {
        int c = in.get();
        if (c == EOF) throw IngestError("truncated image: " + path.string());
        return c / double(maxval);
      }
      int hi = in.get(), lo = in.get();
      if (lo == EOF) throw IngestError("truncated image: " + path.string());
      return (hi * 256 + lo) / double(maxval);
    }
    int v;
    if (!(in >> v)) throw IngestError("truncated image: " + path.string());
    return v / double(maxval);
  };
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      double lum = 0;
      if (channels == 1) {
        lum = read_sample();
      } else {
        double r = read_sample(), g = read_sample(), b = read_sample();
        lum = 0.299 * r + 0.587 * g + 0.114 * b;
      }
      img.pix(i, j) = lum;
    }
  return img;
}

void save_pgm(const fs::path& path, const Image& img) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write image: " + path.string());
  out << "P5\n" << img.w << " " << img.h << "\n255\n";
  for (int i = 0; i < img.h; ++i)
    for (int j = 0; j < img.w; ++j) {
      int v = static_cast<int>(std::lround(
          std::clamp(img.pix(i, j), 0.0, 1.0) * 255.0));
      out.put(static_cast<char>(v));
    }
}

Image resize_bilinear(const Image& img, int side) {
  if (img.w < 1 || img.h < 1) throw ShapeError("resize: empty image");
  Image out;
  out.w = side;
  out.h = side;
  out.pix.resize(side, side);
  for (int i = 0; i < side; ++i)
    for (int j = 0; j < side; ++j) {
      double sy = (i + 0.5) * img.h / side - 0.5;
      double sx = (j + 0.5) * img.w / side - 0.5;
      sy = std::clamp(sy, 0.0, double(img.h - 1));
      sx = std::clamp(sx, 0.0, double(img.w - 1));
      int y0 = static_cast<int>(sy), x0 = static_cast<int>(sx);
      int y1 = std::min(y0 + 1, img.h - 1), x1 = std::min(x0 + 1, img.w - 1);
      double fy = sy - y0, fx = sx - x0;
      out.pix(i, j) = (1 - fy) * ((1 - fx) * img.pix(y0, x0) +
                                  fx * img.pix(y0, x1)) +
                      fy * ((1 - fx) * img.pix(y1, x0) + fx * img.pix(y1, x1));
    }
  return out;
}

Image center_crop(const Image& img, int side) {
  if (img.w < side || img.h < side)
    throw ShapeError("center crop larger than image");
  Image out;
  out.w = side;
  out.h = side;
  out.pix = img.pix.block((img.h - side) / 2, (img.w - side) / 2, side, side);
  return out;
}

ImageFolder load_image_dir(const fs::path& dir) {
  if (!fs::is_directory(dir))
    throw IngestError("image directory not found: " + dir.string());
  ImageFolder out;
  std::vector<fs::path> class_dirs;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory()) class_dirs.push_back(e.path());
  std::sort(class_dirs.begin(), class_dirs.end());
  for (const auto& cd : class_dirs) {
    Label cls;
    try {
      cls = std::stoi(cd.filename().string());
    } catch (const std::exception&) {
      throw IngestError("class directory is not an integer id: " + cd.string());
    }
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(cd))
      if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      out.images.push_back(load_image(f));
      out.y.push_back(cls);
    }
  }
  if (out.images.empty()) throw IngestError("no images under " + dir.string());
  return out;
}

// ---------------------------------------------------------------------------
// Backbone

Mat Backbone::pool_batch(const std::vector<Image>& images) const {
  Mat P(static_cast<long>(images.size()), pooled_dim());
  for (std::size_t i = 0; i < images.size(); ++i) {
    Image pre = center_crop(resize_bilinear(images[i], resize_side()),
                            crop_side());
    P.row(static_cast<long>(i)) = pool(pre).transpose();
  }
  return P;
}

Mat Backbone::extract(const std::vector<Image>& images) const {
  Mat P = pool_batch(images);
  Mat F = P * params_.at("proj.W");
  F.rowwise() += params_.at("proj.b").row(0);
  return F;
}

ToyBackbone::ToyBackbone(int out_dim, std::uint64_t seed, int grid)
    : Backbone(out_dim), grid_(grid) {
  Rng rng(derive_seed(seed, "toy-backbone"));
  params_.gaussian("proj.W", grid * grid, out_dim, rng,
                   1.0 / std::sqrt(double(grid * grid)));
  params_.zeros("proj.b", 1, out_dim);
}

Vec ToyBackbone::pool(const Image& img) const {
  // Average-pool the crop onto a grid x grid lattice.
  Vec v(grid_ * grid_);
  for (int gi = 0; gi < grid_; ++gi)
    for (int gj = 0; gj < grid_; ++gj) {
      int y0 = gi * img.h / grid_, y1 = (gi + 1) * img.h / grid_;
      int x0 = gj * img.w / grid_, x1 = (gj + 1) * img.w / grid_;
      y1 = std::max(y1, y0 + 1);
      x1 = std::max(x1, x0 + 1);
      v[gi * grid_ + gj] =
          img.pix.block(y0, x0, y1 - y0, x1 - x0).mean();
    }
  return v;
}

// ---------------------------------------------------------------------------
// Finetuning

void VisualFinetuneConfig::validate() const {
  if (!(lambda_se > 0.0 && lambda_se < 1.0))
    throw ConfigError("finetune: lambda must be in (0,1)");
  if (alpha_se < 0.0) throw ConfigError("finetune: alpha must be >= 0");
  if (delta_se < 0.0) throw ConfigError("finetune: margin must be >= 0");
  if (epochs < 1 || batch_size < 1 || lr_period < 1)
    throw ConfigError("finetune: bad schedule");
}

double finetune_lr(const VisualFinetuneConfig& cfg, int epoch) {
  return cfg.lr0 * std::pow(cfg.lr_decay, epoch / cfg.lr_period);
}

FeatureSet extract_naive(const std::vector<Image>& images,
                         const std::vector<Label>& y, const Backbone& backbone,
                         const std::string& dataset_id) {
  if (images.size() != y.size())
    throw ShapeError("extract: images/labels length mismatch");
  return FeatureSet(backbone.extract(images), y, VisualProvenance::naive,
                    dataset_id);
}

double semantic_regularizer(const Vec& x, const Vec& a_pos, const Vec& a_neg,
                            double delta, double lambda, bool printed_form) {
  double cp = prim::cosine_similarity(x, a_pos);
  double cn = prim::cosine_similarity(x, a_neg);
  double v = printed_form ? delta + lambda * cp - (1.0 - lambda) * cn
                          : delta - lambda * cp + (1.0 - lambda) * cn;
  return std::max(0.0, v);
}

namespace {

Var row_normalize(ad::Tape& t, Var x) {
  Var norms = sqrt_(add_const(rowwise_sum(square(x)), 1e-12));
  Var inv = cdiv(t.leaf(Mat::Ones(t.val(norms).rows(), 1)), norms);
  Var bcast = matmul(inv, t.leaf(Mat::Ones(1, t.val(x).cols())));
  return cmul(bcast, x);
}

void finetune_impl(Backbone& backbone, const std::vector<Image>& images,
                   const std::vector<Label>& y, int n_seen,
                   const SemanticTable* table, const VisualFinetuneConfig& cfg,
                   FinetuneLog* log) {
  cfg.validate();
  if (images.size() != y.size())
    throw ShapeError("finetune: images/labels length mismatch");
  for (Label l : y)
    if (l < 1 || l > n_seen)
      throw ProtocolViolation("finetune saw label " + std::to_string(l) +
                              " outside the seen classes");
  if (table && table->classes() < n_seen)
    throw ConfigError("finetune: description table does not cover seen classes");

  nn::Params& P = backbone.params();
  if (!P.has("head.W")) {
    Rng rng(derive_seed(cfg.seed, "head"));
    P.gaussian("head.W", backbone.out_dim(), n_seen, rng,
               1.0 / std::sqrt(double(backbone.out_dim())));
    P.zeros("head.b", 1, n_seen);
  }

  Mat pooled = backbone.pool_batch(images);
  const long n = pooled.rows();
  const long bs = std::min<long>(cfg.batch_size, n);
  nn::Sgd opt(cfg.lr0, cfg.momentum);
  Rng neg_rng(derive_seed(cfg.seed, "negatives"));

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    opt.set_lr(finetune_lr(cfg, epoch));
    // Seeded shuffle.
    std::vector<long> idx(n);
    for (long i = 0; i < n; ++i) idx[i] = i;
    Rng rng(derive_seed(cfg.seed, "shuffle:" + std::to_string(epoch)));
    for (long i = 0; i < n - 1; ++i) {
      long pick = i + static_cast<long>(rng() % (n - i));
      std::swap(idx[i], idx[pick]);
    }
    double epoch_loss = 0.0;
    long batches = 0;
    for (long start = 0; start < n; start += bs, ++batches) {
      long len = std::min(bs, n - start);
      Mat Pb(len, pooled.cols());
      std::vector<int> targets(len);
      std::vector<Label> yb(len);
      for (long i = 0; i < len; ++i) {
        Pb.row(i) = pooled.row(idx[start + i]);
        yb[i] = y[idx[start + i]];
        targets[i] = yb[i] - 1;
      }
      ad::Tape t;
      nn::Binder b(t, P);
      Var feats = add_rowvec(matmul(t.leaf(Pb), b("proj.W")), b("proj.b"));
      Var logits = add_rowvec(matmul(feats, b("head.W")), b("head.b"));
      Var loss = softmax_xent(logits, targets);
      if (table && cfg.alpha_se > 0.0) {
        Mat Apos(len, table->dim()), Aneg(len, table->dim());
        for (long i = 0; i < len; ++i) {
          Apos.row(i) = table->row(yb[i]).transpose();
          Label other = yb[i];
          if (n_seen > 1) {
            other = 1 + static_cast<Label>(neg_rng() % (n_seen - 1));
            if (other >= yb[i]) ++other;
          }
          Aneg.row(i) = table->row(other).transpose();
        }
        Var fx = row_normalize(t, feats);
        Var cp = rowwise_sum(cmul(fx, row_normalize(t, t.leaf(Apos))));
        Var cn = rowwise_sum(cmul(fx, row_normalize(t, t.leaf(Aneg))));
        Var inner = cfg.printed_form
                        ? scale(cp, cfg.lambda_se) -
                              scale(cn, 1.0 - cfg.lambda_se)
                        : scale(cn, 1.0 - cfg.lambda_se) -
                              scale(cp, cfg.lambda_se);
        Var se = mean(relu(add_const(inner, cfg.delta_se)));
        loss = loss + scale(se, cfg.alpha_se);
      }
      epoch_loss += t.val(loss)(0, 0);
      t.backward(loss);
      opt.step(P, b.grads());
    }
    if (log) log->epoch_loss.push_back(epoch_loss / double(batches));
  }
}

}  // namespace

void finetune_ce(Backbone& backbone, const std::vector<Image>& images,
                 const std::vector<Label>& y, int n_seen,
                 const VisualFinetuneConfig& cfg, FinetuneLog* log) {
  VisualFinetuneConfig ce = cfg;
  ce.alpha_se = 0.0;
  finetune_impl(backbone, images, y, n_seen, nullptr, ce, log);
}

void finetune_regularized(Backbone& backbone, const std::vector<Image>& images,
                          const std::vector<Label>& y, int n_seen,
                          const SemanticTable& table,
                          const VisualFinetuneConfig& cfg, FinetuneLog* log) {
  finetune_impl(backbone, images, y, n_seen, &table, cfg, log);
}

}  // namespace gasl::vis
