#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "gasl/visual.hpp"

using namespace gasl;
namespace fs = std::filesystem;

namespace {

fs::path scratch() {
  fs::path p = fs::temp_directory_path() / "gasl_visual_test";
  fs::create_directories(p);
  return p;
}

void write_text(const fs::path& p, const std::string& body) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  f << body;
}

vis::Image gradient_image(int w, int h) {
  vis::Image img;
  img.w = w;
  img.h = h;
  img.pix.resize(h, w);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      img.pix(i, j) = double(i * w + j) / double(w * h);
  return img;
}

// Small synthetic class-separable image set: class c is a flat patch of
// brightness c / (n_cls + 1) plus a fixed texture.
std::vector<vis::Image> toy_images(const std::vector<Label>& y, int n_cls) {
  std::vector<vis::Image> out;
  Rng rng(4);
  for (Label c : y) {
    vis::Image img;
    img.w = 16;
    img.h = 16;
    img.pix = Mat::Constant(16, 16, double(c) / (n_cls + 1));
    img.pix += 0.02 * nn::randn(16, 16, rng).cwiseAbs();
    img.pix = img.pix.cwiseMin(1.0);
    out.push_back(img);
  }
  return out;
}

}  // namespace

TEST_CASE("netpbm formats load with the same luminance conventions") {
  fs::path dir = scratch();
  write_text(dir / "a.pgm", "P2\n2 2\n255\n0 255\n128 64\n");
  vis::Image p2 = vis::load_image(dir / "a.pgm");
  CHECK(p2.w == 2);
  CHECK(p2.h == 2);
  CHECK(p2.pix(0, 1) == doctest::Approx(1.0));
  CHECK(p2.pix(1, 0) == doctest::Approx(128.0 / 255.0));

  std::string p5 = "P5\n2 2\n255\n";
  p5.push_back(char(0));
  p5.push_back(char(255));
  p5.push_back(char(128));
  p5.push_back(char(64));
  write_text(dir / "b.pgm", p5);
  vis::Image b = vis::load_image(dir / "b.pgm");
  CHECK((b.pix - p2.pix).cwiseAbs().maxCoeff() < 1e-12);

  // Pure-red pixel reduces to the 0.299 luminance coefficient.
  write_text(dir / "c.ppm", "P3\n1 1\n255\n255 0 0\n");
  CHECK(vis::load_image(dir / "c.ppm").pix(0, 0) == doctest::Approx(0.299));
  std::string p6 = "P6\n1 1\n255\n";
  p6.push_back(char(0));
  p6.push_back(char(255));
  p6.push_back(char(0));
  write_text(dir / "d.ppm", p6);
  CHECK(vis::load_image(dir / "d.ppm").pix(0, 0) == doctest::Approx(0.587));

  write_text(dir / "e.pgm", "P7\n1 1\n255\n0\n");
  CHECK_THROWS_AS(vis::load_image(dir / "e.pgm"), IngestError);
  write_text(dir / "f.pgm", "P2\n2 2\n255\n0 1\n");
  CHECK_THROWS_AS(vis::load_image(dir / "f.pgm"), IngestError);
  CHECK_THROWS_AS(vis::load_image(dir / "missing.pgm"), IngestError);
}

TEST_CASE("pgm save/load round trip") {
  fs::path dir = scratch();
  vis::Image img = gradient_image(9, 5);
  vis::save_pgm(dir / "rt.pgm", img);
  vis::Image back = vis::load_image(dir / "rt.pgm");
  CHECK(back.w == 9);
  CHECK(back.h == 5);
  // 8-bit quantization bounds the error.
  CHECK((back.pix - img.pix).cwiseAbs().maxCoeff() <= 0.5 / 255.0 + 1e-9);
}

TEST_CASE("geometry: resize and crop") {
  vis::Image img = gradient_image(8, 8);
  vis::Image up = vis::resize_bilinear(img, 16);
  CHECK(up.w == 16);
  CHECK(up.h == 16);
  CHECK(up.pix.minCoeff() >= img.pix.minCoeff() - 1e-12);
  CHECK(up.pix.maxCoeff() <= img.pix.maxCoeff() + 1e-12);
  // Resizing a constant image is exact.
  vis::Image flat;
  flat.w = flat.h = 4;
  flat.pix = Mat::Constant(4, 4, 0.25);
  CHECK((vis::resize_bilinear(flat, 7).pix.array() - 0.25).abs().maxCoeff() <
        1e-12);
  vis::Image crop = vis::center_crop(img, 4);
  CHECK(crop.w == 4);
  CHECK((crop.pix - img.pix.block(2, 2, 4, 4)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_THROWS_AS(vis::center_crop(img, 9), ShapeError);
}

TEST_CASE("image directory layout maps folder names to labels") {
  fs::path root = scratch() / "folder";
  fs::remove_all(root);
  fs::create_directories(root / "1");
  fs::create_directories(root / "3");
  write_text(root / "1" / "a.pgm", "P2\n1 1\n255\n10\n");
  write_text(root / "1" / "b.pgm", "P2\n1 1\n255\n20\n");
  write_text(root / "3" / "a.pgm", "P2\n1 1\n255\n30\n");
  vis::ImageFolder f = vis::load_image_dir(root);
  CHECK(f.images.size() == 3);
  CHECK(f.y == std::vector<Label>{1, 1, 3});
  fs::create_directories(root / "notanumber");
  write_text(root / "notanumber" / "x.pgm", "P2\n1 1\n255\n1\n");
  CHECK_THROWS_AS(vis::load_image_dir(root), IngestError);
  CHECK_THROWS_AS(vis::load_image_dir(scratch() / "absent"), IngestError);
}

TEST_CASE("toy backbone is deterministic with the right shape") {
  std::vector<vis::Image> imgs = toy_images({1, 2}, 3);
  vis::ToyBackbone a(12, 5), b(12, 5), c(12, 6);
  CHECK(a.pooled_dim() == 64);
  Mat fa = a.extract(imgs);
  CHECK(fa.rows() == 2);
  CHECK(fa.cols() == 12);
  CHECK((fa - b.extract(imgs)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((fa - c.extract(imgs)).cwiseAbs().maxCoeff() > 0.0);
  FeatureSet feats = vis::extract_naive(imgs, {1, 2}, a, "toy");
  CHECK(feats.provenance == VisualProvenance::naive);
  CHECK_THROWS_AS(vis::extract_naive(imgs, {1}, a, "toy"), ShapeError);
}

TEST_CASE("finetune learning-rate schedule decays tenfold every period") {
  vis::VisualFinetuneConfig cfg;
  cfg.lr0 = 0.01;
  CHECK(vis::finetune_lr(cfg, 0) == doctest::Approx(0.01));
  CHECK(vis::finetune_lr(cfg, 6) == doctest::Approx(0.01));
  CHECK(vis::finetune_lr(cfg, 7) == doctest::Approx(0.001));
  CHECK(vis::finetune_lr(cfg, 14) == doctest::Approx(0.0001));
}

TEST_CASE("semantic regularizer hand values") {
  Vec x(2), good(2), bad(2);
  x << 1, 0;
  good << 1, 0;
  bad << 0, 1;
  // Perfectly aligned positive, orthogonal negative: delta - lambda.
  CHECK(vis::semantic_regularizer(x, good, bad, 1.0, 0.9) ==
        doctest::Approx(0.1));
  // A margin below lambda clips to zero.
  CHECK(vis::semantic_regularizer(x, good, bad, 0.5, 0.9) ==
        doctest::Approx(0.0));
  // Swapped roles: delta + (1 - lambda) stays active.
  CHECK(vis::semantic_regularizer(x, bad, good, 1.0, 0.9) ==
        doctest::Approx(1.1));
  // The legacy printed form flips both cosine signs.
  CHECK(vis::semantic_regularizer(x, good, bad, 1.0, 0.9, true) ==
        doctest::Approx(1.9));
}

TEST_CASE("finetuning learns the toy classes and guards its protocol") {
  const int n_cls = 3;
  std::vector<Label> y;
  for (int r = 0; r < 6; ++r)
    for (Label c = 1; c <= n_cls; ++c) y.push_back(c);
  std::vector<vis::Image> imgs = toy_images(y, n_cls);
  vis::VisualFinetuneConfig cfg;
  cfg.epochs = 8;
  cfg.batch_size = 6;
  cfg.seed = 3;

  vis::ToyBackbone bb(10, 5);
  vis::FinetuneLog log;
  vis::finetune_ce(bb, imgs, y, n_cls, cfg, &log);
  REQUIRE(log.epoch_loss.size() == 8);
  CHECK(log.epoch_loss.back() < log.epoch_loss.front());

  // With the regularizer weight at zero the two entry points coincide.
  Rng rng(2);
  // Descriptions live in the feature space the projection produces.
  SemanticTable table(nn::randn(n_cls, 10, rng), SemanticProvenance::original,
                      "toy");
  vis::VisualFinetuneConfig cfg0 = cfg;
  cfg0.alpha_se = 0.0;
  vis::ToyBackbone bb_ce(10, 5), bb_reg(10, 5);
  vis::FinetuneLog log_ce, log_reg;
  vis::finetune_ce(bb_ce, imgs, y, n_cls, cfg0, &log_ce);
  vis::finetune_regularized(bb_reg, imgs, y, n_cls, table, cfg0, &log_reg);
  REQUIRE(log_ce.epoch_loss.size() == log_reg.epoch_loss.size());
  for (std::size_t i = 0; i < log_ce.epoch_loss.size(); ++i)
    CHECK(log_ce.epoch_loss[i] == log_reg.epoch_loss[i]);

  // A positive regularizer weight changes the trajectory.
  vis::ToyBackbone bb_reg2(10, 5);
  vis::FinetuneLog log_reg2;
  vis::VisualFinetuneConfig cfga = cfg;
  cfga.alpha_se = 0.5;
  vis::finetune_regularized(bb_reg2, imgs, y, n_cls, table, cfga, &log_reg2);
  CHECK(log_reg2.epoch_loss.front() != log_ce.epoch_loss.front());

  // Labels beyond the seen range are zero-shot leakage.
  std::vector<Label> leaked = y;
  leaked[0] = n_cls + 1;
  vis::ToyBackbone bb2(10, 5);
  CHECK_THROWS_AS(vis::finetune_ce(bb2, imgs, leaked, n_cls, cfg),
                  ProtocolViolation);
  std::vector<Label> short_y(y.begin(), y.end() - 1);
  CHECK_THROWS_AS(vis::finetune_ce(bb2, imgs, short_y, n_cls, cfg),
                  ShapeError);
  vis::VisualFinetuneConfig bad = cfg;
  bad.lambda_se = 1.5;
  CHECK_THROWS_AS(vis::finetune_ce(bb2, imgs, y, n_cls, bad), ConfigError);
}
