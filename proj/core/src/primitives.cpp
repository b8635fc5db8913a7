#include "gasl/primitives.hpp"

#include <cmath>

namespace gasl::prim {

using ad::Var;

double kl_diag_gaussian(const Vec& mu, const Vec& logvar) {
  if (mu.size() != logvar.size())
    throw ShapeError("kl_diag_gaussian: mismatched parameter sizes");
  double acc = 0.0;
  for (long i = 0; i < mu.size(); ++i)
    acc += std::exp(logvar[i]) + mu[i] * mu[i] - 1.0 - logvar[i];
  return 0.5 * acc;
}

Var kl_diag_gaussian_mean(Var mu, Var logvar) {
  Var per_dim = exp_(logvar) + square(mu) - logvar;
  Var per_row = rowwise_sum(add_const(per_dim, -1.0));
  return 0.5 * mean(per_row);
}

double wasserstein2_diag(const Vec& mu1, const Vec& var1, const Vec& mu2,
                         const Vec& var2) {
  if (mu1.size() != var1.size() || mu2.size() != var2.size() ||
      mu1.size() != mu2.size())
    throw ShapeError("wasserstein2_diag: mismatched parameter sizes");
  if ((var1.array() < 0).any() || (var2.array() < 0).any())
    throw DomainError("wasserstein2_diag: negative variance");
  double acc = (mu1 - mu2).squaredNorm();
  for (long i = 0; i < var1.size(); ++i) {
    double d = std::sqrt(var1[i]) - std::sqrt(var2[i]);
    acc += d * d;
  }
  return std::sqrt(acc);
}

Var wasserstein2_diag_mean(Var mu1, Var logvar1, Var mu2, Var logvar2) {
  Var std1 = exp_(scale(logvar1, 0.5));
  Var std2 = exp_(scale(logvar2, 0.5));
  Var per_row = rowwise_sum(square(mu1 - mu2)) + rowwise_sum(square(std1 - std2));
  return mean(sqrt_(add_const(per_row, 1e-12)));
}

double cosine_similarity(const Vec& u, const Vec& v) {
  if (u.size() != v.size())
    throw ShapeError("cosine_similarity: mismatched vector sizes");
  double nu = u.norm(), nv = v.norm();
  if (nu == 0.0 || nv == 0.0)
    throw DegenerateInput("cosine_similarity: zero-norm vector");
  return u.dot(v) / (nu * nv);
}

Mat interpolate(const Mat& x_real, const Mat& x_fake, Rng& rng) {
  if (x_real.rows() != x_fake.rows() || x_real.cols() != x_fake.cols())
    throw ShapeError("interpolate: mismatched batch shapes");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Mat out(x_real.rows(), x_real.cols());
  for (long i = 0; i < x_real.rows(); ++i) {
    double alpha = unit(rng);
    out.row(i) = alpha * x_real.row(i) + (1.0 - alpha) * x_fake.row(i);
  }
  return out;
}

Var interpolate(Var x_real, Var x_fake, Rng& rng) {
  ad::Tape& t = *x_real.tape;
  const Mat& xr = t.val(x_real);
  if (xr.rows() != t.val(x_fake).rows() || xr.cols() != t.val(x_fake).cols())
    throw ShapeError("interpolate: mismatched batch shapes");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Mat alpha(xr.rows(), 1);
  for (long i = 0; i < xr.rows(); ++i) alpha(i, 0) = unit(rng);
  Var bcast = t.leaf(Mat::Ones(1, xr.cols()));
  Var am = matmul(t.leaf(alpha), bcast);
  Var am1 = matmul(t.leaf(Mat(Mat::Ones(xr.rows(), 1) - alpha)), bcast);
  return cmul(am, x_real) + cmul(am1, x_fake);
}

Var gradient_penalty(const nn::Mlp& critic, nn::Binder& b, Var x_hat, Var a,
                     double lambda) {
  ad::Tape& t = b.tape();
  const int d_x = static_cast<int>(t.val(x_hat).cols());
  Var in = concat_cols(x_hat, a);
  Var input_grad;
  critic.forward_with_input_grad(b, in, &input_grad);
  // Penalize only the visual coordinates of the critic input.
  Var gx = slice_cols(input_grad, 0, d_x);
  Var norms = sqrt_(add_const(rowwise_sum(square(gx)), 1e-12));
  return lambda * mean(square(add_const(norms, -1.0)));
}

Var gradient_penalty(const nn::Mlp& critic, nn::Binder& b, const Mat& x_hat,
                     const Mat& a, double lambda) {
  ad::Tape& t = b.tape();
  return gradient_penalty(critic, b, t.leaf(x_hat), t.leaf(a), lambda);
}

double gradient_penalty_value(const nn::Mlp& critic, const nn::Params& params,
                              const Mat& x_real, const Mat& x_fake,
                              const Mat& a, double lambda, std::uint64_t seed) {
  Rng rng(seed);
  Mat x_hat = interpolate(x_real, x_fake, rng);
  ad::Tape tape;
  nn::Binder b(tape, params);
  Var gp = gradient_penalty(critic, b, x_hat, a, lambda);
  return tape.val(gp)(0, 0);
}

Var gaussian_recon(Var x_hat, Var x) {
  return 0.5 * mean(rowwise_sum(square(x_hat - x)));
}

Var l1_recon(Var x_hat, Var x) { return mean(rowwise_sum(abs_(x_hat - x))); }

}  // namespace gasl::prim
