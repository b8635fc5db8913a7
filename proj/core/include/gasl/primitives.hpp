#pragma once

#include "gasl/autodiff.hpp"
#include "gasl/nn.hpp"
#include "gasl/rng.hpp"
#include "gasl/types.hpp"

namespace gasl::prim {

/// 0.5 * sum(exp(logvar) + mu^2 - 1 - logvar); zero iff standard normal.
double kl_diag_gaussian(const Vec& mu, const Vec& logvar);
/// Batch mean of the row-wise KL above.
ad::Var kl_diag_gaussian_mean(ad::Var mu, ad::Var logvar);

/// (||mu1-mu2||^2 + ||var1^{1/2} - var2^{1/2}||^2)^{1/2}.
double wasserstein2_diag(const Vec& mu1, const Vec& var1, const Vec& mu2,
                         const Vec& var2);
/// Batch mean of the row-wise distance; inputs are log-variances.
ad::Var wasserstein2_diag_mean(ad::Var mu1, ad::Var logvar1, ad::Var mu2,
                               ad::Var logvar2);

double cosine_similarity(const Vec& u, const Vec& v);

/// Per-row convex interpolation x_hat = alpha x + (1-alpha) x_fake with
/// alpha ~ U(0,1) drawn per row.
Mat interpolate(const Mat& x_real, const Mat& x_fake, Rng& rng);
/// Tape version; gradients flow through x_fake.
ad::Var interpolate(ad::Var x_real, ad::Var x_fake, Rng& rng);

/// lambda * E[(||grad_{x_hat} D(x_hat, a)||_2 - 1)^2] as a tape expression;
/// gradients flow to the critic parameters and through x_hat.
ad::Var gradient_penalty(const nn::Mlp& critic, nn::Binder& b, ad::Var x_hat,
                         ad::Var a, double lambda);
ad::Var gradient_penalty(const nn::Mlp& critic, nn::Binder& b, const Mat& x_hat,
                         const Mat& a, double lambda);

/// Plain-value convenience wrapper around the tape expression.
double gradient_penalty_value(const nn::Mlp& critic, const nn::Params& params,
                              const Mat& x_real, const Mat& x_fake,
                              const Mat& a, double lambda, std::uint64_t seed);

/// 0.5 * mean over rows of the squared reconstruction error
/// (unit-variance Gaussian likelihood with constants dropped).
ad::Var gaussian_recon(ad::Var x_hat, ad::Var x);

/// mean over rows of the row-wise L1 error.
ad::Var l1_recon(ad::Var x_hat, ad::Var x);

}  // namespace gasl::prim
