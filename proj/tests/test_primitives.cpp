#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gasl/primitives.hpp"
#include "gradcheck.hpp"

using namespace gasl;
using ad::Var;

TEST_CASE("diagonal gaussian kl closed forms") {
  Vec z = Vec::Zero(3);
  CHECK(prim::kl_diag_gaussian(z, z) == doctest::Approx(0.0));
  Vec mu1 = Vec::Constant(1, 1.0);
  CHECK(prim::kl_diag_gaussian(mu1, Vec::Zero(1)) == doctest::Approx(0.5));
  Vec lv1 = Vec::Constant(1, 1.0);
  CHECK(prim::kl_diag_gaussian(Vec::Zero(1), lv1) ==
        doctest::Approx(0.5 * (std::exp(1.0) - 2.0)));
  // Non-negativity on random draws.
  Rng rng(3);
  for (int k = 0; k < 20; ++k) {
    Vec mu = nn::randn(4, 1, rng).col(0);
    Vec lv = nn::randn(4, 1, rng).col(0);
    CHECK(prim::kl_diag_gaussian(mu, lv) >= 0.0);
  }
}

TEST_CASE("wasserstein2 metric properties") {
  Vec mu = Vec::Constant(3, 0.7), var = Vec::Constant(3, 2.0);
  CHECK(prim::wasserstein2_diag(mu, var, mu, var) == doctest::Approx(0.0));
  Vec mu2 = mu;
  mu2(0) += 3.0;
  CHECK(prim::wasserstein2_diag(mu, var, mu2, var) == doctest::Approx(3.0));
  CHECK(prim::wasserstein2_diag(mu2, var, mu, var) ==
        doctest::Approx(prim::wasserstein2_diag(mu, var, mu2, var)));
  CHECK_THROWS_AS(
      prim::wasserstein2_diag(mu, Vec::Constant(3, -1.0), mu, var),
      DomainError);
  Rng rng(11);
  for (int k = 0; k < 20; ++k) {
    Vec a = nn::randn(3, 1, rng).col(0), b = nn::randn(3, 1, rng).col(0),
        c = nn::randn(3, 1, rng).col(0);
    Vec va = nn::randn(3, 1, rng).col(0).cwiseAbs(),
        vb = nn::randn(3, 1, rng).col(0).cwiseAbs(),
        vc = nn::randn(3, 1, rng).col(0).cwiseAbs();
    double ab = prim::wasserstein2_diag(a, va, b, vb);
    double bc = prim::wasserstein2_diag(b, vb, c, vc);
    double ac = prim::wasserstein2_diag(a, va, c, vc);
    CHECK(ac <= ab + bc + 1e-12);
  }
}

TEST_CASE("cosine similarity") {
  Vec u(2), v(2);
  u << 1, 2;
  CHECK(prim::cosine_similarity(u, u) == doctest::Approx(1.0));
  v << -2, 1;
  CHECK(prim::cosine_similarity(u, v) == doctest::Approx(0.0));
  CHECK(prim::cosine_similarity(u, Vec(-u)) == doctest::Approx(-1.0));
  CHECK_THROWS_AS(prim::cosine_similarity(u, Vec::Zero(2)), DegenerateInput);
}

namespace {

// Critic that is exactly linear on the probed region: identity first layer
// with a large positive bias keeps every pre-activation in the linear part of
// the rectifier, so grad_x D is the visual block of W2.
nn::Params linear_critic(const nn::Mlp& net, const Vec& w2) {
  nn::Params p;
  p.values()["D.W1"] = Mat::Identity(net.in, net.hidden);
  p.values()["D.b1"] = Mat::Constant(1, net.hidden, 50.0);
  p.values()["D.W2"] = w2;
  p.values()["D.b2"] = Mat::Zero(1, 1);
  return p;
}

}  // namespace

TEST_CASE("gradient penalty on analytically known critics") {
  const int d_x = 3, d_a = 2;
  nn::Mlp critic{"D", d_x + d_a, d_x + d_a, 1};
  Rng rng(7);
  Mat x_real = nn::randn(6, d_x, rng), x_fake = nn::randn(6, d_x, rng);
  Mat a = nn::randn(6, d_a, rng);

  Vec unit = Vec::Zero(d_x + d_a);
  unit(0) = 1.0;  // D = x1, unit gradient
  CHECK(prim::gradient_penalty_value(critic, linear_critic(critic, unit),
                                     x_real, x_fake, a, 10.0, 1) ==
        doctest::Approx(0.0).epsilon(1e-9));

  Vec twice = Vec::Zero(d_x + d_a);
  twice(0) = 2.0;  // D = 2 x1, gradient norm 2
  CHECK(prim::gradient_penalty_value(critic, linear_critic(critic, twice),
                                     x_real, x_fake, a, 10.0, 1) ==
        doctest::Approx(10.0));

  Vec zero = Vec::Zero(d_x + d_a);  // constant D
  CHECK(prim::gradient_penalty_value(critic, linear_critic(critic, zero),
                                     x_real, x_fake, a, 7.5, 1) ==
        doctest::Approx(7.5));

  // A semantic-only critic has zero visual gradient: penalty = lambda.
  Vec sem_only = Vec::Zero(d_x + d_a);
  sem_only(d_x) = 3.0;
  CHECK(prim::gradient_penalty_value(critic, linear_critic(critic, sem_only),
                                     x_real, x_fake, a, 4.0, 1) ==
        doctest::Approx(4.0));
}

TEST_CASE("interpolation stays on the segment") {
  Rng rng(5);
  Mat a = nn::randn(8, 4, rng), b = nn::randn(8, 4, rng);
  Rng draw(9);
  Mat mid = prim::interpolate(a, b, draw);
  for (long i = 0; i < a.rows(); ++i)
    for (long j = 0; j < a.cols(); ++j) {
      double lo = std::min(a(i, j), b(i, j)), hi = std::max(a(i, j), b(i, j));
      CHECK(mid(i, j) >= lo - 1e-12);
      CHECK(mid(i, j) <= hi + 1e-12);
    }
  Rng draw2(9);
  Mat same = prim::interpolate(a, a, draw2);
  CHECK((same - a).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("reconstruction conventions") {
  Mat x = Mat::Zero(4, 6);
  Mat xhat = Mat::Constant(4, 6, 1.0);  // off by 1 per dim
  ad::Tape t;
  Var rec = prim::gaussian_recon(t.leaf(xhat), t.leaf(x));
  CHECK(t.val(rec)(0, 0) == doctest::Approx(0.5 * 6.0));
  Var l1 = prim::l1_recon(t.leaf(xhat), t.leaf(x));
  CHECK(t.val(l1)(0, 0) == doctest::Approx(6.0));
}

TEST_CASE("tape primitives match plain values and finite differences") {
  nn::Params p;
  Rng rng(13);
  p.gaussian("mu", 5, 3, rng, 1.0);
  p.gaussian("lv", 5, 3, rng, 0.5);
  p.gaussian("mu2", 5, 3, rng, 1.0);
  p.gaussian("lv2", 5, 3, rng, 0.5);

  auto kl_value = [&] {
    ad::Tape t;
    nn::Binder b(t, p);
    return t.val(prim::kl_diag_gaussian_mean(b("mu"), b("lv")))(0, 0);
  };
  double plain = 0.0;
  for (long i = 0; i < 5; ++i)
    plain += prim::kl_diag_gaussian(p.at("mu").row(i).transpose(),
                                    p.at("lv").row(i).transpose());
  CHECK(kl_value() == doctest::Approx(plain / 5.0));
  {
    ad::Tape t;
    nn::Binder b(t, p);
    t.backward(prim::kl_diag_gaussian_mean(b("mu"), b("lv")));
    CHECK(test::fd_worst_rel(p, b.grads(), kl_value) < 1e-4);
  }

  auto w2_value = [&] {
    ad::Tape t;
    nn::Binder b(t, p);
    return t.val(prim::wasserstein2_diag_mean(b("mu"), b("lv"), b("mu2"),
                                              b("lv2")))(0, 0);
  };
  double plain_w2 = 0.0;
  for (long i = 0; i < 5; ++i)
    plain_w2 += prim::wasserstein2_diag(
        p.at("mu").row(i).transpose(),
        p.at("lv").row(i).array().exp().matrix().transpose(),
        p.at("mu2").row(i).transpose(),
        p.at("lv2").row(i).array().exp().matrix().transpose());
  CHECK(w2_value() == doctest::Approx(plain_w2 / 5.0).epsilon(1e-5));
  {
    ad::Tape t;
    nn::Binder b(t, p);
    t.backward(prim::wasserstein2_diag_mean(b("mu"), b("lv"), b("mu2"),
                                            b("lv2")));
    CHECK(test::fd_worst_rel(p, b.grads(), w2_value) < 1e-4);
  }
}
