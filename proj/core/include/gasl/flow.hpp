#pragma once

#include <vector>

#include "gasl/autodiff.hpp"
#include "gasl/nn.hpp"
#include "gasl/types.hpp"

namespace gasl::flow {

/// Invertible map built from affine coupling blocks, conditioned on a side
/// input. Blocks alternate which half of the vector passes through untouched;
/// the other half is scaled/shifted by a conditioner network, so the Jacobian
/// is triangular and its log-determinant is the sum of the log-scales.
struct Flow {
  std::string prefix;
  int dim = 0, cond_dim = 0, hidden = 16, blocks = 4;
  std::vector<nn::Mlp> nets;  // one conditioner per block

  static Flow make(std::string prefix, int dim, int cond_dim, int hidden,
                   int blocks);

  /// Conditioner outputs start at zero, so the freshly initialized flow is
  /// the identity with zero log-determinant.
  void init(nn::Params& p, Rng& rng) const;

  /// x -> z; per-row log|det(dz/dx)| appended to *logdet when given.
  Mat forward_plain(const nn::Params& p, const Mat& x, const Mat& cond,
                    Vec* logdet = nullptr) const;
  Mat inverse_plain(const nn::Params& p, const Mat& z, const Mat& cond) const;

  /// Tape version; *logdet receives an n x 1 expression.
  ad::Var forward(nn::Binder& b, ad::Var x, ad::Var cond,
                  ad::Var* logdet = nullptr) const;

 private:
  // Passive half is [0, m) on even blocks and [m, dim) on odd ones.
  int split() const { return dim / 2; }
  void check_scale(const Mat& scale) const;
};

}  // namespace gasl::flow
