#pragma once

#include <map>
#include <string>

#include "gasl/autodiff.hpp"
#include "gasl/rng.hpp"
#include "gasl/types.hpp"

namespace gasl::nn {

/// Named parameter tensors of one model. Weights are stored (in x out) so a
/// batch forward is X * W + b.
class Params {
 public:
  Mat& gaussian(const std::string& name, long rows, long cols, Rng& rng,
                double scale);
  Mat& zeros(const std::string& name, long rows, long cols);
  Mat& at(const std::string& name);
  const Mat& at(const std::string& name) const;
  bool has(const std::string& name) const { return values_.count(name) > 0; }
  std::map<std::string, Mat>& values() { return values_; }
  const std::map<std::string, Mat>& values() const { return values_; }
  void check_finite() const;

 private:
  std::map<std::string, Mat> values_;
};

/// Pushes parameters onto a tape on first use and remembers the vars so the
/// same leaf backs every reference within one loss evaluation.
class Binder {
 public:
  Binder(ad::Tape& tape, const Params& params)
      : tape_(tape), params_(params) {}
  ad::Var operator()(const std::string& name);
  ad::Tape& tape() { return tape_; }
  /// Gradients of all parameters touched since construction.
  std::map<std::string, Mat> grads();

 private:
  ad::Tape& tape_;
  const Params& params_;
  std::map<std::string, ad::Var> bound_;
};

/// Two-layer perceptron with a leaky-rectifier hidden layer.
struct Mlp {
  std::string prefix;
  int in = 0, hidden = 0, out = 0;
  double slope = 0.2;
  bool tanh_out = false;  // squash output (used by some encoders)

  void init(Params& p, Rng& rng) const;
  /// Zero-initializes the output layer (identity-at-init behaviour).
  void init_zero_out(Params& p, Rng& rng) const;
  /// *hidden, when given, receives the post-nonlinearity hidden activations.
  ad::Var forward(Binder& b, ad::Var x, ad::Var* hidden = nullptr) const;
  Mat forward_plain(const Params& p, const Mat& x, Mat* hidden = nullptr) const;
  /// Scalar-output forward that also emits d(output)/d(input) rows as a tape
  /// expression (first-order; the rectifier mask is treated as constant).
  ad::Var forward_with_input_grad(Binder& b, ad::Var x, ad::Var* input_grad) const;
};

class Adam {
 public:
  explicit Adam(double lr) : lr_(lr) {}
  void step(Params& params, const std::map<std::string, Mat>& grads);

 private:
  double lr_;
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  long t_ = 0;
  std::map<std::string, std::pair<Mat, Mat>> state_;
};

class Sgd {
 public:
  Sgd(double lr, double momentum) : lr_(lr), momentum_(momentum) {}
  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }
  void step(Params& params, const std::map<std::string, Mat>& grads);

 private:
  double lr_, momentum_;
  std::map<std::string, Mat> velocity_;
};

/// Seeded standard-normal matrix.
Mat randn(long rows, long cols, Rng& rng, double scale = 1.0);

}  // namespace gasl::nn
