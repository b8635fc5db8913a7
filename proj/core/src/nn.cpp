#include "gasl/nn.hpp"

#include <cmath>

namespace gasl::nn {

using ad::Var;

Mat randn(long rows, long cols, Rng& rng, double scale) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Mat m(rows, cols);
  for (long i = 0; i < rows; ++i)
    for (long j = 0; j < cols; ++j) m(i, j) = dist(rng) * scale;
  return m;
}

Mat& Params::gaussian(const std::string& name, long rows, long cols, Rng& rng,
                      double scale) {
  return values_[name] = randn(rows, cols, rng, scale);
}

Mat& Params::zeros(const std::string& name, long rows, long cols) {
  return values_[name] = Mat::Zero(rows, cols);
}

Mat& Params::at(const std::string& name) {
  auto it = values_.find(name);
  if (it == values_.end()) throw ConfigError("unknown parameter: " + name);
  return it->second;
}

const Mat& Params::at(const std::string& name) const {
  auto it = values_.find(name);
  if (it == values_.end()) throw ConfigError("unknown parameter: " + name);
  return it->second;
}

void Params::check_finite() const {
  for (const auto& [name, m] : values_)
    if (!m.allFinite())
      throw NumericalError("non-finite parameter tensor: " + name);
}

Var Binder::operator()(const std::string& name) {
  auto it = bound_.find(name);
  if (it != bound_.end()) return it->second;
  Var v = tape_.leaf(params_.at(name));
  bound_[name] = v;
  return v;
}

std::map<std::string, Mat> Binder::grads() {
  std::map<std::string, Mat> out;
  for (const auto& [name, var] : bound_) out[name] = tape_.grad(var);
  return out;
}

void Mlp::init(Params& p, Rng& rng) const {
  p.gaussian(prefix + ".W1", in, hidden, rng, 1.0 / std::sqrt(double(in)));
  p.zeros(prefix + ".b1", 1, hidden);
  p.gaussian(prefix + ".W2", hidden, out, rng, 1.0 / std::sqrt(double(hidden)));
  p.zeros(prefix + ".b2", 1, out);
}

void Mlp::init_zero_out(Params& p, Rng& rng) const {
  init(p, rng);
  p.zeros(prefix + ".W2", hidden, out);
  p.zeros(prefix + ".b2", 1, out);
}

Var Mlp::forward(Binder& b, Var x, Var* hidden) const {
  Var pre = add_rowvec(matmul(x, b(prefix + ".W1")), b(prefix + ".b1"));
  Var h = leaky_relu(pre, slope);
  if (hidden) *hidden = h;
  Var o = add_rowvec(matmul(h, b(prefix + ".W2")), b(prefix + ".b2"));
  if (tanh_out) o = tanh_(o);
  return o;
}

Mat Mlp::forward_plain(const Params& p, const Mat& x, Mat* hidden) const {
  Mat pre = x * p.at(prefix + ".W1");
  pre.rowwise() += p.at(prefix + ".b1").row(0);
  Mat h = pre.unaryExpr([this](double v) { return v > 0 ? v : slope * v; });
  if (hidden) *hidden = h;
  Mat o = h * p.at(prefix + ".W2");
  o.rowwise() += p.at(prefix + ".b2").row(0);
  if (tanh_out) o = o.array().tanh();
  return o;
}

Var Mlp::forward_with_input_grad(Binder& b, Var x, Var* input_grad) const {
  if (out != 1) throw ShapeError("input gradient requires a scalar output");
  if (tanh_out) throw ShapeError("input gradient requires a linear output");
  ad::Tape& t = b.tape();
  Var w1 = b(prefix + ".W1");
  Var pre = add_rowvec(matmul(x, w1), b(prefix + ".b1"));
  Var h = leaky_relu(pre, slope);
  Var o = add_rowvec(matmul(h, b(prefix + ".W2")), b(prefix + ".b2"));
  if (input_grad) {
    // d o_i / d x_i = (sigma'(pre_i) .* w2^T) W1^T
    Var ones = t.leaf(Mat::Ones(t.val(x).rows(), 1));
    Var w2row = transpose(b(prefix + ".W2"));  // 1 x hidden
    Var mask = cmul(leaky_relu_deriv(pre, slope), matmul(ones, w2row));
    *input_grad = matmul(mask, transpose(w1));
  }
  return o;
}

void Adam::step(Params& params, const std::map<std::string, Mat>& grads) {
  ++t_;
  for (const auto& [name, g] : grads) {
    Mat& w = params.at(name);
    auto& [m, v] = state_[name];
    if (m.size() == 0) {
      m = Mat::Zero(w.rows(), w.cols());
      v = Mat::Zero(w.rows(), w.cols());
    }
    m = beta1_ * m + (1.0 - beta1_) * g;
    v = beta2_ * v + (1.0 - beta2_) * Mat(g.cwiseProduct(g));
    const double c1 = 1.0 - std::pow(beta1_, t_);
    const double c2 = 1.0 - std::pow(beta2_, t_);
    Mat mh = m / c1;
    Mat vh = v / c2;
    w -= lr_ * Mat(mh.cwiseQuotient(Mat(vh.cwiseSqrt().array() + eps_)));
  }
}

void Sgd::step(Params& params, const std::map<std::string, Mat>& grads) {
  for (const auto& [name, g] : grads) {
    Mat& w = params.at(name);
    Mat& vel = velocity_[name];
    if (vel.size() == 0) vel = Mat::Zero(w.rows(), w.cols());
    vel = momentum_ * vel + g;
    w -= lr_ * vel;
  }
}

}  // namespace gasl::nn
