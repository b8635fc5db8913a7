#include "gasl/flow.hpp"

#include <cmath>

namespace gasl::flow {

using ad::Var;

Flow Flow::make(std::string prefix, int dim, int cond_dim, int hidden,
                int blocks) {
  if (dim < 2) throw ShapeError("flow: dim must be >= 2");
  if (blocks < 1) throw ShapeError("flow: need at least one block");
  Flow f;
  f.prefix = std::move(prefix);
  f.dim = dim;
  f.cond_dim = cond_dim;
  f.hidden = hidden;
  f.blocks = blocks;
  const int m = f.split();
  for (int k = 0; k < blocks; ++k) {
    const int passive = (k % 2 == 0) ? m : dim - m;
    const int active = dim - passive;
    nn::Mlp net;
    net.prefix = f.prefix + ".block" + std::to_string(k);
    net.in = passive + cond_dim;
    net.hidden = hidden;
    net.out = 2 * active;  // log-scales then shifts
    f.nets.push_back(net);
  }
  return f;
}

void Flow::init(nn::Params& p, Rng& rng) const {
  for (const auto& net : nets) net.init_zero_out(p, rng);
}

void Flow::check_scale(const Mat& scale) const {
  if (!scale.allFinite() || (scale.array() == 0.0).any())
    throw NumericalError("flow: non-invertible coupling block (zero scale)");
}

namespace {

Mat with_cond(const Mat& passive, const Mat& cond) {
  Mat in(passive.rows(), passive.cols() + cond.cols());
  in << passive, cond;
  return in;
}

}  // namespace

Mat Flow::forward_plain(const nn::Params& p, const Mat& x, const Mat& cond,
                        Vec* logdet) const {
  if (x.cols() != dim || cond.cols() != cond_dim || cond.rows() != x.rows())
    throw ShapeError("flow: bad input shapes");
  Mat z = x;
  Vec ld = Vec::Zero(x.rows());
  const int m = split();
  for (int k = 0; k < blocks; ++k) {
    const int passive = (k % 2 == 0) ? m : dim - m;
    const int active = dim - passive;
    const int p0 = (k % 2 == 0) ? 0 : dim - passive;
    const int a0 = (k % 2 == 0) ? passive : 0;
    Mat st = nets[k].forward_plain(p, with_cond(z.middleCols(p0, passive), cond));
    Mat s = st.leftCols(active);
    Mat t = st.rightCols(active);
    Mat scale = s.array().exp();
    check_scale(scale);
    z.middleCols(a0, active) =
        z.middleCols(a0, active).cwiseProduct(scale) + t;
    ld += s.rowwise().sum();
  }
  if (logdet) *logdet = ld;
  return z;
}

Mat Flow::inverse_plain(const nn::Params& p, const Mat& z,
                        const Mat& cond) const {
  if (z.cols() != dim || cond.cols() != cond_dim || cond.rows() != z.rows())
    throw ShapeError("flow: bad input shapes");
  Mat x = z;
  const int m = split();
  for (int k = blocks - 1; k >= 0; --k) {
    const int passive = (k % 2 == 0) ? m : dim - m;
    const int active = dim - passive;
    const int p0 = (k % 2 == 0) ? 0 : dim - passive;
    const int a0 = (k % 2 == 0) ? passive : 0;
    Mat st = nets[k].forward_plain(p, with_cond(x.middleCols(p0, passive), cond));
    Mat s = st.leftCols(active);
    Mat t = st.rightCols(active);
    Mat scale = s.array().exp();
    check_scale(scale);
    x.middleCols(a0, active) =
        (x.middleCols(a0, active) - t).cwiseQuotient(scale);
  }
  return x;
}

Var Flow::forward(nn::Binder& b, Var x, Var cond_v, Var* logdet) const {
  ad::Tape& t = b.tape();
  if (t.val(x).cols() != dim || t.val(cond_v).cols() != cond_dim ||
      t.val(cond_v).rows() != t.val(x).rows())
    throw ShapeError("flow: bad input shapes");
  Var z = x;
  Var ld = t.leaf(Mat::Zero(t.val(x).rows(), 1));
  const int m = split();
  for (int k = 0; k < blocks; ++k) {
    const int passive = (k % 2 == 0) ? m : dim - m;
    const int active = dim - passive;
    const int p0 = (k % 2 == 0) ? 0 : dim - passive;
    const int a0 = (k % 2 == 0) ? passive : 0;
    Var pass = slice_cols(z, p0, passive);
    Var st = nets[k].forward(b, concat_cols(pass, cond_v));
    Var s = slice_cols(st, 0, active);
    Var shift = slice_cols(st, active, active);
    Var scale_v = exp_(s);
    check_scale(t.val(scale_v));
    Var act = cmul(slice_cols(z, a0, active), scale_v) + shift;
    z = (k % 2 == 0) ? concat_cols(pass, act) : concat_cols(act, pass);
    ld = ld + rowwise_sum(s);
  }
  if (logdet) *logdet = ld;
  return z;
}

}  // namespace gasl::flow
