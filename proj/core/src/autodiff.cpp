#include "gasl/autodiff.hpp"

#include <cmath>

namespace gasl::ad {

Var Tape::leaf(Mat value) {
  nodes_.push_back({std::move(value), Mat(), {}, nullptr});
  return {this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::make(Mat value, std::vector<int> parents, BackFn back) {
  nodes_.push_back({std::move(value), Mat(), std::move(parents), std::move(back)});
  return {this, static_cast<int>(nodes_.size() - 1)};
}

void Tape::backward(Var out) {
  if (val(out).rows() != 1 || val(out).cols() != 1)
    throw ShapeError("backward: output must be 1x1");
  for (Node& n : nodes_) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
  nodes_[out.idx].grad(0, 0) = 1.0;
  for (int i = out.idx; i >= 0; --i)
    if (nodes_[i].back) nodes_[i].back(*this, i);
}

namespace {

Tape& tape_of(Var a, Var b) {
  if (a.tape != b.tape) throw ShapeError("operands on different tapes");
  return *a.tape;
}

void same_shape(const Mat& a, const Mat& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError(std::string(op) + ": shape mismatch");
}

}  // namespace

Var add(Var a, Var b) {
  Tape& t = tape_of(a, b);
  same_shape(t.val(a), t.val(b), "add");
  return t.make(t.val(a) + t.val(b), {a.idx, b.idx}, [](Tape& t, int s) {
    auto& n = t.node(s);
    t.node(n.parents[0]).grad += n.grad;
    t.node(n.parents[1]).grad += n.grad;
  });
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a, b);
  same_shape(t.val(a), t.val(b), "sub");
  return t.make(t.val(a) - t.val(b), {a.idx, b.idx}, [](Tape& t, int s) {
    auto& n = t.node(s);
    t.node(n.parents[0]).grad += n.grad;
    t.node(n.parents[1]).grad -= n.grad;
  });
}

Var neg(Var a) {
  Tape& t = *a.tape;
  return t.make(-t.val(a), {a.idx}, [](Tape& t, int s) {
    auto& n = t.node(s);
    t.node(n.parents[0]).grad -= n.grad;
  });
}

Var cmul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  same_shape(t.val(a), t.val(b), "cmul");
  return t.make(t.val(a).cwiseProduct(t.val(b)), {a.idx, b.idx},
                [](Tape& t, int s) {
                  auto& n = t.node(s);
                  const Mat& av = t.node(n.parents[0]).value;
                  const Mat& bv = t.node(n.parents[1]).value;
                  t.node(n.parents[0]).grad += n.grad.cwiseProduct(bv);
                  t.node(n.parents[1]).grad += n.grad.cwiseProduct(av);
                });
}

Var cdiv(Var a, Var b) {
  Tape& t = tape_of(a, b);
  same_shape(t.val(a), t.val(b), "cdiv");
  return t.make(t.val(a).cwiseQuotient(t.val(b)), {a.idx, b.idx},
                [](Tape& t, int s) {
                  auto& n = t.node(s);
                  const Mat& av = t.node(n.parents[0]).value;
                  const Mat& bv = t.node(n.parents[1]).value;
                  t.node(n.parents[0]).grad += n.grad.cwiseQuotient(bv);
                  t.node(n.parents[1]).grad -=
                      n.grad.cwiseProduct(av).cwiseQuotient(bv.cwiseProduct(bv));
                });
}

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  if (t.val(a).cols() != t.val(b).rows())
    throw ShapeError("matmul: inner dimensions differ");
  return t.make(t.val(a) * t.val(b), {a.idx, b.idx}, [](Tape& t, int s) {
    auto& n = t.node(s);
    const Mat& av = t.node(n.parents[0]).value;
    const Mat& bv = t.node(n.parents[1]).value;
    t.node(n.parents[0]).grad += n.grad * bv.transpose();
    t.node(n.parents[1]).grad += av.transpose() * n.grad;
  });
}

Var transpose(Var a) {
  Tape& t = *a.tape;
  return t.make(t.val(a).transpose(), {a.idx}, [](Tape& t, int s) {
    auto& n = t.node(s);
    t.node(n.parents[0]).grad += n.grad.transpose();
  });
}

Var scale(Var a, double s) {
  Tape& t = *a.tape;
  return t.make(t.val(a) * s, {a.idx}, [s](Tape& t, int self) {
    auto& n = t.node(self);
    t.node(n.parents[0]).grad += n.grad * s;
  });
}

Var add_const(Var a, double c) {
  Tape& t = *a.tape;
  return t.make(t.val(a).array() + c, {a.idx}, [](Tape& t, int s) {
    auto& n = t.node(s);
    t.node(n.parents[0]).grad += n.grad;
  });
}

Var add_rowvec(Var a, Var row) {
  Tape& t = tape_of(a, row);
  const Mat& av = t.val(a);
  const Mat& rv = t.val(row);
  if (rv.rows() != 1 || rv.cols() != av.cols())
    throw ShapeError("add_rowvec: row must be 1 x cols(a)");
  Mat out = av;
  out.rowwise() += rv.row(0);
  return t.make(std::move(out), {a.idx, row.idx}, [](Tape& t, int s) {
    auto& n = t.node(s);
    t.node(n.parents[0]).grad += n.grad;
    t.node(n.parents[1]).grad += n.grad.colwise().sum();
  });
}

Var relu(Var a) { return leaky_relu(a, 0.0); }

Var leaky_relu(Var a, double slope) {
  Tape& t = *a.tape;
  Mat out = t.val(a).unaryExpr(
      [slope](double x) { return x > 0 ? x : slope * x; });
  return t.make(std::move(out), {a.idx}, [slope](Tape& t, int s) {
    auto& n = t.node(s);
    const Mat& av = t.node(n.parents[0]).value;
    t.node(n.parents[0]).grad += n.grad.cwiseProduct(av.unaryExpr(
        [slope](double x) { return x > 0 ? 1.0 : slope; }));
  });
}

Var leaky_relu_deriv(Var a, double slope) {
  Tape& t = *a.tape;
  Mat out = t.val(a).unaryExpr(
      [slope](double x) { return x > 0 ? 1.0 : slope; });
  // Piecewise constant: second derivative vanishes almost everywhere.
  return t.make(std::move(out), {a.idx}, [](Tape&, int) {});
}

Var sigmoid(Var a) {
  Tape& t = *a.tape;
  Mat out = t.val(a).unaryExpr(
      [](double x) { return 1.0 / (1.0 + std::exp(-x)); });
  return t.make(out, {a.idx}, [out](Tape& t, int s) {
    auto& n = t.node(s);
    t.node(n.parents[0]).grad += n.grad.cwiseProduct(
        out.cwiseProduct(Mat(Mat::Ones(out.rows(), out.cols()) - out)));
  });
}

Var tanh_(Var a) {
  Tape& t = *a.tape;
  Mat out = t.val(a).array().tanh();
  return t.make(out, {a.idx}, [out](Tape& t, int s) {
    auto& n = t.node(s);
    Mat d = Mat::Ones(out.rows(), out.cols()) - out.cwiseProduct(out);
    t.node(n.parents[0]).grad += n.grad.cwiseProduct(d);
  });
}

Var exp_(Var a) {
  Tape& t = *a.tape;
  Mat out = t.val(a).array().exp();
  return t.make(out, {a.idx}, [out](Tape& t, int s) {
    auto& n = t.node(s);
    t.node(n.parents[0]).grad += n.grad.cwiseProduct(out);
  });
}

Var log_(Var a) {
  Tape& t = *a.tape;
  if ((t.val(a).array() <= 0.0).any())
    throw NumericalError("log of non-positive value");
  return t.make(t.val(a).array().log(), {a.idx}, [](Tape& t, int s) {
    auto& n = t.node(s);
    const Mat& av = t.node(n.parents[0]).value;
    t.node(n.parents[0]).grad += n.grad.cwiseQuotient(av);
  });
}

Var sqrt_(Var a) {
  Tape& t = *a.tape;
  if ((t.val(a).array() < 0.0).any())
    throw DomainError("sqrt of negative value");
  Mat out = t.val(a).array().sqrt();
  return t.make(out, {a.idx}, [out](Tape& t, int s) {
    auto& n = t.node(s);
    t.node(n.parents[0]).grad +=
        n.grad.cwiseQuotient(Mat(2.0 * out.array() + 1e-300));
  });
}

Var square(Var a) {
  Tape& t = *a.tape;
  return t.make(t.val(a).cwiseProduct(t.val(a)), {a.idx}, [](Tape& t, int s) {
    auto& n = t.node(s);
    const Mat& av = t.node(n.parents[0]).value;
    t.node(n.parents[0]).grad += 2.0 * n.grad.cwiseProduct(av);
  });
}

Var abs_(Var a) {
  Tape& t = *a.tape;
  return t.make(t.val(a).cwiseAbs(), {a.idx}, [](Tape& t, int s) {
    auto& n = t.node(s);
    const Mat& av = t.node(n.parents[0]).value;
    t.node(n.parents[0]).grad += n.grad.cwiseProduct(av.unaryExpr(
        [](double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); }));
  });
}

Var sum(Var a) {
  Tape& t = *a.tape;
  return t.make(Mat::Constant(1, 1, t.val(a).sum()), {a.idx},
                [](Tape& t, int s) {
                  auto& n = t.node(s);
                  auto& p = t.node(n.parents[0]);
                  p.grad.array() += n.grad(0, 0);
                });
}

Var mean(Var a) {
  Tape& t = *a.tape;
  const double inv = 1.0 / static_cast<double>(t.val(a).size());
  return t.make(Mat::Constant(1, 1, t.val(a).mean()), {a.idx},
                [inv](Tape& t, int s) {
                  auto& n = t.node(s);
                  auto& p = t.node(n.parents[0]);
                  p.grad.array() += n.grad(0, 0) * inv;
                });
}

Var rowwise_sum(Var a) {
  Tape& t = *a.tape;
  Mat out = t.val(a).rowwise().sum();
  return t.make(std::move(out), {a.idx}, [](Tape& t, int s) {
    auto& n = t.node(s);
    auto& p = t.node(n.parents[0]);
    p.grad += n.grad.replicate(1, p.value.cols());
  });
}

Var colwise_sum(Var a) {
  Tape& t = *a.tape;
  Mat out = t.val(a).colwise().sum();
  return t.make(std::move(out), {a.idx}, [](Tape& t, int s) {
    auto& n = t.node(s);
    auto& p = t.node(n.parents[0]);
    p.grad += n.grad.replicate(p.value.rows(), 1);
  });
}

Var colwise_mean(Var a) {
  Tape& t = *a.tape;
  const double inv = 1.0 / static_cast<double>(t.val(a).rows());
  Mat out = t.val(a).colwise().mean();
  return t.make(std::move(out), {a.idx}, [inv](Tape& t, int s) {
    auto& n = t.node(s);
    auto& p = t.node(n.parents[0]);
    p.grad += inv * n.grad.replicate(p.value.rows(), 1);
  });
}

Var concat_cols(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Mat& av = t.val(a);
  const Mat& bv = t.val(b);
  if (av.rows() != bv.rows()) throw ShapeError("concat_cols: row mismatch");
  Mat out(av.rows(), av.cols() + bv.cols());
  out << av, bv;
  const int ac = static_cast<int>(av.cols());
  return t.make(std::move(out), {a.idx, b.idx}, [ac](Tape& t, int s) {
    auto& n = t.node(s);
    auto& pa = t.node(n.parents[0]);
    auto& pb = t.node(n.parents[1]);
    pa.grad += n.grad.leftCols(ac);
    pb.grad += n.grad.rightCols(n.grad.cols() - ac);
  });
}

Var slice_cols(Var a, int first, int count) {
  Tape& t = *a.tape;
  if (first < 0 || first + count > t.val(a).cols())
    throw ShapeError("slice_cols: out of range");
  Mat out = t.val(a).middleCols(first, count);
  return t.make(std::move(out), {a.idx}, [first, count](Tape& t, int s) {
    auto& n = t.node(s);
    t.node(n.parents[0]).grad.middleCols(first, count) += n.grad;
  });
}

Var gather_rows(Var a, const std::vector<long>& rows) {
  Tape& t = *a.tape;
  const Mat& av = t.val(a);
  Mat out(static_cast<long>(rows.size()), av.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= av.rows())
      throw ShapeError("gather_rows: index out of range");
    out.row(i) = av.row(rows[i]);
  }
  return t.make(std::move(out), {a.idx}, [rows](Tape& t, int s) {
    auto& n = t.node(s);
    auto& p = t.node(n.parents[0]);
    for (std::size_t i = 0; i < rows.size(); ++i)
      p.grad.row(rows[i]) += n.grad.row(i);
  });
}

Var softmax_xent(Var logits, const std::vector<int>& targets) {
  Tape& t = *logits.tape;
  const Mat& z = t.val(logits);
  if (z.rows() != static_cast<long>(targets.size()))
    throw ShapeError("softmax_xent: batch size mismatch");
  Mat probs(z.rows(), z.cols());
  double loss = 0.0;
  for (long i = 0; i < z.rows(); ++i) {
    const double m = z.row(i).maxCoeff();
    Eigen::RowVectorXd e = (z.row(i).array() - m).exp();
    const double denom = e.sum();
    probs.row(i) = e / denom;
    const int y = targets[i];
    if (y < 0 || y >= z.cols())
      throw ShapeError("softmax_xent: target out of range");
    loss -= std::log(std::max(probs(i, y), 1e-300));
  }
  loss /= static_cast<double>(z.rows());
  return t.make(Mat::Constant(1, 1, loss), {logits.idx},
                [probs, targets](Tape& t, int s) {
                  auto& n = t.node(s);
                  auto& p = t.node(n.parents[0]);
                  Mat g = probs;
                  for (long i = 0; i < g.rows(); ++i) g(i, targets[i]) -= 1.0;
                  p.grad += (n.grad(0, 0) / g.rows()) * g;
                });
}

Var rowwise_cosine(Var a, Var b) {
  Tape& t = tape_of(a, b);
  if ((t.val(a).rowwise().norm().array() == 0.0).any() ||
      (t.val(b).rowwise().norm().array() == 0.0).any())
    throw DegenerateInput("cosine of zero-norm vector");
  Var dots = rowwise_sum(cmul(a, b));
  Var na = sqrt_(rowwise_sum(square(a)));
  Var nb = sqrt_(rowwise_sum(square(b)));
  return cdiv(dots, cmul(na, nb));
}

}  // namespace gasl::ad
