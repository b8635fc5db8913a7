#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "gasl/errors.hpp"
#include "gasl/types.hpp"

namespace gasl::ad {

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid until the tape is cleared.
struct Var {
  Tape* tape = nullptr;
  int idx = -1;
};

/// Reverse-mode tape over dense matrices. One tape per loss evaluation;
/// build the expression, call backward() on the scalar output, read grads.
class Tape {
 public:
  Var leaf(Mat value);
  Var scalar(double v) { return leaf(Mat::Constant(1, 1, v)); }

  const Mat& val(Var v) const { return nodes_[v.idx].value; }
  Mat& grad(Var v) { return nodes_[v.idx].grad; }

  /// Backpropagates from a 1x1 output.
  void backward(Var out);

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  using BackFn = std::function<void(Tape&, int self)>;
  Var make(Mat value, std::vector<int> parents, BackFn back);

  struct Node {
    Mat value;
    Mat grad;
    std::vector<int> parents;
    BackFn back;
  };
  Node& node(int i) { return nodes_[i]; }

 private:
  std::vector<Node> nodes_;
};

// Elementwise / structural ops. All return new nodes on the operands' tape.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var neg(Var a);
Var cmul(Var a, Var b);
Var cdiv(Var a, Var b);
Var matmul(Var a, Var b);
Var transpose(Var a);
Var scale(Var a, double s);
Var add_const(Var a, double c);
Var add_rowvec(Var a, Var row);      // a: n x d, row: 1 x d
Var relu(Var a);
Var leaky_relu(Var a, double slope = 0.2);
/// d/dx leaky_relu as a tape value; its own backward is zero (a.e. exact).
Var leaky_relu_deriv(Var a, double slope = 0.2);
Var sigmoid(Var a);
Var tanh_(Var a);
Var exp_(Var a);
Var log_(Var a);
Var sqrt_(Var a);
Var square(Var a);
Var abs_(Var a);
Var sum(Var a);            // 1 x 1
Var mean(Var a);           // 1 x 1
Var rowwise_sum(Var a);    // n x 1
Var colwise_sum(Var a);    // 1 x d
Var colwise_mean(Var a);   // 1 x d
Var concat_cols(Var a, Var b);
Var slice_cols(Var a, int first, int count);
Var gather_rows(Var a, const std::vector<long>& rows);
/// Mean cross-entropy of row-wise softmax against integer targets (0-based).
Var softmax_xent(Var logits, const std::vector<int>& targets);
/// Row-wise cosine similarity of paired rows: (n x d, n x d) -> n x 1.
Var rowwise_cosine(Var a, Var b);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator-(Var a) { return neg(a); }
inline Var operator*(double s, Var a) { return scale(a, s); }

}  // namespace gasl::ad
