#include "gasl/classify.hpp"

#include <algorithm>
#include <cmath>

#include "gasl/rng.hpp"

namespace gasl::cls {

std::string to_string(ClassifierKind k) {
  switch (k) {
    case ClassifierKind::softmax_1layer: return "softmax_1layer";
    case ClassifierKind::svm: return "svm";
    case ClassifierKind::cascade: return "cascade";
  }
  throw ConfigError("unknown classifier kind");
}

ClassifierKind classifier_for(ModelKind kind, Task task) {
  if (kind == ModelKind::cvae) return ClassifierKind::svm;
  if (kind == ModelKind::lisgan && task_is_generalized(task))
    return ClassifierKind::cascade;
  return ClassifierKind::softmax_1layer;
}

namespace {

bool needs_transform(ModelKind kind) {
  return kind == ModelKind::cadavae || kind == ModelKind::tfvaegan ||
         kind == ModelKind::gcmcf || kind == ModelKind::free_model;
}

Mat hcat(const Mat& a, const Mat& b) {
  Mat out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

}  // namespace

Mat classifier_features(const gen::ModelState& s, const Mat& X) {
  switch (s.kind) {
    case ModelKind::cadavae:
      return gen::encode_latent(s, X, Mat());
    case ModelKind::tfvaegan:
    case ModelKind::gcmcf:
      return hcat(X, gen::encode_latent(s, X, Mat()));
    case ModelKind::free_model:
      return hcat(hcat(X, gen::encode_latent(s, X, Mat())),
                  gen::decode_semantic(s, X));
    default:
      return X;
  }
}

FeatureSet compose_training_set(ModelKind kind, const gen::ModelState* state,
                                const FeatureSet& real, const FeatureSet* shots,
                                const FeatureSet& synthetic, Task task) {
  if (needs_transform(kind) && state == nullptr)
    throw ConfigError(to_string(kind) +
                      " classifier recipe requires latent features, but no "
                      "model state was supplied");
  const bool generalized = task_is_generalized(task);
  int n_seen = state ? state->n_seen : 0;

  auto in_scope = [&](Label y) {
    if (generalized) return true;
    // Unseen-only scope. Without a state the boundary comes from the
    // synthetic labels, which cover exactly the scope classes.
    if (n_seen > 0) return y > n_seen;
    return std::find(synthetic.y.begin(), synthetic.y.end(), y) !=
           synthetic.y.end();
  };
  auto transform = [&](const Mat& X) {
    return state ? classifier_features(*state, X) : X;
  };

  std::vector<Mat> blocks;
  std::vector<Label> labels;
  auto push = [&](const Mat& X, const std::vector<Label>& y) {
    IndexList keep;
    for (long i = 0; i < X.rows(); ++i)
      if (in_scope(y[i])) keep.push_back(i);
    if (keep.empty()) return;
    Mat sub(static_cast<long>(keep.size()), X.cols());
    for (std::size_t k = 0; k < keep.size(); ++k) {
      sub.row(static_cast<long>(k)) = X.row(keep[k]);
      labels.push_back(y[keep[k]]);
    }
    blocks.push_back(std::move(sub));
  };

  // Real rows are dropped entirely by the synthetic-both-sides recipe.
  if (kind != ModelKind::cvae && real.size() > 0)
    push(transform(real.X), real.y);
  if (shots && shots->size() > 0) push(transform(shots->X), shots->y);
  // Latent-space synthesis is already in classifier space.
  if (synthetic.size() > 0) {
    if (kind == ModelKind::cadavae)
      push(synthetic.X, synthetic.y);
    else
      push(transform(synthetic.X), synthetic.y);
  }

  if (blocks.empty()) throw DegenerateInput("empty classifier training set");
  long n = 0;
  for (const Mat& b : blocks) n += b.rows();
  Mat X(n, blocks.front().cols());
  long at = 0;
  for (const Mat& b : blocks) {
    if (b.cols() != X.cols())
      throw ShapeError("classifier composition: inconsistent feature widths");
    X.middleRows(at, b.rows()) = b;
    at += b.rows();
  }
  return FeatureSet(std::move(X), std::move(labels),
                    VisualProvenance::synthetic, synthetic.dataset_id);
}

namespace {

std::vector<int> scope_targets(const std::vector<Label>& y,
                               const std::vector<Label>& scope) {
  std::vector<int> t(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    auto it = std::lower_bound(scope.begin(), scope.end(), y[i]);
    if (it == scope.end() || *it != y[i])
      throw ProtocolViolation("training label " + std::to_string(y[i]) +
                              " outside classifier scope");
    t[i] = static_cast<int>(it - scope.begin());
  }
  return t;
}

void fit_softmax(nn::Params& p, const std::string& prefix, const Mat& X,
                 const std::vector<int>& targets, int n_out,
                 const ClassifierSchedule& sch, std::uint64_t seed) {
  p.zeros(prefix + "W", X.cols(), n_out);
  p.zeros(prefix + "b", 1, n_out);
  nn::Adam opt(sch.lr);
  const long n = X.rows();
  for (int epoch = 0; epoch < sch.epochs; ++epoch) {
    std::vector<long> order(n);
    for (long i = 0; i < n; ++i) order[i] = i;
    Rng rng(derive_seed(seed, "shuffle:" + std::to_string(epoch)));
    for (long i = n - 1; i > 0; --i)
      std::swap(order[i], order[rng() % (i + 1)]);
    for (long start = 0; start < n; start += sch.batch_size) {
      long len = std::min<long>(sch.batch_size, n - start);
      Mat Xb(len, X.cols());
      std::vector<int> tb(len);
      for (long i = 0; i < len; ++i) {
        Xb.row(i) = X.row(order[start + i]);
        tb[i] = targets[order[start + i]];
      }
      ad::Tape t;
      nn::Binder b(t, p);
      ad::Var logits = add_rowvec(matmul(t.leaf(Xb), b(prefix + "W")),
                                  b(prefix + "b"));
      t.backward(softmax_xent(logits, tb));
      opt.step(p, b.grads());
    }
  }
}

Mat softmax_scores(const nn::Params& p, const std::string& prefix,
                   const Mat& X) {
  return (X * p.at(prefix + "W")).rowwise() +
         p.at(prefix + "b").row(0);
}

// One-vs-rest linear max-margin fit by subgradient descent on
// mean hinge + ||w||^2 / (2 C n).
void fit_svm(nn::Params& p, const Mat& X, const std::vector<int>& targets,
             int n_out, const ClassifierSchedule& sch) {
  const long n = X.rows();
  const double reg = 1.0 / (sch.svm_c * double(n));
  Mat W = Mat::Zero(X.cols(), n_out);
  Mat b = Mat::Zero(1, n_out);
  const int iters = std::max(200, sch.epochs * 8);
  for (int c = 0; c < n_out; ++c) {
    Vec yy(n);
    for (long i = 0; i < n; ++i) yy(i) = targets[i] == c ? 1.0 : -1.0;
    Vec w = Vec::Zero(X.cols());
    double bias = 0.0;
    for (int it = 0; it < iters; ++it) {
      Vec margin = yy.array() * (X * w + Vec::Constant(n, bias)).array();
      Vec gw = reg * w;
      double gb = 0.0;
      for (long i = 0; i < n; ++i) {
        if (margin(i) < 1.0) {
          gw -= yy(i) / double(n) * X.row(i).transpose();
          gb -= yy(i) / double(n);
        }
      }
      double lr = 1.0 / (reg * double(n) * (it + 1) + 10.0);
      w -= lr * gw;
      bias -= lr * gb;
    }
    W.col(c) = w;
    b(0, c) = bias;
  }
  p.values()["W"] = W;
  p.values()["b"] = b;
}

int argmax_row(const Mat& scores, long i) {
  int best = 0;
  for (int c = 1; c < scores.cols(); ++c)
    if (scores(i, c) > scores(i, best)) best = c;
  return best;
}

}  // namespace

ClassifierBundle train_classifier(ClassifierKind kind, const FeatureSet& train,
                                  const std::vector<Label>& scope, int n_seen,
                                  const ClassifierSchedule& schedule) {
  if (train.size() == 0) throw DegenerateInput("empty classifier training set");
  std::vector<Label> sorted_scope = scope;
  std::sort(sorted_scope.begin(), sorted_scope.end());
  ClassifierBundle bundle;
  bundle.kind = kind;
  bundle.scope = sorted_scope;
  bundle.n_seen = n_seen;
  const int C = static_cast<int>(sorted_scope.size());
  std::vector<int> targets = scope_targets(train.y, sorted_scope);

  switch (kind) {
    case ClassifierKind::softmax_1layer:
      fit_softmax(bundle.params, "", train.X, targets, C, schedule,
                  derive_seed(schedule.seed, "softmax"));
      break;
    case ClassifierKind::svm: {
      if (C < 2) throw DegenerateInput("max-margin fit needs >= 2 classes");
      fit_svm(bundle.params, train.X, targets, C, schedule);
      break;
    }
    case ClassifierKind::cascade: {
      // Coarse router: seen vs unseen; fine stage per branch.
      std::vector<int> route(train.size());
      IndexList seen_rows, unseen_rows;
      for (long i = 0; i < train.size(); ++i) {
        bool is_seen = train.y[i] <= n_seen;
        route[i] = is_seen ? 0 : 1;
        (is_seen ? seen_rows : unseen_rows).push_back(i);
      }
      fit_softmax(bundle.params, "router.", train.X, route, 2, schedule,
                  derive_seed(schedule.seed, "router"));
      auto fit_branch = [&](const std::string& prefix, const IndexList& rows) {
        if (rows.empty()) return;
        Mat Xb(static_cast<long>(rows.size()), train.X.cols());
        std::vector<int> tb(rows.size());
        std::vector<Label> branch_scope;
        for (Label y : sorted_scope)
          if ((prefix == "seen.") == (y <= n_seen)) branch_scope.push_back(y);
        for (std::size_t i = 0; i < rows.size(); ++i) {
          Xb.row(static_cast<long>(i)) = train.X.row(rows[i]);
          auto it = std::lower_bound(branch_scope.begin(), branch_scope.end(),
                                     train.y[rows[i]]);
          tb[i] = static_cast<int>(it - branch_scope.begin());
        }
        fit_softmax(bundle.params, prefix, Xb, tb,
                    static_cast<int>(branch_scope.size()), schedule,
                    derive_seed(schedule.seed, prefix));
      };
      fit_branch("seen.", seen_rows);
      fit_branch("unseen.", unseen_rows);
      break;
    }
  }
  return bundle;
}

std::vector<Label> ClassifierBundle::predict(const Mat& X) const {
  const long n = X.rows();
  std::vector<Label> out(n);
  if (kind == ClassifierKind::cascade) {
    std::vector<Label> seen_scope, unseen_scope;
    for (Label y : scope) (y <= n_seen ? seen_scope : unseen_scope).push_back(y);
    Mat router = softmax_scores(params, "router.", X);
    Mat seen_sc, unseen_sc;
    if (params.has("seen.W")) seen_sc = softmax_scores(params, "seen.", X);
    if (params.has("unseen.W"))
      unseen_sc = softmax_scores(params, "unseen.", X);
    for (long i = 0; i < n; ++i) {
      bool to_seen = router(i, 0) >= router(i, 1);
      if (to_seen && seen_scope.empty()) to_seen = false;
      if (!to_seen && unseen_scope.empty()) to_seen = true;
      const auto& branch = to_seen ? seen_scope : unseen_scope;
      const Mat& sc = to_seen ? seen_sc : unseen_sc;
      out[i] = sc.size() == 0 ? branch.front() : branch[argmax_row(sc, i)];
    }
    return out;
  }
  Mat sc = softmax_scores(params, "", X);
  for (long i = 0; i < n; ++i) out[i] = scope[argmax_row(sc, i)];
  return out;
}

double per_class_top1(const std::vector<Label>& preds,
                      const std::vector<Label>& labels,
                      const std::vector<Label>& scope,
                      std::map<Label, double>* per_class) {
  if (preds.size() != labels.size())
    throw ShapeError("prediction/label length mismatch");
  std::map<Label, std::pair<long, long>> counts;  // class -> (correct, total)
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto& [correct, total] = counts[labels[i]];
    ++total;
    if (preds[i] == labels[i]) ++correct;
  }
  double acc = 0.0;
  for (Label c : scope) {
    auto it = counts.find(c);
    if (it == counts.end() || it->second.second == 0)
      throw EvalError("class " + std::to_string(c) +
                      " absent from the evaluation labels");
    double ratio = double(it->second.first) / double(it->second.second);
    if (per_class) (*per_class)[c] = ratio;
    acc += ratio;
  }
  return 100.0 * acc / double(scope.size());
}

double harmonic_mean(double U, double S) {
  if (U + S == 0.0) return 0.0;
  return 2.0 * S * U / (S + U);
}

}  // namespace gasl::cls
