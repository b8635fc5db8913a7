#include "gasl/generators.hpp"

#include <algorithm>
#include <cmath>

#include "gasl/primitives.hpp"

namespace gasl::gen {

using ad::Var;

// ---------------------------------------------------------------------------
// Batches

Batch make_batch(const Mat& X, const std::vector<Label>& y,
                 const SemanticTable& table) {
  if (X.rows() != static_cast<long>(y.size()))
    throw ShapeError("batch: features/labels length mismatch");
  Batch b;
  b.X = X;
  b.y = y;
  b.A.resize(X.rows(), table.dim());
  for (long i = 0; i < X.rows(); ++i) b.A.row(i) = table.row(y[i]).transpose();
  return b;
}

Batch take_rows(const Batch& b, const IndexList& rows) {
  Batch out;
  out.X.resize(rows.size(), b.X.cols());
  out.A.resize(rows.size(), b.A.cols());
  out.y.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    long r = rows[i];
    if (r < 0 || r >= b.X.rows()) throw ShapeError("batch: row out of range");
    out.X.row(i) = b.X.row(r);
    out.A.row(i) = b.A.row(r);
    out.y.push_back(b.y[r]);
  }
  return out;
}

Batch concat_batches(const Batch& a, const Batch& b) {
  if (a.X.cols() != b.X.cols() || a.A.cols() != b.A.cols())
    throw ShapeError("batch: dimension mismatch in concatenation");
  Batch out;
  out.X.resize(a.X.rows() + b.X.rows(), a.X.cols());
  out.X << a.X, b.X;
  out.A.resize(a.A.rows() + b.A.rows(), a.A.cols());
  out.A << a.A, b.A;
  out.y = a.y;
  out.y.insert(out.y.end(), b.y.begin(), b.y.end());
  return out;
}

double LossBreakdown::weighted_sum() const {
  double acc = 0.0;
  for (const auto& [name, value] : terms) {
    auto it = weights.find(name);
    acc += (it == weights.end() ? 1.0 : it->second) * value;
  }
  return acc;
}

// ---------------------------------------------------------------------------
// State

Vec ModelState::sem_row(Label y) const {
  if (y < 1 || y > n_classes())
    throw MissingDescription("no description for class " +
                             std::to_string(y));
  return sem.row(y - 1).transpose();
}

nn::Mlp net_G(const ModelState& s) {
  // Conditioned input is [a, z] for GAN/VAEGAN kinds, [a, h] for the CVAE.
  int zdim = s.kind == ModelKind::cvae ? s.hp.latent_dim : s.hp.noise_dim;
  return {"G", s.d_a() + zdim, s.hp.hidden_dim, s.d_x};
}
nn::Mlp net_D(const ModelState& s) {
  return {"D", s.d_x + s.d_a(), s.hp.hidden_dim, 1};
}
nn::Mlp net_E(const ModelState& s) {
  int zdim = s.kind == ModelKind::cvae ? s.hp.latent_dim : s.hp.noise_dim;
  return {"E", s.d_x + s.d_a(), s.hp.hidden_dim, 2 * zdim};
}
nn::Mlp net_Ex(const ModelState& s) {
  return {"Ex", s.d_x, s.hp.hidden_dim, 2 * s.hp.latent_dim};
}
nn::Mlp net_Ea(const ModelState& s) {
  int out = s.kind == ModelKind::vaecflow ? s.flow_dim() : s.hp.latent_dim;
  return {"Ea", s.d_a(), s.hp.hidden_dim, 2 * out};
}
nn::Mlp net_Gx(const ModelState& s) {
  return {"Gx", s.hp.latent_dim, s.hp.hidden_dim, s.d_x};
}
nn::Mlp net_Ga(const ModelState& s) {
  int in = s.kind == ModelKind::vaecflow ? s.flow_dim() : s.hp.latent_dim;
  return {"Ga", in, s.hp.hidden_dim, s.d_a()};
}
nn::Mlp net_Dec(const ModelState& s) {
  return {"Dec", s.d_x, s.hp.hidden_dim, s.d_a()};
}
flow::Flow net_flow(const ModelState& s) {
  return flow::Flow::make("flow", s.flow_dim(), s.flow_dim(), s.hp.hidden_dim,
                          4);
}

namespace {

bool is_wgan_kind(ModelKind k) {
  return k == ModelKind::fclswgan || k == ModelKind::lisgan ||
         k == ModelKind::lsrgan;
}
bool is_vaegan_kind(ModelKind k) {
  return k == ModelKind::fvaegand2 || k == ModelKind::tfvaegan ||
         k == ModelKind::free_model || k == ModelKind::gcmcf;
}
bool has_decoder(ModelKind k) {
  return k == ModelKind::tfvaegan || k == ModelKind::free_model ||
         k == ModelKind::gcmcf;
}

std::vector<nn::Mlp> nets_of(const ModelState& s) {
  std::vector<nn::Mlp> nets;
  switch (s.kind) {
    case ModelKind::fclswgan:
    case ModelKind::lisgan:
    case ModelKind::lsrgan:
      nets = {net_G(s), net_D(s)};
      break;
    case ModelKind::cvae:
      nets = {net_E(s), net_G(s)};
      break;
    case ModelKind::cadavae:
      nets = {net_Ex(s), net_Ea(s), net_Gx(s), net_Ga(s)};
      break;
    case ModelKind::vaecflow:
      nets = {net_Ea(s), net_Ga(s)};
      for (const auto& n : net_flow(s).nets) nets.push_back(n);
      break;
    case ModelKind::fvaegand2:
    case ModelKind::tfvaegan:
    case ModelKind::free_model:
    case ModelKind::gcmcf:
      nets = {net_G(s), net_D(s), net_E(s)};
      if (has_decoder(s.kind)) nets.push_back(net_Dec(s));
      break;
  }
  return nets;
}

}  // namespace

void ModelState::check() const {
  if (d_x < 1 || n_seen < 1 || n_classes() <= n_seen)
    throw ConfigError("model state: bad dimensions");
  for (const auto& net : nets_of(*this))
    for (const char* suffix : {".W1", ".b1", ".W2", ".b2"})
      if (!params.has(net.prefix + suffix))
        throw ConfigError("model state: missing parameters for " + net.prefix);
  params.check_finite();
  if (!sem.allFinite())
    throw NumericalError("model state: non-finite descriptions");
}

ModelState make_model_state(ModelKind kind, int d_x, const SemanticTable& table,
                            int n_seen, const HyperParams& hp,
                            std::uint64_t seed) {
  hp.validate();
  ModelState s;
  s.kind = kind;
  s.d_x = d_x;
  s.n_seen = n_seen;
  s.sem = table.A;
  s.hp = hp;
  for (const auto& net : nets_of(s)) {
    Rng rng(derive_seed(seed, "init:" + net.prefix));
    if (net.prefix.rfind("flow", 0) == 0)
      net.init_zero_out(s.params, rng);
    else
      net.init(s.params, rng);
  }
  const int n_cls = s.n_classes();
  if (is_wgan_kind(kind)) {
    Rng rng(derive_seed(seed, "init:cls"));
    s.params.gaussian("cls.W", d_x, n_cls, rng, 1.0 / std::sqrt(double(d_x)));
    s.params.zeros("cls.b", 1, n_cls);
  }
  if (kind == ModelKind::vaecflow) {
    Rng rng(derive_seed(seed, "init:hcls"));
    s.params.gaussian("hcls.W", s.flow_dim(), n_cls, rng,
                      1.0 / std::sqrt(double(s.flow_dim())));
    s.params.zeros("hcls.b", 1, n_cls);
  }
  if (kind == ModelKind::tfvaegan || kind == ModelKind::free_model) {
    Rng rng(derive_seed(seed, "init:fb"));
    s.params.gaussian("fb.W", hp.hidden_dim, hp.noise_dim, rng,
                      1.0 / std::sqrt(double(hp.hidden_dim)));
  }
  if (kind == ModelKind::free_model) {
    Rng rng(derive_seed(seed, "init:free.mu"));
    s.params.gaussian("free.mu.W", hp.hidden_dim, hp.latent_dim, rng,
                      1.0 / std::sqrt(double(hp.hidden_dim)));
    s.params.zeros("free.mu.b", 1, hp.latent_dim);
    s.params.zeros("centers", n_cls, hp.latent_dim);
  }
  if (kind == ModelKind::lsrgan) {
    s.mu_real = Mat::Zero(n_seen, d_x);
    s.mu_real_set.assign(n_seen, false);
    s.mu_fake_ema = Mat::Zero(n_cls, d_x);
    s.mu_fake_set.assign(n_cls, false);
  }
  s.check();
  return s;
}

// ---------------------------------------------------------------------------
// Soul samples / class means

Mat soul_samples(const Mat& X, const std::vector<Label>& y, int K,
                 std::uint64_t seed, std::vector<Label>* labels) {
  if (K < 1) throw ClusterError("soul samples: K must be >= 1");
  std::map<Label, std::vector<long>> by_class;
  for (long i = 0; i < X.rows(); ++i) by_class[y[i]].push_back(i);
  Mat out(static_cast<long>(by_class.size()) * K, X.cols());
  if (labels) labels->clear();
  long row = 0;
  for (const auto& [cls, rows] : by_class) {
    const long n = static_cast<long>(rows.size());
    if (n < K)
      throw ClusterError("soul samples: class " + std::to_string(cls) +
                         " has fewer samples than clusters");
    // Seeded initialization: K distinct samples via partial Fisher-Yates.
    Rng rng(derive_seed(seed, "souls:" + std::to_string(cls)));
    std::vector<long> pool = rows;
    Mat centroids(K, X.cols());
    for (int k = 0; k < K; ++k) {
      long pick = static_cast<long>(rng() % (pool.size() - k)) + k;
      std::swap(pool[k], pool[pick]);
      centroids.row(k) = X.row(pool[k]);
    }
    std::vector<int> assign(n, 0);
    for (int iter = 0; iter < 20; ++iter) {
      for (long i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        int best_k = 0;
        for (int k = 0; k < K; ++k) {
          double d = (X.row(rows[i]) - centroids.row(k)).squaredNorm();
          if (d < best) {
            best = d;
            best_k = k;
          }
        }
        assign[i] = best_k;
      }
      for (int k = 0; k < K; ++k) {
        Vec acc = Vec::Zero(X.cols());
        long cnt = 0;
        for (long i = 0; i < n; ++i)
          if (assign[i] == k) {
            acc += X.row(rows[i]).transpose();
            ++cnt;
          }
        if (cnt > 0) centroids.row(k) = (acc / double(cnt)).transpose();
      }
    }
    for (int k = 0; k < K; ++k) {
      out.row(row++) = centroids.row(k);
      if (labels) labels->push_back(cls);
    }
  }
  return out;
}

void lsrgan_set_real_means(ModelState& s, const Mat& X,
                           const std::vector<Label>& y) {
  std::map<Label, std::pair<Vec, long>> acc;
  for (long i = 0; i < X.rows(); ++i) {
    auto& [sum, cnt] = acc.try_emplace(y[i], Vec::Zero(X.cols()), 0).first->second;
    sum += X.row(i).transpose();
    ++cnt;
  }
  for (const auto& [cls, sc] : acc) {
    if (cls < 1 || cls > s.n_seen) continue;
    s.mu_real.row(cls - 1) = (sc.first / double(sc.second)).transpose();
    s.mu_real_set[cls - 1] = true;
  }
}

void lsrgan_update_fake_means(ModelState& s, const Mat& X_fake,
                              const std::vector<Label>& y) {
  std::map<Label, std::pair<Vec, long>> acc;
  for (long i = 0; i < X_fake.rows(); ++i) {
    auto& [sum, cnt] =
        acc.try_emplace(y[i], Vec::Zero(X_fake.cols()), 0).first->second;
    sum += X_fake.row(i).transpose();
    ++cnt;
  }
  for (const auto& [cls, sc] : acc) {
    Vec m = sc.first / double(sc.second);
    long r = cls - 1;
    if (r < 0 || r >= s.mu_fake_ema.rows()) continue;
    if (s.mu_fake_set[r])
      s.mu_fake_ema.row(r) = 0.9 * s.mu_fake_ema.row(r) + 0.1 * m.transpose();
    else
      s.mu_fake_ema.row(r) = m.transpose();
    s.mu_fake_set[r] = true;
  }
}

// ---------------------------------------------------------------------------
// Objective builders

namespace {

std::vector<int> targets0(const std::vector<Label>& y) {
  std::vector<int> t(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) t[i] = y[i] - 1;
  return t;
}

Mat seeded_randn(long rows, long cols, std::uint64_t seed) {
  Rng rng(seed);
  return nn::randn(rows, cols, rng);
}

double warm_ramp(int epoch, int total, double f0, double f1) {
  double t0 = f0 * total, t1 = f1 * total;
  if (t1 <= t0) return epoch >= t1 ? 1.0 : 0.0;
  double r = (epoch - t0) / (t1 - t0);
  return std::clamp(r, 0.0, 1.0);
}

struct Built {
  std::map<std::string, Var> terms;
  std::map<std::string, double> weights;
};

struct Ctx {
  const ModelState& s;
  ad::Tape& t;
  nn::Binder& b;
  const Batch& batch;
  std::uint64_t seed;
  Var x;  // leaves for the batch
  Var a;
};

Ctx make_ctx(const ModelState& s, ad::Tape& t, nn::Binder& b,
             const Batch& batch, std::uint64_t seed) {
  return Ctx{s, t, b, batch, seed, t.leaf(batch.X), t.leaf(batch.A)};
}

Var reparam(Ctx& c, Var mu, Var logvar, const char* tag) {
  Mat eps = seeded_randn(c.t.val(mu).rows(), c.t.val(mu).cols(),
                         derive_seed(c.seed, tag));
  return mu + cmul(exp_(scale(logvar, 0.5)), c.t.leaf(eps));
}

struct WganParts {
  Var wgan;
  Var x_fake;
};

WganParts build_wgan(Ctx& c) {
  const long n = c.batch.X.rows();
  nn::Mlp G = net_G(c.s), D = net_D(c.s);
  Mat z = seeded_randn(n, c.s.hp.noise_dim, derive_seed(c.seed, "z"));
  Var x_fake = G.forward(c.b, concat_cols(c.a, c.t.leaf(z)));
  Var d_real = D.forward(c.b, concat_cols(c.x, c.a));
  Var d_fake = D.forward(c.b, concat_cols(x_fake, c.a));
  Rng arng(derive_seed(c.seed, "alpha"));
  Var x_hat = prim::interpolate(c.x, x_fake, arng);
  Var gp = prim::gradient_penalty(D, c.b, x_hat, c.a, c.s.hp.lambda_gp);
  return {mean(d_real) - mean(d_fake) + gp, x_fake};
}

Var build_cls(Ctx& c, Var features, const std::vector<Label>& y,
              const char* head) {
  std::string w = std::string(head) + ".W";
  if (!c.s.params.has(w))
    throw ConfigError("classifier head not initialized: " + w);
  Var logits = add_rowvec(matmul(features, c.b(w)),
                          c.b(std::string(head) + ".b"));
  return softmax_xent(logits, targets0(y));
}

Built build_fclswgan(Ctx& c) {
  WganParts w = build_wgan(c);
  Built out;
  out.terms["wgan"] = w.wgan;
  out.terms["cls"] = build_cls(c, w.x_fake, c.batch.y, "cls");
  out.weights = {{"wgan", 1.0}, {"cls", c.s.hp.beta}};
  return out;
}

// Rows of the souls matrix belonging to one class.
std::vector<long> soul_rows(const ModelState& s, Label cls) {
  std::vector<long> rows;
  for (std::size_t i = 0; i < s.soul_labels.size(); ++i)
    if (s.soul_labels[i] == cls) rows.push_back(static_cast<long>(i));
  return rows;
}

Built build_lisgan(Ctx& c) {
  if (c.s.souls.rows() == 0)
    throw ConfigError("soul samples not initialized for LisGAN");
  Built out = build_fclswgan(c);
  Var x_fake;  // rebuilt below is wasteful; reuse via wgan parts instead
  // build_fclswgan already created the generator pass; recreate the handle by
  // regenerating with the same seed-derived noise (identical values, shared
  // parameters, negligible toy-scale cost).
  {
    nn::Mlp G = net_G(c.s);
    Mat z = seeded_randn(c.batch.X.rows(), c.s.hp.noise_dim,
                         derive_seed(c.seed, "z"));
    x_fake = G.forward(c.b, concat_cols(c.a, c.t.leaf(z)));
  }
  const Mat& fake = c.t.val(x_fake);
  // r1: distance of each generated seen sample to its nearest soul sample.
  std::vector<long> seen_rows;
  std::vector<long> nearest;  // row into souls
  for (long i = 0; i < fake.rows(); ++i) {
    Label y = c.batch.y[i];
    if (y > c.s.n_seen) continue;
    auto rows = soul_rows(c.s, y);
    if (rows.empty())
      throw ConfigError("no soul samples for class " + std::to_string(y));
    double best = std::numeric_limits<double>::infinity();
    long best_r = rows[0];
    for (long r : rows) {
      double d = (fake.row(i) - c.s.souls.row(r)).squaredNorm();
      if (d < best) {
        best = d;
        best_r = r;
      }
    }
    seen_rows.push_back(i);
    nearest.push_back(best_r);
  }
  Var r1 = c.t.scalar(0.0);
  if (!seen_rows.empty()) {
    Mat chosen(static_cast<long>(nearest.size()), fake.cols());
    for (std::size_t i = 0; i < nearest.size(); ++i)
      chosen.row(static_cast<long>(i)) = c.s.souls.row(nearest[i]);
    Var diff = gather_rows(x_fake, seen_rows) - c.t.leaf(chosen);
    r1 = mean(rowwise_sum(square(diff)));
  }
  // r2: per class, virtual soul samples (per-cluster means of the generated
  // batch under the nearest-soul assignment) against the real soul samples.
  Var r2_acc = c.t.scalar(0.0);
  std::map<Label, std::map<long, std::vector<long>>> groups;
  for (std::size_t i = 0; i < seen_rows.size(); ++i)
    groups[c.batch.y[seen_rows[i]]][nearest[i]].push_back(seen_rows[i]);
  for (const auto& [cls, clusters] : groups) {
    Var best;
    double best_val = std::numeric_limits<double>::infinity();
    for (const auto& [soul_row, members] : clusters) {
      Var mu_virtual = colwise_mean(gather_rows(x_fake, members));
      Var dist = rowwise_sum(
          square(mu_virtual - c.t.leaf(c.s.souls.row(soul_row))));
      double v = c.t.val(dist)(0, 0);
      if (v < best_val) {
        best_val = v;
        best = dist;
      }
    }
    r2_acc = r2_acc + best;
  }
  Var r2 = scale(r2_acc, 1.0 / double(c.s.n_seen));
  Built& b = out;
  b.terms["r1"] = r1;
  b.terms["r2"] = r2;
  b.weights["r1"] = c.s.hp.delta;
  b.weights["r2"] = c.s.hp.gamma;
  return b;
}

Built build_lsrgan(Ctx& c) {
  Built out = build_fclswgan(c);
  nn::Mlp G = net_G(c.s);
  Var x_fake;
  {
    Mat z = seeded_randn(c.batch.X.rows(), c.s.hp.noise_dim,
                         derive_seed(c.seed, "z"));
    x_fake = G.forward(c.b, concat_cols(c.a, c.t.leaf(z)));
  }
  const double eps = c.s.hp.sr_margin;
  const int p = c.s.n_seen;
  const int q = c.s.n_classes() - p;

  // Real per-class means: prefer the once-computed estimates, fall back to
  // the batch for classes not yet covered.
  Mat mu_real = c.s.mu_real.rows() ? c.s.mu_real : Mat::Zero(p, c.s.d_x);
  std::vector<bool> real_set =
      c.s.mu_real_set.empty() ? std::vector<bool>(p, false) : c.s.mu_real_set;
  {
    std::map<Label, std::pair<Vec, long>> acc;
    for (long i = 0; i < c.batch.X.rows(); ++i)
      if (c.batch.y[i] <= p) {
        auto& [sum, cnt] =
            acc.try_emplace(c.batch.y[i], Vec::Zero(c.s.d_x), 0).first->second;
        sum += c.batch.X.row(i).transpose();
        ++cnt;
      }
    for (const auto& [cls, sc] : acc)
      if (!real_set[cls - 1]) {
        mu_real.row(cls - 1) = (sc.first / double(sc.second)).transpose();
        real_set[cls - 1] = true;
      }
  }

  // Generated mean estimate per class: EMA folded with the differentiable
  // batch mean (decay 0.9).
  auto fake_mean = [&](Label cls, Var generated,
                       const std::vector<long>& rows) -> std::pair<bool, Var> {
    long r = cls - 1;
    bool ema = r < c.s.mu_fake_ema.rows() && !c.s.mu_fake_set.empty() &&
               c.s.mu_fake_set[r];
    if (!rows.empty()) {
      Var bm = colwise_mean(gather_rows(generated, rows));
      if (ema)
        return {true, scale(c.t.leaf(c.s.mu_fake_ema.row(r)), 0.9) +
                          scale(bm, 0.1)};
      return {true, bm};
    }
    if (ema) return {true, c.t.leaf(c.s.mu_fake_ema.row(r))};
    return {false, Var{}};
  };

  std::map<Label, std::vector<long>> rows_by_class;
  for (long i = 0; i < c.batch.X.rows(); ++i)
    if (c.batch.y[i] <= p) rows_by_class[c.batch.y[i]].push_back(i);

  auto sr_sum = [&](Label cls_i, Var mu_tilde) {
    Var acc = c.t.scalar(0.0);
    Vec a_i = c.s.sem_row(cls_i);
    for (Label j = 1; j <= p; ++j) {
      if (!real_set[j - 1]) continue;
      double c_sem = prim::cosine_similarity(c.s.sem_row(j), a_i);
      Var c_vis = rowwise_cosine(c.t.leaf(mu_real.row(j - 1)), mu_tilde);
      Var up = relu(add_const(c_vis, -(c_sem + eps)));
      Var down = relu(add_const(neg(c_vis), c_sem - eps));
      acc = acc + square(up) + square(down);
    }
    return acc;
  };

  Var sr1 = c.t.scalar(0.0);
  for (Label i = 1; i <= p; ++i) {
    auto it = rows_by_class.find(i);
    auto [ok, mu_tilde] =
        fake_mean(i, x_fake,
                  it == rows_by_class.end() ? std::vector<long>{} : it->second);
    if (!ok) continue;
    sr1 = sr1 + sr_sum(i, mu_tilde);
  }
  sr1 = scale(sr1, 1.0 / double(p));

  Var sr2 = c.t.scalar(0.0);
  for (int u = 0; u < q; ++u) {
    Label cls = p + 1 + u;
    // A small seeded generation per unseen class carries the gradient.
    const int m = 4;
    Mat z = seeded_randn(m, c.s.hp.noise_dim,
                         derive_seed(c.seed, "sr2:z:" + std::to_string(cls)));
    Mat a_rep = c.s.sem_row(cls).transpose().replicate(m, 1);
    Var xg = G.forward(c.b, concat_cols(c.t.leaf(a_rep), c.t.leaf(z)));
    std::vector<long> all_rows(m);
    for (int i = 0; i < m; ++i) all_rows[i] = i;
    auto [ok, mu_tilde] = fake_mean(cls, xg, all_rows);
    if (!ok) continue;
    sr2 = sr2 + sr_sum(cls, mu_tilde);
  }
  if (q > 0) sr2 = scale(sr2, 1.0 / double(q));

  out.terms["sr1"] = sr1;
  out.terms["sr2"] = sr2;
  out.weights["sr1"] = c.s.hp.delta;
  out.weights["sr2"] = c.s.hp.gamma;
  return out;
}

Built build_cvae(Ctx& c) {
  nn::Mlp E = net_E(c.s), G = net_G(c.s);
  const int L = c.s.hp.latent_dim;
  Var enc = E.forward(c.b, concat_cols(c.x, c.a));
  Var mu = slice_cols(enc, 0, L);
  Var lv = slice_cols(enc, L, L);
  Var h = reparam(c, mu, lv, "eps");
  Var x_hat = G.forward(c.b, concat_cols(c.a, h));
  Built out;
  out.terms["kl"] = prim::kl_diag_gaussian_mean(mu, lv);
  out.terms["rec"] = prim::gaussian_recon(x_hat, c.x);
  out.weights = {{"kl", 1.0}, {"rec", c.s.hp.beta}};
  return out;
}

Built build_cadavae(Ctx& c) {
  nn::Mlp Ex = net_Ex(c.s), Ea = net_Ea(c.s), Gx = net_Gx(c.s),
          Ga = net_Ga(c.s);
  const int L = c.s.hp.latent_dim;
  const double beta = c.s.hp.beta;
  Var ex = Ex.forward(c.b, c.x);
  Var mux = slice_cols(ex, 0, L), lvx = slice_cols(ex, L, L);
  Var ea = Ea.forward(c.b, c.a);
  Var mua = slice_cols(ea, 0, L), lva = slice_cols(ea, L, L);
  Var zx = reparam(c, mux, lvx, "eps:x");
  Var za = reparam(c, mua, lva, "eps:a");
  Var xvae = prim::kl_diag_gaussian_mean(mux, lvx) +
             scale(prim::gaussian_recon(Gx.forward(c.b, zx), c.x), beta);
  Var avae = prim::kl_diag_gaussian_mean(mua, lva) +
             scale(prim::gaussian_recon(Ga.forward(c.b, za), c.a), beta);
  // Cross-modal reconstruction through the encoder means.
  Var ca = prim::l1_recon(Gx.forward(c.b, mua), c.x) +
           prim::l1_recon(Ga.forward(c.b, mux), c.a);
  Var da = prim::wasserstein2_diag_mean(mua, lva, mux, lvx);
  Built out;
  out.terms = {{"xvae", xvae}, {"avae", avae}, {"ca", ca}, {"da", da}};
  const HyperParams& hp = c.s.hp;
  out.weights = {
      {"xvae", 1.0},
      {"avae", 1.0},
      {"ca", hp.delta * warm_ramp(c.s.epoch, hp.epochs, hp.ca_warm_start,
                                  hp.ca_warm_end)},
      {"da", hp.gamma * warm_ramp(c.s.epoch, hp.epochs, hp.da_warm_start,
                                  hp.da_warm_end)},
  };
  return out;
}

Built build_vaecflow(Ctx& c) {
  nn::Mlp Ea = net_Ea(c.s), Ga = net_Ga(c.s);
  flow::Flow fl = net_flow(c.s);
  const int d = c.s.flow_dim();
  Var ea = Ea.forward(c.b, c.a);
  Var mu_h = slice_cols(ea, 0, d);
  Var lv_h = slice_cols(ea, d, d);
  Var logdet;
  Var h_sf = fl.forward(c.b, c.x, mu_h, &logdet);
  // Negative conditional Gaussian log-density at the flowed sample.
  Var quad = cmul(square(h_sf - mu_h), exp_(neg(lv_h))) + lv_h;
  Var nll_rows =
      add_const(scale(rowwise_sum(quad), 0.5), 0.5 * d * std::log(2.0 * M_PI));
  Var flow_nll = mean(nll_rows - logdet);
  Var vae_flow =
      prim::gaussian_recon(Ga.forward(c.b, h_sf), c.a) +
      mean(rowwise_sum(add_const(exp_(lv_h) - lv_h, -1.0)));
  Var hcls = build_cls(c, mu_h, c.batch.y, "hcls");
  Built out;
  out.terms = {{"flow_nll", flow_nll}, {"vae_flow", vae_flow}, {"hcls", hcls}};
  out.weights = {{"flow_nll", 1.0},
                 {"vae_flow", c.s.hp.delta},
                 {"hcls", c.s.hp.gamma}};
  return out;
}

struct VaeganParts {
  Var wgan, kl, rec;
  Var x_fake;   // prior-noise generator pass
  Var z_enc;    // reparameterized encoder sample
  Var mu, lv;   // encoder parameters
  Var x_recon;  // decoder pass on the encoder sample
};

VaeganParts build_vaegan(Ctx& c) {
  nn::Mlp G = net_G(c.s), D = net_D(c.s), E = net_E(c.s);
  const long n = c.batch.X.rows();
  const int L = c.s.hp.noise_dim;
  VaeganParts p;
  Mat z = seeded_randn(n, L, derive_seed(c.seed, "z"));
  p.x_fake = G.forward(c.b, concat_cols(c.a, c.t.leaf(z)));
  Var d_real = D.forward(c.b, concat_cols(c.x, c.a));
  Var d_fake = D.forward(c.b, concat_cols(p.x_fake, c.a));
  Rng arng(derive_seed(c.seed, "alpha"));
  Var x_hat = prim::interpolate(c.x, p.x_fake, arng);
  Var gp = prim::gradient_penalty(D, c.b, x_hat, c.a, c.s.hp.lambda_gp);
  p.wgan = mean(d_real) - mean(d_fake) + gp;
  Var enc = E.forward(c.b, concat_cols(c.x, c.a));
  p.mu = slice_cols(enc, 0, L);
  p.lv = slice_cols(enc, L, L);
  p.z_enc = reparam(c, p.mu, p.lv, "eps");
  p.x_recon = G.forward(c.b, concat_cols(c.a, p.z_enc));
  p.kl = prim::kl_diag_gaussian_mean(p.mu, p.lv);
  p.rec = prim::gaussian_recon(p.x_recon, c.x);
  return p;
}

Built base_vaegan_terms(Ctx& c, const VaeganParts& p) {
  Built out;
  out.terms = {{"wgan", p.wgan}, {"kl", p.kl}, {"rec", p.rec}};
  out.weights = {{"wgan", 1.0},
                 {"kl", c.s.hp.delta},
                 {"rec", c.s.hp.delta * c.s.hp.beta}};
  return out;
}

Built build_fvaegand2(Ctx& c) {
  VaeganParts p = build_vaegan(c);
  return base_vaegan_terms(c, p);
}

struct FeedbackParts {
  Var cyc;
  Var h_rec;  // decoder hidden activations on the reconstruction
};

FeedbackParts build_feedback(Ctx& c, const VaeganParts& p) {
  nn::Mlp G = net_G(c.s), Dec = net_Dec(c.s);
  Var dec_real = Dec.forward(c.b, c.x);
  Var h_rec;
  Dec.forward(c.b, p.x_recon, &h_rec);
  // Second generator pass modulated by the decoder's latent feature.
  Var z_fb = p.z_enc + matmul(h_rec, c.b("fb.W"));
  Var x_fb = G.forward(c.b, concat_cols(c.a, z_fb));
  Var dec_fb = Dec.forward(c.b, x_fb);
  FeedbackParts f;
  f.cyc = prim::l1_recon(dec_real, c.a) + prim::l1_recon(dec_fb, c.a);
  f.h_rec = h_rec;
  return f;
}

Built build_tfvaegan(Ctx& c) {
  VaeganParts p = build_vaegan(c);
  Built out = base_vaegan_terms(c, p);
  FeedbackParts f = build_feedback(c, p);
  out.terms["cyc"] = f.cyc;
  out.weights["cyc"] = c.s.hp.gamma;
  return out;
}

Built build_free(Ctx& c) {
  VaeganParts p = build_vaegan(c);
  Built out = base_vaegan_terms(c, p);
  FeedbackParts f = build_feedback(c, p);
  out.terms["cyc"] = f.cyc;
  out.weights["cyc"] = c.s.hp.gamma;
  // Self-adaptive margin against trainable class centers.
  Var mu_s = add_rowvec(matmul(f.h_rec, c.b("free.mu.W")), c.b("free.mu.b"));
  Var centers = c.b("centers");
  const long n = c.batch.X.rows();
  std::vector<long> own(n), other(n);
  Rng rng(derive_seed(c.seed, "samc"));
  for (long i = 0; i < n; ++i) {
    own[i] = c.batch.y[i] - 1;
    long pick = static_cast<long>(rng() % (c.s.n_classes() - 1));
    if (pick >= own[i]) ++pick;
    other[i] = pick;
  }
  Var d_own = rowwise_sum(square(mu_s - gather_rows(centers, own)));
  Var d_other = rowwise_sum(square(mu_s - gather_rows(centers, other)));
  const double eta = c.s.hp.samc_eta;
  Var samc = mean(relu(add_const(
      scale(d_own, eta) - scale(d_other, 1.0 - eta), c.s.hp.samc_margin)));
  out.terms["samc"] = samc;
  out.weights["samc"] = c.s.hp.xi;
  return out;
}

Built build_gcmcf(Ctx& c) {
  VaeganParts p = build_vaegan(c);
  Built out = base_vaegan_terms(c, p);
  nn::Mlp G = net_G(c.s);
  // Faithful generation: the sample's own latent with its own description.
  Var x_faith = G.forward(c.b, concat_cols(c.a, p.mu));
  Var d0 = sqrt_(add_const(rowwise_sum(square(c.x - x_faith)), 1e-12));
  // Counterfactual pool: the anchor's latent paired with other seen-class
  // descriptions (grouped per anchor class; capped, seeded subsample).
  std::map<Label, std::vector<long>> rows_by_class;
  for (long i = 0; i < c.batch.X.rows(); ++i)
    rows_by_class[c.batch.y[i]].push_back(i);
  Var acc = c.t.scalar(0.0);
  for (const auto& [cls, rows] : rows_by_class) {
    std::vector<Label> pool;
    for (Label j = 1; j <= c.s.n_seen; ++j)
      if (j != cls) pool.push_back(j);
    const std::size_t cap = 32;
    if (pool.size() > cap) {
      Rng rng(derive_seed(c.seed, "cfpool:" + std::to_string(cls)));
      for (std::size_t k = 0; k < cap; ++k) {
        std::size_t pick = k + rng() % (pool.size() - k);
        std::swap(pool[k], pool[pick]);
      }
      pool.resize(cap);
    }
    Var mu_rows = gather_rows(p.mu, rows);
    Var x_rows = gather_rows(c.x, rows);
    Var d0_rows = gather_rows(d0, rows);
    Var denom = exp_(neg(d0_rows));
    for (Label cf : pool) {
      Mat a_rep =
          c.s.sem_row(cf).transpose().replicate(static_cast<long>(rows.size()), 1);
      Var x_cf = G.forward(c.b, concat_cols(c.t.leaf(a_rep), mu_rows));
      Var d_cf = sqrt_(add_const(rowwise_sum(square(x_rows - x_cf)), 1e-12));
      denom = denom + exp_(neg(d_cf));
    }
    acc = acc + sum(d0_rows + log_(denom));
  }
  out.terms["contrastive"] = scale(acc, 1.0 / double(c.batch.X.rows()));
  out.weights["contrastive"] = c.s.hp.gamma;
  return out;
}

Built build_objective(Ctx& c) {
  switch (c.s.kind) {
    case ModelKind::fclswgan: return build_fclswgan(c);
    case ModelKind::lisgan: return build_lisgan(c);
    case ModelKind::lsrgan: return build_lsrgan(c);
    case ModelKind::cvae: return build_cvae(c);
    case ModelKind::cadavae: return build_cadavae(c);
    case ModelKind::vaecflow: return build_vaecflow(c);
    case ModelKind::fvaegand2: return build_fvaegand2(c);
    case ModelKind::tfvaegan: return build_tfvaegan(c);
    case ModelKind::free_model: return build_free(c);
    case ModelKind::gcmcf: return build_gcmcf(c);
  }
  throw ConfigError("unknown model kind");
}

Var weighted_total(ad::Tape& t, const Built& built) {
  Var total = t.scalar(0.0);
  for (const auto& [name, var] : built.terms) {
    auto it = built.weights.find(name);
    double w = it == built.weights.end() ? 1.0 : it->second;
    total = total + scale(var, w);
  }
  return total;
}

LossBreakdown finalize(ad::Tape& t, nn::Binder& b, const Built& built,
                       std::map<std::string, Mat>* grads) {
  Var total = weighted_total(t, built);
  LossBreakdown out;
  for (const auto& [name, var] : built.terms)
    out.terms[name] = t.val(var)(0, 0);
  out.weights = built.weights;
  out.total = t.val(total)(0, 0);
  if (grads) {
    t.backward(total);
    *grads = b.grads();
  }
  return out;
}

LossBreakdown eval_objective(const ModelState& s, const Batch& seen,
                             const Batch* fs_unseen, std::uint64_t seed,
                             std::map<std::string, Mat>* grads) {
  Batch joined = fs_unseen ? concat_batches(seen, *fs_unseen) : seen;
  ad::Tape tape;
  nn::Binder binder(tape, s.params);
  Ctx ctx = make_ctx(s, tape, binder, joined, seed);
  Built built = build_objective(ctx);
  return finalize(tape, binder, built, grads);
}

}  // namespace

LossBreakdown objective(const ModelState& s, const Batch& seen,
                        const Batch* fs_unseen, std::uint64_t seed) {
  return eval_objective(s, seen, fs_unseen, seed, nullptr);
}

LossBreakdown objective_with_grads(const ModelState& s, const Batch& seen,
                                   const Batch* fs_unseen, std::uint64_t seed,
                                   std::map<std::string, Mat>* grads) {
  return eval_objective(s, seen, fs_unseen, seed, grads);
}

namespace {

LossBreakdown kind_objective(const ModelState& s, ModelKind expect,
                             const Batch& seen, const Batch* fs,
                             std::uint64_t seed) {
  if (s.kind != expect)
    throw ConfigError("objective called with a state of kind " +
                      to_string(s.kind) + ", expected " + to_string(expect));
  return objective(s, seen, fs, seed);
}

}  // namespace

LossBreakdown fclswgan_objective(const ModelState& s, const Batch& seen,
                                 const Batch* fs, std::uint64_t seed) {
  return kind_objective(s, ModelKind::fclswgan, seen, fs, seed);
}
LossBreakdown lisgan_objective(const ModelState& s, const Batch& seen,
                               const Batch* fs, std::uint64_t seed) {
  return kind_objective(s, ModelKind::lisgan, seen, fs, seed);
}
LossBreakdown lsrgan_objective(const ModelState& s, const Batch& seen,
                               const Batch* fs, std::uint64_t seed) {
  return kind_objective(s, ModelKind::lsrgan, seen, fs, seed);
}
LossBreakdown cvae_objective(const ModelState& s, const Batch& seen,
                             const Batch* fs, std::uint64_t seed) {
  return kind_objective(s, ModelKind::cvae, seen, fs, seed);
}
LossBreakdown cadavae_objective(const ModelState& s, const Batch& seen,
                                const Batch* fs, std::uint64_t seed) {
  return kind_objective(s, ModelKind::cadavae, seen, fs, seed);
}
LossBreakdown vaecflow_objective(const ModelState& s, const Batch& seen,
                                 const Batch* fs, std::uint64_t seed) {
  return kind_objective(s, ModelKind::vaecflow, seen, fs, seed);
}
LossBreakdown fvaegand2_objective(const ModelState& s, const Batch& seen,
                                  const Batch* fs, std::uint64_t seed,
                                  bool transductive) {
  if (transductive)
    throw Unsupported("transductive learning is out of scope");
  return kind_objective(s, ModelKind::fvaegand2, seen, fs, seed);
}
LossBreakdown tfvaegan_objective(const ModelState& s, const Batch& seen,
                                 const Batch* fs, std::uint64_t seed) {
  return kind_objective(s, ModelKind::tfvaegan, seen, fs, seed);
}
LossBreakdown free_objective(const ModelState& s, const Batch& seen,
                             const Batch* fs, std::uint64_t seed) {
  return kind_objective(s, ModelKind::free_model, seen, fs, seed);
}
LossBreakdown gcmcf_objective(const ModelState& s, const Batch& seen,
                              const Batch* fs, std::uint64_t seed) {
  return kind_objective(s, ModelKind::gcmcf, seen, fs, seed);
}

// ---------------------------------------------------------------------------
// Synthesis / latents / routing

FeatureSet synthesize_features(const ModelState& s, const SemanticTable& table,
                               const std::vector<Label>& classes,
                               int n_per_class, std::uint64_t seed,
                               Mat* latents, Mat* sem_hat) {
  if (n_per_class < 1) throw ConfigError("synthesis: n_per_class must be >= 1");
  const long total = static_cast<long>(classes.size()) * n_per_class;
  const bool latent_space = s.kind == ModelKind::cadavae;
  const int out_dim = latent_space ? s.hp.latent_dim : s.d_x;
  Mat X(total, out_dim);
  std::vector<Label> y;
  y.reserve(total);
  Mat H, Ahat;
  if (latents && has_decoder(s.kind)) H.resize(total, s.hp.hidden_dim);
  if (sem_hat && has_decoder(s.kind)) Ahat.resize(total, s.d_a());
  long row = 0;
  for (Label cls : classes) {
    if (cls < 1 || cls > table.classes())
      throw MissingDescription("no description for class " +
                               std::to_string(cls));
    Vec a = table.row(cls);
    Mat a_rep = a.transpose().replicate(n_per_class, 1);
    std::uint64_t cseed = derive_seed(seed, "syn:" + std::to_string(cls));
    Mat block;
    switch (s.kind) {
      case ModelKind::fclswgan:
      case ModelKind::lisgan:
      case ModelKind::lsrgan:
      case ModelKind::fvaegand2:
      case ModelKind::tfvaegan:
      case ModelKind::free_model:
      case ModelKind::gcmcf: {
        Mat z = seeded_randn(n_per_class, s.hp.noise_dim, cseed);
        Mat in(n_per_class, a_rep.cols() + z.cols());
        in << a_rep, z;
        block = net_G(s).forward_plain(s.params, in);
        break;
      }
      case ModelKind::cvae: {
        Mat z = seeded_randn(n_per_class, s.hp.latent_dim, cseed);
        Mat in(n_per_class, a_rep.cols() + z.cols());
        in << a_rep, z;
        block = net_G(s).forward_plain(s.params, in);
        break;
      }
      case ModelKind::cadavae: {
        Mat enc = net_Ea(s).forward_plain(s.params, a.transpose());
        Vec mu = enc.leftCols(s.hp.latent_dim).row(0).transpose();
        Vec sd = enc.rightCols(s.hp.latent_dim)
                     .row(0)
                     .transpose()
                     .array()
                     .exp()
                     .sqrt()
                     .matrix();
        Mat eps = seeded_randn(n_per_class, s.hp.latent_dim, cseed);
        block.resize(n_per_class, s.hp.latent_dim);
        for (long i = 0; i < n_per_class; ++i)
          block.row(i) =
              (mu + sd.cwiseProduct(eps.row(i).transpose())).transpose();
        break;
      }
      case ModelKind::vaecflow: {
        Mat enc = net_Ea(s).forward_plain(s.params, a.transpose());
        const int d = s.flow_dim();
        Vec mu = enc.leftCols(d).row(0).transpose();
        Vec sd =
            enc.rightCols(d).row(0).transpose().array().exp().sqrt().matrix();
        Mat eps = seeded_randn(n_per_class, d, cseed);
        Mat z(n_per_class, d);
        for (long i = 0; i < n_per_class; ++i)
          z.row(i) = (mu + std::sqrt(s.hp.tau) *
                               sd.cwiseProduct(eps.row(i).transpose()))
                         .transpose();
        Mat cond = mu.transpose().replicate(n_per_class, 1);
        block = net_flow(s).inverse_plain(s.params, z, cond);
        break;
      }
    }
    X.middleRows(row, n_per_class) = block;
    if (H.size() || Ahat.size()) {
      Mat h;
      Mat dec = net_Dec(s).forward_plain(s.params, block, &h);
      if (H.size()) H.middleRows(row, n_per_class) = h;
      if (Ahat.size()) Ahat.middleRows(row, n_per_class) = dec;
    }
    for (int i = 0; i < n_per_class; ++i) y.push_back(cls);
    row += n_per_class;
  }
  if (latents) *latents = H;
  if (sem_hat) *sem_hat = Ahat;
  return FeatureSet(std::move(X), std::move(y), VisualProvenance::synthetic,
                    table.dataset_id, s.n_classes());
}

Mat encode_latent(const ModelState& s, const Mat& X, const Mat& /*A*/) {
  if (s.kind == ModelKind::cadavae)
    return net_Ex(s).forward_plain(s.params, X).leftCols(s.hp.latent_dim);
  if (has_decoder(s.kind)) {
    Mat h;
    net_Dec(s).forward_plain(s.params, X, &h);
    return h;
  }
  throw Unsupported("latent encoding is not defined for " + to_string(s.kind));
}

Mat decode_semantic(const ModelState& s, const Mat& X) {
  if (!has_decoder(s.kind))
    throw Unsupported("no semantic decoder for " + to_string(s.kind));
  return net_Dec(s).forward_plain(s.params, X);
}

std::vector<bool> counterfactual_seen_unseen_gate(
    const ModelState& s, const Mat& X_test, std::optional<double> threshold) {
  if (s.kind != ModelKind::gcmcf)
    throw ConfigError("counterfactual routing requires a GCM-CF state");
  const long n = X_test.rows();
  const int L = s.hp.noise_dim;
  Vec best = Vec::Constant(n, std::numeric_limits<double>::infinity());
  for (Label cls = 1; cls <= s.n_seen; ++cls) {
    Mat a_rep = s.sem_row(cls).transpose().replicate(n, 1);
    Mat in(n, X_test.cols() + a_rep.cols());
    in << X_test, a_rep;
    Mat mu = net_E(s).forward_plain(s.params, in).leftCols(L);
    Mat gin(n, a_rep.cols() + L);
    gin << a_rep, mu;
    Mat x_hat = net_G(s).forward_plain(s.params, gin);
    Vec d = (X_test - x_hat).rowwise().norm();
    best = best.cwiseMin(d);
  }
  double thr;
  if (threshold) {
    thr = *threshold;
  } else {
    std::vector<double> v(best.data(), best.data() + n);
    std::sort(v.begin(), v.end());
    thr = n == 0 ? 0.0 : v[(n - 1) / 2];
  }
  std::vector<bool> is_seen(n);
  for (long i = 0; i < n; ++i) is_seen[i] = best[i] <= thr;
  return is_seen;
}

}  // namespace gasl::gen
