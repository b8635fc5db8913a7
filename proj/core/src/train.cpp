#include <json.hpp>

#include <algorithm>
#include <fstream>

#include "gasl/generators.hpp"
#include "gasl/io.hpp"
#include "gasl/primitives.hpp"

namespace gasl::gen {

using ad::Var;
using nlohmann::json;

namespace {

Mat seeded_randn(long rows, long cols, std::uint64_t seed) {
  Rng rng(seed);
  return nn::randn(rows, cols, rng);
}

std::vector<long> shuffled_indices(long n, std::uint64_t seed) {
  std::vector<long> idx(n);
  for (long i = 0; i < n; ++i) idx[i] = i;
  Rng rng(seed);
  for (long i = 0; i < n - 1; ++i) {
    long pick = i + static_cast<long>(rng() % (n - i));
    std::swap(idx[i], idx[pick]);
  }
  return idx;
}

bool has_critic(ModelKind k) {
  switch (k) {
    case ModelKind::fclswgan:
    case ModelKind::lisgan:
    case ModelKind::lsrgan:
    case ModelKind::fvaegand2:
    case ModelKind::tfvaegan:
    case ModelKind::free_model:
    case ModelKind::gcmcf:
      return true;
    default:
      return false;
  }
}

void apply_filtered(nn::Adam& opt, nn::Params& params,
                    const std::map<std::string, Mat>& grads,
                    const std::vector<std::string>& exclude_prefixes) {
  std::map<std::string, Mat> kept;
  for (const auto& [name, g] : grads) {
    bool skip = false;
    for (const auto& p : exclude_prefixes)
      if (name.rfind(p, 0) == 0) skip = true;
    if (!skip) kept.emplace(name, g);
  }
  opt.step(params, kept);
}

/// One critic update: generated samples enter as constants, so only the
/// discriminator moves.
void critic_step(ModelState& s, const Batch& batch, std::uint64_t seed,
                 nn::Adam& opt) {
  nn::Mlp G = net_G(s), D = net_D(s);
  Mat z = seeded_randn(batch.X.rows(), s.hp.noise_dim, derive_seed(seed, "z"));
  Mat gin(batch.X.rows(), batch.A.cols() + z.cols());
  gin << batch.A, z;
  Mat x_fake = G.forward_plain(s.params, gin);
  ad::Tape t;
  nn::Binder b(t, s.params);
  Var xr = t.leaf(batch.X), xf = t.leaf(x_fake), a = t.leaf(batch.A);
  Var d_real = D.forward(b, concat_cols(xr, a));
  Var d_fake = D.forward(b, concat_cols(xf, a));
  Rng arng(derive_seed(seed, "alpha"));
  Mat x_hat = prim::interpolate(batch.X, x_fake, arng);
  Var gp = prim::gradient_penalty(D, b, x_hat, batch.A, s.hp.lambda_gp);
  Var loss = mean(d_fake) - mean(d_real) + gp;
  t.backward(loss);
  auto grads = b.grads();
  std::map<std::string, Mat> kept;
  for (const auto& [name, g] : grads)
    if (name.rfind("D.", 0) == 0) kept.emplace(name, g);
  opt.step(s.params, kept);
}

}  // namespace

void pretrain_cls_head(ModelState& s, const Batch& data, int epochs,
                       std::uint64_t seed) {
  if (!s.params.has("cls.W"))
    throw ConfigError("no classifier head to pretrain for " +
                      to_string(s.kind));
  nn::Adam opt(1e-2);
  std::vector<int> targets(data.y.size());
  for (std::size_t i = 0; i < data.y.size(); ++i) targets[i] = data.y[i] - 1;
  const long n = data.X.rows();
  const long bs = std::min<long>(s.hp.batch_size, n);
  for (int e = 0; e < epochs; ++e) {
    auto idx = shuffled_indices(n, derive_seed(seed, "cls:" + std::to_string(e)));
    for (long start = 0; start < n; start += bs) {
      long len = std::min(bs, n - start);
      Mat X(len, data.X.cols());
      std::vector<int> tg(len);
      for (long i = 0; i < len; ++i) {
        X.row(i) = data.X.row(idx[start + i]);
        tg[i] = targets[idx[start + i]];
      }
      ad::Tape t;
      nn::Binder b(t, s.params);
      Var logits = add_rowvec(matmul(t.leaf(X), b("cls.W")), b("cls.b"));
      Var loss = softmax_xent(logits, tg);
      t.backward(loss);
      opt.step(s.params, b.grads());
    }
  }
}

void train_model(ModelState& s, const Batch& train, const Batch* fs_unseen,
                 const Schedule& schedule, std::uint64_t seed, TrainLog* log,
                 const std::function<void(const ModelState&, int)>& on_epoch) {
  s.check();
  Batch full = fs_unseen ? concat_batches(train, *fs_unseen) : train;
  const long n = full.X.rows();
  if (n == 0) throw DegenerateInput("training set is empty");
  const long bs = std::min<long>(s.hp.batch_size, n);

  if (s.params.has("cls.W"))
    pretrain_cls_head(s, full, 30, derive_seed(seed, "pretrain"));
  if (s.kind == ModelKind::lsrgan) lsrgan_set_real_means(s, full.X, full.y);

  nn::Adam opt(s.hp.lr), opt_d(s.hp.lr);
  nn::Mlp G = net_G(s);

  for (int epoch = 0; epoch < schedule.gen_epochs; ++epoch) {
    s.epoch = epoch;
    std::uint64_t eseed = derive_seed(seed, "epoch:" + std::to_string(epoch));
    if (s.kind == ModelKind::lisgan) {
      IndexList seen_rows;
      for (long i = 0; i < n; ++i)
        if (full.y[i] <= s.n_seen) seen_rows.push_back(i);
      Batch seen = take_rows(full, seen_rows);
      s.souls = soul_samples(seen.X, seen.y, s.hp.soul_clusters,
                             derive_seed(eseed, "souls"), &s.soul_labels);
    }
    auto idx = shuffled_indices(n, derive_seed(eseed, "shuffle"));
    long bi = 0;
    for (long start = 0; start < n; start += bs, ++bi) {
      long len = std::min(bs, n - start);
      IndexList rows(idx.begin() + start, idx.begin() + start + len);
      Batch batch = take_rows(full, rows);
      std::uint64_t bseed = derive_seed(eseed, "batch:" + std::to_string(bi));
      if (has_critic(s.kind))
        for (int c = 0; c < schedule.critic_steps; ++c)
          critic_step(s, batch, derive_seed(bseed, "d:" + std::to_string(c)),
                      opt_d);
      std::map<std::string, Mat> grads;
      objective_with_grads(s, batch, nullptr, bseed, &grads);
      apply_filtered(opt, s.params, grads, {"D.", "cls."});
      if (s.kind == ModelKind::lsrgan) {
        Mat z = seeded_randn(len, s.hp.noise_dim, derive_seed(bseed, "ema"));
        Mat gin(len, batch.A.cols() + z.cols());
        gin << batch.A, z;
        lsrgan_update_fake_means(s, G.forward_plain(s.params, gin), batch.y);
      }
    }
    s.params.check_finite();
    if (log) {
      long m = std::min<long>(n, 256);
      IndexList rows(m);
      for (long i = 0; i < m; ++i) rows[i] = i;
      log->epochs.push_back(
          objective(s, take_rows(full, rows), nullptr, derive_seed(eseed, "log")));
    }
    if (on_epoch) on_epoch(s, epoch + 1);
  }
  s.epoch = schedule.gen_epochs;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

json hp_to_json(const HyperParams& h) {
  return {{"beta", h.beta},
          {"delta", h.delta},
          {"gamma", h.gamma},
          {"xi", h.xi},
          {"lambda_gp", h.lambda_gp},
          {"sr_margin", h.sr_margin},
          {"samc_margin", h.samc_margin},
          {"samc_eta", h.samc_eta},
          {"tau", h.tau},
          {"ca_warm_start", h.ca_warm_start},
          {"ca_warm_end", h.ca_warm_end},
          {"da_warm_start", h.da_warm_start},
          {"da_warm_end", h.da_warm_end},
          {"soul_clusters", h.soul_clusters},
          {"latent_dim", h.latent_dim},
          {"noise_dim", h.noise_dim},
          {"syn_per_class", h.syn_per_class},
          {"hidden_dim", h.hidden_dim},
          {"lr", h.lr},
          {"epochs", h.epochs},
          {"batch_size", h.batch_size}};
}

HyperParams hp_from_json(const json& j) {
  HyperParams h;
  h.beta = j.at("beta");
  h.delta = j.at("delta");
  h.gamma = j.at("gamma");
  h.xi = j.at("xi");
  h.lambda_gp = j.at("lambda_gp");
  h.sr_margin = j.at("sr_margin");
  h.samc_margin = j.at("samc_margin");
  h.samc_eta = j.at("samc_eta");
  h.tau = j.at("tau");
  h.ca_warm_start = j.at("ca_warm_start");
  h.ca_warm_end = j.at("ca_warm_end");
  h.da_warm_start = j.at("da_warm_start");
  h.da_warm_end = j.at("da_warm_end");
  h.soul_clusters = j.at("soul_clusters");
  h.latent_dim = j.at("latent_dim");
  h.noise_dim = j.at("noise_dim");
  h.syn_per_class = j.at("syn_per_class");
  h.hidden_dim = j.at("hidden_dim");
  h.lr = j.at("lr");
  h.epochs = j.at("epochs");
  h.batch_size = j.at("batch_size");
  return h;
}

// Named tensors in a stable order: parameters first (map order), then the
// auxiliary matrices.
std::vector<std::pair<std::string, const Mat*>> tensor_list(
    const ModelState& s) {
  std::vector<std::pair<std::string, const Mat*>> out;
  for (const auto& [name, m] : s.params.values()) out.emplace_back(name, &m);
  out.emplace_back("@souls", &s.souls);
  out.emplace_back("@mu_real", &s.mu_real);
  out.emplace_back("@mu_fake_ema", &s.mu_fake_ema);
  out.emplace_back("@sem", &s.sem);
  return out;
}

}  // namespace

void save_checkpoint(const ModelState& s, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto tensors = tensor_list(s);
  {
    std::ofstream out(fs::path(dir) / "tensors.f64",
                      std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write checkpoint blob in " + dir);
    for (const auto& [name, m] : tensors)
      for (long i = 0; i < m->rows(); ++i)
        for (long j = 0; j < m->cols(); ++j) {
          double v = (*m)(i, j);
          out.write(reinterpret_cast<const char*>(&v), sizeof(v));
        }
  }
  json j;
  j["version"] = 1;
  j["kind"] = to_string(s.kind);
  j["d_x"] = s.d_x;
  j["n_seen"] = s.n_seen;
  j["epoch"] = s.epoch;
  j["hyperparams"] = hp_to_json(s.hp);
  j["soul_labels"] = s.soul_labels;
  j["mu_real_set"] = s.mu_real_set;
  j["mu_fake_set"] = s.mu_fake_set;
  json tj = json::array();
  for (const auto& [name, m] : tensors)
    tj.push_back({{"name", name}, {"rows", m->rows()}, {"cols", m->cols()}});
  j["tensors"] = tj;
  {
    std::string bytes = io::read_file(fs::path(dir) / "tensors.f64");
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(bytes)));
    j["checksum"] = buf;
  }
  io::atomic_write(fs::path(dir) / "manifest.json", j.dump(2));
}

ModelState load_checkpoint(const std::string& dir) {
  namespace fs = std::filesystem;
  json j = json::parse(io::read_file(fs::path(dir) / "manifest.json"));
  for (const char* field :
       {"version", "kind", "d_x", "n_seen", "epoch", "hyperparams", "tensors"})
    if (!j.contains(field))
      throw IngestError(std::string("checkpoint manifest missing field: ") +
                        field);
  ModelState s;
  s.kind = model_kind_from_string(j["kind"]);
  s.d_x = j["d_x"];
  s.n_seen = j["n_seen"];
  s.epoch = j["epoch"];
  s.hp = hp_from_json(j["hyperparams"]);
  if (j.contains("soul_labels"))
    s.soul_labels = j["soul_labels"].get<std::vector<Label>>();
  if (j.contains("mu_real_set"))
    s.mu_real_set = j["mu_real_set"].get<std::vector<bool>>();
  if (j.contains("mu_fake_set"))
    s.mu_fake_set = j["mu_fake_set"].get<std::vector<bool>>();
  if (j.contains("checksum")) {
    std::string bytes = io::read_file(fs::path(dir) / "tensors.f64");
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(bytes)));
    if (j["checksum"] != buf)
      throw IngestError("checkpoint blob checksum mismatch in " + dir);
  }
  std::ifstream in(fs::path(dir) / "tensors.f64", std::ios::binary);
  if (!in) throw IngestError("cannot open checkpoint blob in " + dir);
  for (const auto& tj : j["tensors"]) {
    std::string name = tj.at("name");
    long rows = tj.at("rows"), cols = tj.at("cols");
    Mat m(rows, cols);
    for (long i = 0; i < rows; ++i)
      for (long jj = 0; jj < cols; ++jj) {
        double v = 0;
        in.read(reinterpret_cast<char*>(&v), sizeof(v));
        if (!in) throw IngestError("checkpoint blob truncated in " + dir);
        m(i, jj) = v;
      }
    if (name == "@souls")
      s.souls = std::move(m);
    else if (name == "@mu_real")
      s.mu_real = std::move(m);
    else if (name == "@mu_fake_ema")
      s.mu_fake_ema = std::move(m);
    else if (name == "@sem")
      s.sem = std::move(m);
    else
      s.params.values()[name] = std::move(m);
  }
  s.check();
  return s;
}

}  // namespace gasl::gen
