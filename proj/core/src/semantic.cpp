#include "gasl/semantic.hpp"

#include <algorithm>
#include <cmath>

#include "gasl/rng.hpp"

namespace gasl::sem {

using ad::Var;

std::string to_string(CoreKind k) {
  return k == CoreKind::lstm_like ? "lstm" : "gru";
}

TextCorpus toy_corpus(int n_classes, int texts_per_class, std::uint64_t seed) {
  TextCorpus corpus;
  for (Label c = 1; c <= n_classes; ++c) {
    Rng rng(derive_seed(seed, "corpus:" + std::to_string(c)));
    for (int k = 0; k < texts_per_class; ++k) {
      std::string text;
      int len = 16 + static_cast<int>(rng() % 8);
      for (int i = 0; i < len; ++i) {
        // Characters cluster around a class-specific region of the alphabet.
        int base = (c * 5) % 26;
        text.push_back(static_cast<char>('a' + (base + rng() % 4) % 26));
      }
      corpus.texts[c].push_back(text);
    }
  }
  return corpus;
}

std::vector<int> encode_chars(const std::string& text, int max_len) {
  std::vector<int> ids;
  for (char c : text) {
    if (static_cast<int>(ids.size()) >= max_len) break;
    int v = static_cast<unsigned char>(c);
    ids.push_back(v >= 32 && v <= 126 ? v - 31 : 0);
  }
  if (ids.empty()) ids.push_back(0);
  return ids;
}

SemanticProvenance TextEncoderState::provenance() const {
  if (cfg.core == CoreKind::lstm_like) return SemanticProvenance::naive;
  return cfg.alpha == 0.5 ? SemanticProvenance::gru
                          : SemanticProvenance::imb_gru;
}

namespace {

std::vector<std::string> gate_names(CoreKind core) {
  if (core == CoreKind::gru_like) return {"z", "r", "h"};
  return {"i", "f", "o", "g"};
}

void init_params(TextEncoderState& s) {
  const TextEncoderConfig& c = s.cfg;
  Rng rng(derive_seed(c.seed, "text-encoder"));
  s.params.gaussian("emb", kVocab, c.emb_dim, rng,
                    1.0 / std::sqrt(double(c.emb_dim)));
  for (const auto& g : gate_names(c.core)) {
    s.params.gaussian("W" + g, c.emb_dim, c.hidden, rng,
                      1.0 / std::sqrt(double(c.emb_dim)));
    s.params.gaussian("U" + g, c.hidden, c.hidden, rng,
                      1.0 / std::sqrt(double(c.hidden)));
    s.params.zeros("b" + g, 1, c.hidden);
  }
}

/// Stacks 1-row expressions into one matrix.
Var vstack(const std::vector<Var>& rows) {
  Var acc = transpose(rows.at(0));
  for (std::size_t i = 1; i < rows.size(); ++i)
    acc = concat_cols(acc, transpose(rows[i]));
  return transpose(acc);
}

/// Mean hidden state of the recurrence over a character sequence.
Var encode_text_t(const TextEncoderState& s, nn::Binder& b,
                  const std::string& text) {
  ad::Tape& t = b.tape();
  const TextEncoderConfig& c = s.cfg;
  std::vector<long> ids;
  for (int id : encode_chars(text, c.max_len)) ids.push_back(id);
  Var X = gather_rows(b("emb"), ids);
  Var h = t.leaf(Mat::Zero(1, c.hidden));
  Var cell = t.leaf(Mat::Zero(1, c.hidden));
  Var ones = t.leaf(Mat::Ones(1, c.hidden));
  Var acc = t.leaf(Mat::Zero(1, c.hidden));
  for (std::size_t step = 0; step < ids.size(); ++step) {
    Var x = gather_rows(X, {static_cast<long>(step)});
    auto gate = [&](const char* g, Var hh) {
      return add_rowvec(matmul(x, b(std::string("W") + g)) +
                            matmul(hh, b(std::string("U") + g)),
                        b(std::string("b") + g));
    };
    if (c.core == CoreKind::gru_like) {
      Var z = sigmoid(gate("z", h));
      Var r = sigmoid(gate("r", h));
      Var cand = tanh_(gate("h", cmul(r, h)));
      h = cmul(ones - z, h) + cmul(z, cand);
    } else {
      Var i = sigmoid(gate("i", h));
      Var f = sigmoid(gate("f", h));
      Var o = sigmoid(gate("o", h));
      Var g = tanh_(gate("g", h));
      cell = cmul(f, cell) + cmul(i, g);
      h = cmul(o, tanh_(cell));
    }
    acc = acc + h;
  }
  return scale(acc, 1.0 / double(ids.size()));
}

Var row_normalize(ad::Tape& t, Var x) {
  Var norms = sqrt_(add_const(rowwise_sum(square(x)), 1e-12));
  Var inv = cdiv(t.leaf(Mat::Ones(t.val(norms).rows(), 1)), norms);
  return cmul(matmul(inv, t.leaf(Mat::Ones(1, t.val(x).cols()))), x);
}

}  // namespace

Vec encode_text(const TextEncoderState& s, const std::string& text) {
  ad::Tape t;
  nn::Binder b(t, s.params);
  Var h = encode_text_t(s, b, text);
  return t.val(h).row(0).transpose();
}

Var sje_direction_loss_t(ad::Tape& t, Var anchors, const std::vector<Label>& y,
                         Var pool) {
  const long n = t.val(anchors).rows();
  const long C = t.val(pool).rows();
  if (C == 0) throw DegenerateInput("joint-embedding loss: empty pool");
  if (n != static_cast<long>(y.size()))
    throw ShapeError("joint-embedding loss: anchors/labels mismatch");
  Var S = matmul(row_normalize(t, anchors),
                 transpose(row_normalize(t, pool)));
  // Copy: growing the tape below may reallocate node storage.
  const Mat sv = t.val(S);
  Var acc = t.scalar(0.0);
  for (long i = 0; i < n; ++i) {
    Label yt = y[i];
    if (yt < 1 || yt > C)
      throw ShapeError("joint-embedding loss: label outside pool");
    // Worst margin violation; the true class contributes zero.
    double best = 0.0;
    long best_c = yt - 1;
    for (long cc = 0; cc < C; ++cc) {
      if (cc == yt - 1) continue;
      double v = 1.0 + sv(i, cc) - sv(i, yt - 1);
      if (v > best) {
        best = v;
        best_c = cc;
      }
    }
    if (best_c != yt - 1) {
      Var row = gather_rows(S, {i});
      Var diff = slice_cols(row, static_cast<int>(best_c), 1) -
                 slice_cols(row, yt - 1, 1);
      acc = acc + add_const(diff, 1.0);
    }
  }
  return scale(acc, 1.0 / double(n));
}

double sje_direction_loss(const Mat& anchors, const std::vector<Label>& y,
                          const Mat& pool) {
  ad::Tape t;
  Var loss = sje_direction_loss_t(t, t.leaf(anchors), y, t.leaf(pool));
  return t.val(loss)(0, 0);
}

TextEncoderState train_text_encoder(const TextCorpus& corpus,
                                    const FeatureSet& visual,
                                    const TextEncoderConfig& cfg) {
  if (cfg.alpha < 0.0 || cfg.alpha > 1.0)
    throw ConfigError("text encoder: alpha must be in [0,1]");
  TextEncoderState s;
  s.cfg = cfg;
  init_params(s);
  {
    Rng rng(derive_seed(cfg.seed, "vproj"));
    s.params.gaussian("vproj.W", visual.dim(), cfg.hidden, rng,
                      1.0 / std::sqrt(double(visual.dim())));
    s.params.zeros("vproj.b", 1, cfg.hidden);
  }

  // Seen classes are the ones the visual features cover.
  std::map<Label, std::vector<long>> by_class;
  for (long i = 0; i < visual.size(); ++i) by_class[visual.y[i]].push_back(i);
  std::vector<Label> classes;
  for (const auto& [cls, rows] : by_class) {
    auto it = corpus.texts.find(cls);
    if (it == corpus.texts.end() || it->second.empty())
      throw MissingDescription("no text for class " + std::to_string(cls));
    classes.push_back(cls);
  }

  nn::Adam opt(cfg.lr);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::uint64_t eseed = derive_seed(cfg.seed, "e:" + std::to_string(epoch));
    ad::Tape t;
    nn::Binder b(t, s.params);
    // Class-balanced batch: one visual sample and one text per seen class.
    Mat Xb(static_cast<long>(classes.size()), visual.dim());
    std::vector<Var> text_rows;
    std::vector<Label> batch_y;
    for (std::size_t k = 0; k < classes.size(); ++k) {
      Label cls = classes[k];
      Rng rng(derive_seed(eseed, "pick:" + std::to_string(cls)));
      const auto& rows = by_class[cls];
      Xb.row(static_cast<long>(k)) = visual.X.row(rows[rng() % rows.size()]);
      const auto& texts = corpus.texts.at(cls);
      text_rows.push_back(
          encode_text_t(s, b, texts[rng() % texts.size()]));
      batch_y.push_back(static_cast<Label>(k) + 1);
    }
    Var pool = vstack(text_rows);
    Var anchors =
        add_rowvec(matmul(t.leaf(Xb), b("vproj.W")), b("vproj.b"));
    Var lx = sje_direction_loss_t(t, anchors, batch_y, pool);
    Var la = sje_direction_loss_t(t, pool, batch_y, anchors);
    Var loss = scale(lx, 1.0 - cfg.alpha) + scale(la, cfg.alpha);
    t.backward(loss);
    opt.step(s.params, b.grads());
  }
  return s;
}

SemanticTable class_embeddings(const TextEncoderState& enc,
                               const TextCorpus& corpus,
                               const std::string& dataset_id) {
  if (corpus.texts.empty()) throw MissingDescription("empty corpus");
  Label max_cls = corpus.texts.rbegin()->first;
  Mat A = Mat::Zero(max_cls, enc.cfg.hidden);
  for (Label cls = 1; cls <= max_cls; ++cls) {
    auto it = corpus.texts.find(cls);
    if (it == corpus.texts.end() || it->second.empty())
      throw MissingDescription("no text for class " + std::to_string(cls));
    Vec acc = Vec::Zero(enc.cfg.hidden);
    for (const auto& text : it->second) acc += encode_text(enc, text);
    A.row(cls - 1) = (acc / double(it->second.size())).transpose();
  }
  return SemanticTable(std::move(A), enc.provenance(), dataset_id);
}

}  // namespace gasl::sem
