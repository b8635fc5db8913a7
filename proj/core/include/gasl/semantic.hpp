#pragma once

#include <map>
#include <string>
#include <vector>

#include "gasl/autodiff.hpp"
#include "gasl/nn.hpp"
#include "gasl/types.hpp"

namespace gasl::sem {

/// Per-class character sequences.
struct TextCorpus {
  std::map<Label, std::vector<std::string>> texts;
};

/// Class-correlated character strings for desk-scale work.
TextCorpus toy_corpus(int n_classes, int texts_per_class, std::uint64_t seed);

enum class CoreKind { lstm_like, gru_like };
std::string to_string(CoreKind k);

// Character ids: 0 = padding, printable ASCII 32..126 -> 1..95.
inline constexpr int kVocab = 96;
std::vector<int> encode_chars(const std::string& text, int max_len);

struct TextEncoderConfig {
  CoreKind core = CoreKind::lstm_like;
  int hidden = 1024;
  int emb_dim = 16;
  int max_len = 256;
  double alpha = 0.5;  // direction weight of the joint-embedding loss
  int epochs = 3;
  double lr = 1e-3;
  std::uint64_t seed = 0;
};

struct TextEncoderState {
  TextEncoderConfig cfg;
  nn::Params params;  // emb, gate weights, vproj.W

  SemanticProvenance provenance() const;
};

/// Mean hidden state over the (non-padding) sequence.
Vec encode_text(const TextEncoderState& enc, const std::string& text);

/// Joint-embedding loss in one direction: for each anchor, the worst
/// structured-margin violation against the per-class pool (one row per class,
/// 1-based rows). The 0-1 margin is 1 on rivals, 0 on the true class.
double sje_direction_loss(const Mat& anchors, const std::vector<Label>& y,
                          const Mat& pool);
ad::Var sje_direction_loss_t(ad::Tape& t, ad::Var anchors,
                             const std::vector<Label>& y, ad::Var pool);

TextEncoderState train_text_encoder(const TextCorpus& corpus,
                                    const FeatureSet& visual,
                                    const TextEncoderConfig& cfg);

/// One row per class = mean over the class's texts of the per-text mean
/// hidden state.
SemanticTable class_embeddings(const TextEncoderState& enc,
                               const TextCorpus& corpus,
                               const std::string& dataset_id);

}  // namespace gasl::sem
