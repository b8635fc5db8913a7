#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gasl/errors.hpp"

namespace gasl {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Class labels are dense integers 1..p+q, seen = 1..p, unseen = p+1..p+q.
using Label = int;

enum class Task { zsl, gzsl, ufsl, gufsl, sfsl, gsfsl };

bool task_is_generalized(Task t);
bool task_is_few_shot(Task t);        // shots required
bool task_targets_unseen_shots(Task t);  // UFSL/GUFSL vs SFSL/GSFSL
std::string to_string(Task t);
Task task_from_string(const std::string& s);

enum class VisualProvenance { original, naive, finetuned, regularized, synthetic };
enum class SemanticProvenance { original, naive, gru, imb_gru, attributes };

std::string to_string(VisualProvenance p);
VisualProvenance visual_provenance_from_string(const std::string& s);
std::string to_string(SemanticProvenance p);
SemanticProvenance semantic_provenance_from_string(const std::string& s);

struct DatasetMeta {
  std::string dataset_id;
  int seen_classes = 0;    // p
  int unseen_classes = 0;  // q
  int semantic_dim = 0;    // d_a
  long n_total = 0;
  long n_seen = 0;
  long n_unseen = 0;
  std::map<Label, long> per_class_counts;

  DatasetMeta() = default;
  DatasetMeta(std::string id, int p, int q, int d_a, long total, long seen,
              long unseen, std::map<Label, long> counts);

  int total_classes() const { return seen_classes + unseen_classes; }
  bool is_seen(Label y) const { return y >= 1 && y <= seen_classes; }
  bool is_unseen(Label y) const {
    return y > seen_classes && y <= total_classes();
  }
};

struct FeatureSet {
  Mat X;                      // n x d_x
  std::vector<Label> y;       // length n
  VisualProvenance provenance = VisualProvenance::original;
  std::string dataset_id;

  FeatureSet() = default;
  FeatureSet(Mat features, std::vector<Label> labels, VisualProvenance prov,
             std::string dataset, int max_label = 0);

  long size() const { return X.rows(); }
  int dim() const { return static_cast<int>(X.cols()); }
};

struct SemanticTable {
  Mat A;  // C x d_a, row c-1 describes class c
  SemanticProvenance provenance = SemanticProvenance::original;
  std::string dataset_id;

  SemanticTable() = default;
  SemanticTable(Mat table, SemanticProvenance prov, std::string dataset);

  int classes() const { return static_cast<int>(A.rows()); }
  int dim() const { return static_cast<int>(A.cols()); }
  Vec row(Label y) const;
};

using IndexList = std::vector<long>;

struct SplitSpec {
  Task task = Task::zsl;
  std::optional<int> shots;  // N, present iff few-shot task
  std::uint64_t seed = 0;
  IndexList train_seen;
  IndexList train_unseen;
  IndexList test_seen;
  IndexList test_unseen;

  SplitSpec() = default;
  SplitSpec(Task t, std::optional<int> n, std::uint64_t s, IndexList tr_s,
            IndexList tr_u, IndexList te_s, IndexList te_u);
};

struct HyperParams {
  double beta = 1.0;
  double delta = 1.0;
  double gamma = 1.0;
  double xi = 1.0;
  double lambda_gp = 10.0;
  double sr_margin = 0.1;     // epsilon
  double samc_margin = 1.0;   // Delta
  double samc_eta = 0.5;      // eta in [0,1]
  double tau = 1.0;           // synthesis temperature (variance multiplier)
  // Warm-up ramps as fractions of the training epochs (cross-alignment and
  // distribution-alignment weights annealed linearly from zero).
  double ca_warm_start = 0.07, ca_warm_end = 0.25;
  double da_warm_start = 0.23, da_warm_end = 0.83;
  int soul_clusters = 1;      // K
  int latent_dim = 8;
  int noise_dim = 8;
  int syn_per_class = 30;
  int hidden_dim = 64;
  double lr = 1e-4;
  int epochs = 20;
  int batch_size = 64;

  void validate() const;
};

struct ResultRecord {
  std::optional<double> Z;   // percent
  std::optional<double> ZT;  // hours
  std::optional<double> U;
  std::optional<double> S;
  std::optional<double> H;
  std::optional<double> HT;
  std::map<Label, double> per_class_acc;  // ratios in [0,1]
  std::string config_hash;
  std::uint64_t seed = 0;

  void validate() const;
};

}  // namespace gasl
