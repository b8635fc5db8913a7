#include "gasl/types.hpp"

#include <algorithm>
#include <set>
#include <unordered_set>

namespace gasl {

bool task_is_generalized(Task t) {
  return t == Task::gzsl || t == Task::gufsl || t == Task::gsfsl;
}

bool task_is_few_shot(Task t) {
  return t == Task::ufsl || t == Task::gufsl || t == Task::sfsl ||
         t == Task::gsfsl;
}

bool task_targets_unseen_shots(Task t) {
  return t == Task::ufsl || t == Task::gufsl;
}

std::string to_string(Task t) {
  switch (t) {
    case Task::zsl: return "ZSL";
    case Task::gzsl: return "GZSL";
    case Task::ufsl: return "UFSL";
    case Task::gufsl: return "GUFSL";
    case Task::sfsl: return "SFSL";
    case Task::gsfsl: return "GSFSL";
  }
  return "?";
}

Task task_from_string(const std::string& s) {
  if (s == "ZSL") return Task::zsl;
  if (s == "GZSL") return Task::gzsl;
  if (s == "UFSL") return Task::ufsl;
  if (s == "GUFSL") return Task::gufsl;
  if (s == "SFSL") return Task::sfsl;
  if (s == "GSFSL") return Task::gsfsl;
  throw InvalidTask("unknown task: " + s);
}

std::string to_string(VisualProvenance p) {
  switch (p) {
    case VisualProvenance::original: return "original";
    case VisualProvenance::naive: return "naive";
    case VisualProvenance::finetuned: return "finetuned";
    case VisualProvenance::regularized: return "regularized";
    case VisualProvenance::synthetic: return "synthetic";
  }
  return "?";
}

VisualProvenance visual_provenance_from_string(const std::string& s) {
  if (s == "original") return VisualProvenance::original;
  if (s == "naive") return VisualProvenance::naive;
  if (s == "finetuned") return VisualProvenance::finetuned;
  if (s == "regularized") return VisualProvenance::regularized;
  if (s == "synthetic") return VisualProvenance::synthetic;
  throw ConfigError("unknown visual provenance: " + s);
}

std::string to_string(SemanticProvenance p) {
  switch (p) {
    case SemanticProvenance::original: return "original";
    case SemanticProvenance::naive: return "naive";
    case SemanticProvenance::gru: return "gru";
    case SemanticProvenance::imb_gru: return "imb_gru";
    case SemanticProvenance::attributes: return "attributes";
  }
  return "?";
}

SemanticProvenance semantic_provenance_from_string(const std::string& s) {
  if (s == "original") return SemanticProvenance::original;
  if (s == "naive") return SemanticProvenance::naive;
  if (s == "gru") return SemanticProvenance::gru;
  if (s == "imb_gru") return SemanticProvenance::imb_gru;
  if (s == "attributes") return SemanticProvenance::attributes;
  throw ConfigError("unknown semantic provenance: " + s);
}

DatasetMeta::DatasetMeta(std::string id, int p, int q, int d_a, long total,
                         long seen, long unseen, std::map<Label, long> counts)
    : dataset_id(std::move(id)),
      seen_classes(p),
      unseen_classes(q),
      semantic_dim(d_a),
      n_total(total),
      n_seen(seen),
      n_unseen(unseen),
      per_class_counts(std::move(counts)) {
  if (seen_classes <= 0 || unseen_classes <= 0)
    throw ConfigError("DatasetMeta: p and q must be positive");
  if (n_seen + n_unseen != n_total)
    throw ConfigError("DatasetMeta: n_seen + n_unseen != n_total");
  for (const auto& [y, c] : per_class_counts) {
    if (y < 1 || y > total_classes())
      throw ConfigError("DatasetMeta: class id out of range");
    if (c < 0) throw ConfigError("DatasetMeta: negative class count");
  }
}

FeatureSet::FeatureSet(Mat features, std::vector<Label> labels,
                       VisualProvenance prov, std::string dataset,
                       int max_label)
    : X(std::move(features)),
      y(std::move(labels)),
      provenance(prov),
      dataset_id(std::move(dataset)) {
  if (static_cast<long>(y.size()) != X.rows())
    throw ShapeError("FeatureSet: rows(X) != len(y)");
  if (!X.allFinite()) throw DomainError("FeatureSet: non-finite entries");
  for (Label l : y) {
    if (l < 1 || (max_label > 0 && l > max_label))
      throw ConfigError("FeatureSet: label outside class set");
  }
}

SemanticTable::SemanticTable(Mat table, SemanticProvenance prov,
                             std::string dataset)
    : A(std::move(table)), provenance(prov), dataset_id(std::move(dataset)) {
  if (A.rows() == 0) throw DegenerateInput("SemanticTable: empty table");
  if (!A.allFinite()) throw DomainError("SemanticTable: non-finite entries");
  // Reject degenerate tables with duplicated class rows.
  for (int i = 0; i < A.rows(); ++i)
    for (int j = i + 1; j < A.rows(); ++j)
      if (A.row(i) == A.row(j))
        throw DegenerateInput("SemanticTable: identical rows " +
                              std::to_string(i + 1) + " and " +
                              std::to_string(j + 1));
}

Vec SemanticTable::row(Label y) const {
  if (y < 1 || y > classes())
    throw MissingDescription("no semantic row for class " + std::to_string(y));
  return A.row(y - 1).transpose();
}

SplitSpec::SplitSpec(Task t, std::optional<int> n, std::uint64_t s,
                     IndexList tr_s, IndexList tr_u, IndexList te_s,
                     IndexList te_u)
    : task(t),
      shots(n),
      seed(s),
      train_seen(std::move(tr_s)),
      train_unseen(std::move(tr_u)),
      test_seen(std::move(te_s)),
      test_unseen(std::move(te_u)) {
  if (task_is_few_shot(task) != shots.has_value())
    throw ConfigError("SplitSpec: shots present iff few-shot task");
  std::unordered_set<long> all;
  for (const IndexList* lst :
       {&train_seen, &train_unseen, &test_seen, &test_unseen}) {
    for (long i : *lst) {
      if (!all.insert(i).second)
        throw ConfigError("SplitSpec: index lists not pairwise disjoint");
    }
  }
  const bool gen = task_is_generalized(task);
  if (!gen && !test_seen.empty())
    throw ConfigError("SplitSpec: non-generalized task with test_seen");
  if (!task_targets_unseen_shots(task) && !train_unseen.empty())
    throw ConfigError("SplitSpec: train_unseen only valid for UFSL/GUFSL");
}

void HyperParams::validate() const {
  if (beta < 0 || delta < 0 || gamma < 0 || xi < 0 || lambda_gp < 0)
    throw ConfigError("HyperParams: loss weights must be >= 0");
  if (sr_margin <= 0) throw ConfigError("HyperParams: epsilon must be > 0");
  if (samc_eta < 0 || samc_eta > 1)
    throw ConfigError("HyperParams: eta must be in [0,1]");
  if (soul_clusters < 1) throw ConfigError("HyperParams: K must be >= 1");
  if (syn_per_class < 1)
    throw ConfigError("HyperParams: syn_per_class must be >= 1");
  if (latent_dim < 1 || noise_dim < 1 || hidden_dim < 1)
    throw ConfigError("HyperParams: dims must be positive");
  if (lr <= 0 || epochs < 1 || batch_size < 1)
    throw ConfigError("HyperParams: bad schedule");
}

void ResultRecord::validate() const {
  auto in_range = [](const std::optional<double>& v) {
    return !v || (*v >= 0.0 && *v <= 100.0);
  };
  if (!in_range(Z) || !in_range(U) || !in_range(S) || !in_range(H))
    throw DomainError("ResultRecord: accuracy outside [0,100]");
  if (U && S && H) {
    const double u = *U, s = *S;
    const double expect = (u + s > 0) ? 2.0 * s * u / (s + u) : 0.0;
    if ((u == 0.0 || s == 0.0) && *H != 0.0)
      throw DomainError("ResultRecord: H must be 0 when U or S is 0");
    if (std::abs(expect - *H) > 0.05 + 1e-9)
      throw DomainError("ResultRecord: H inconsistent with U, S");
  }
  for (const auto& [y, r] : per_class_acc)
    if (r < 0.0 || r > 1.0)
      throw DomainError("ResultRecord: per-class ratio outside [0,1]");
}

}  // namespace gasl
