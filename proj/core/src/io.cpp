#include "gasl/io.hpp"

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <sstream>

#include "gasl/rng.hpp"

namespace gasl::io {

using nlohmann::json;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void atomic_write(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << content;
  }
  fs::rename(tmp, path);
}

void write_matrix_f32(const fs::path& path, const Mat& m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  for (long i = 0; i < m.rows(); ++i)
    for (long j = 0; j < m.cols(); ++j) {
      float v = static_cast<float>(m(i, j));
      out.write(reinterpret_cast<const char*>(&v), sizeof(v));
    }
}

Mat read_matrix_f32(const fs::path& path, long rows, long cols) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError("cannot open " + path.string());
  Mat m(rows, cols);
  for (long i = 0; i < rows; ++i)
    for (long j = 0; j < cols; ++j) {
      float v = 0;
      in.read(reinterpret_cast<char*>(&v), sizeof(v));
      if (!in) throw IngestError("matrix blob truncated: " + path.string());
      m(i, j) = v;
    }
  return m;
}

void write_matrix_f64(const fs::path& path, const Mat& m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  for (long i = 0; i < m.rows(); ++i)
    for (long j = 0; j < m.cols(); ++j) {
      double v = m(i, j);
      out.write(reinterpret_cast<const char*>(&v), sizeof(v));
    }
}

Mat read_matrix_f64(const fs::path& path, long rows, long cols) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError("cannot open " + path.string());
  Mat m(rows, cols);
  for (long i = 0; i < rows; ++i)
    for (long j = 0; j < cols; ++j) {
      double v = 0;
      in.read(reinterpret_cast<char*>(&v), sizeof(v));
      if (!in) throw IngestError("matrix blob truncated: " + path.string());
      m(i, j) = v;
    }
  return m;
}

static std::string blob_checksum(const fs::path& path) {
  std::string bytes = read_file(path);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes)));
  return buf;
}

void save_feature_set(const FeatureSet& f, const fs::path& dir) {
  fs::create_directories(dir);
  write_matrix_f32(dir / "features.f32", f.X);
  json j;
  j["dataset_id"] = f.dataset_id;
  j["n"] = f.size();
  j["d_x"] = f.dim();
  j["provenance"] = to_string(f.provenance);
  j["labels"] = f.y;
  j["checksum"] = blob_checksum(dir / "features.f32");
  atomic_write(dir / "manifest.json", j.dump(2));
}

FeatureSet load_feature_set(const fs::path& dir) {
  json j = json::parse(read_file(dir / "manifest.json"));
  for (const char* field : {"dataset_id", "n", "d_x", "provenance", "labels"})
    if (!j.contains(field))
      throw IngestError(std::string("feature manifest missing field: ") + field);
  long n = j["n"];
  long d = j["d_x"];
  Mat X = read_matrix_f32(dir / "features.f32", n, d);
  if (j.contains("checksum") &&
      j["checksum"] != blob_checksum(dir / "features.f32"))
    throw IngestError("feature blob checksum mismatch in " + dir.string());
  return FeatureSet(std::move(X), j["labels"].get<std::vector<Label>>(),
                    visual_provenance_from_string(j["provenance"]),
                    j["dataset_id"]);
}

void save_semantic_table(const SemanticTable& tab, const fs::path& dir) {
  fs::create_directories(dir);
  write_matrix_f32(dir / "table.f32", tab.A);
  json j;
  j["dataset_id"] = tab.dataset_id;
  j["classes"] = tab.classes();
  j["d_a"] = tab.dim();
  j["provenance"] = to_string(tab.provenance);
  j["checksum"] = blob_checksum(dir / "table.f32");
  atomic_write(dir / "manifest.json", j.dump(2));
}

SemanticTable load_semantic_table(const fs::path& dir) {
  json j = json::parse(read_file(dir / "manifest.json"));
  for (const char* field : {"dataset_id", "classes", "d_a", "provenance"})
    if (!j.contains(field))
      throw IngestError(std::string("semantic manifest missing field: ") + field);
  Mat A = read_matrix_f32(dir / "table.f32", j["classes"], j["d_a"]);
  return SemanticTable(std::move(A),
                       semantic_provenance_from_string(j["provenance"]),
                       j["dataset_id"]);
}

std::string split_to_json(const SplitSpec& s) {
  json j;
  j["task"] = to_string(s.task);
  if (s.shots) j["shots"] = *s.shots;
  j["seed"] = s.seed;
  j["train_seen"] = s.train_seen;
  j["train_unseen"] = s.train_unseen;
  j["test_seen"] = s.test_seen;
  j["test_unseen"] = s.test_unseen;
  return j.dump(2);
}

SplitSpec split_from_json(const std::string& text) {
  json j = json::parse(text);
  std::optional<int> shots;
  if (j.contains("shots")) shots = j["shots"].get<int>();
  return SplitSpec(task_from_string(j["task"]), shots,
                   j["seed"].get<std::uint64_t>(),
                   j["train_seen"].get<IndexList>(),
                   j["train_unseen"].get<IndexList>(),
                   j["test_seen"].get<IndexList>(),
                   j["test_unseen"].get<IndexList>());
}

std::string result_to_json(const ResultRecord& r) {
  json j;
  auto put = [&](const char* k, const std::optional<double>& v) {
    if (v) j[k] = *v;
  };
  put("Z", r.Z);
  put("ZT", r.ZT);
  put("U", r.U);
  put("S", r.S);
  put("H", r.H);
  put("HT", r.HT);
  json pc = json::object();
  for (const auto& [y, acc] : r.per_class_acc) pc[std::to_string(y)] = acc;
  j["per_class_acc"] = pc;
  j["config_hash"] = r.config_hash;
  j["seed"] = r.seed;
  return j.dump(2);
}

ResultRecord result_from_json(const std::string& text) {
  json j = json::parse(text);
  ResultRecord r;
  auto get = [&](const char* k) -> std::optional<double> {
    if (j.contains(k)) return j[k].get<double>();
    return std::nullopt;
  };
  r.Z = get("Z");
  r.ZT = get("ZT");
  r.U = get("U");
  r.S = get("S");
  r.H = get("H");
  r.HT = get("HT");
  for (const auto& [k, v] : j["per_class_acc"].items())
    r.per_class_acc[std::stoi(k)] = v.get<double>();
  r.config_hash = j["config_hash"];
  r.seed = j["seed"].get<std::uint64_t>();
  r.validate();
  return r;
}

}  // namespace gasl::io
