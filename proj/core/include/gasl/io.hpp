#pragma once

#include <filesystem>
#include <string>

#include "gasl/types.hpp"

namespace gasl::io {

namespace fs = std::filesystem;

/// Writes `content` to `path` via a temporary file plus atomic rename.
void atomic_write(const fs::path& path, const std::string& content);

/// Raw little-endian float32 row-major matrix blobs.
void write_matrix_f32(const fs::path& path, const Mat& m);
Mat read_matrix_f32(const fs::path& path, long rows, long cols);

/// Full-precision variant used by checkpoints.
void write_matrix_f64(const fs::path& path, const Mat& m);
Mat read_matrix_f64(const fs::path& path, long rows, long cols);

/// Feature container: directory with manifest.json + features.f32.
void save_feature_set(const FeatureSet& fs_, const fs::path& dir);
FeatureSet load_feature_set(const fs::path& dir);

/// Semantic container: directory with manifest.json + table.f32.
void save_semantic_table(const SemanticTable& tab, const fs::path& dir);
SemanticTable load_semantic_table(const fs::path& dir);

std::string split_to_json(const SplitSpec& s);
SplitSpec split_from_json(const std::string& text);

std::string result_to_json(const ResultRecord& r);
ResultRecord result_from_json(const std::string& text);

std::string read_file(const fs::path& path);

}  // namespace gasl::io
