#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "gasl/harness.hpp"
#include "gasl/io.hpp"

namespace gasl::hrn {

namespace {

std::string fmt1(const std::optional<double>& v) {
  if (!v) return "";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", *v);
  return buf;
}

std::string fmt_hours(const std::optional<double>& v) {
  if (!v) return "";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", *v);
  return buf;
}

std::string task_label(const ExperimentConfig& cfg) {
  std::string s = to_string(cfg.task);
  if (cfg.shots) s += "-" + std::to_string(*cfg.shots);
  return s;
}

std::string pad(const std::string& s, std::size_t w) {
  return s + std::string(s.size() < w ? w - s.size() : 0, ' ');
}

}  // namespace

void emit_report(const std::vector<ExperimentRecord>& records,
                 const fs::path& out_dir, std::vector<std::string>* warnings) {
  if (records.empty()) throw EmptyReport("no experiment records to report");
  fs::create_directories(out_dir);
  std::vector<std::string> warn;

  // Consistency: recomputed harmonic mean must match the stored one.
  for (const auto& rec : records) {
    const ResultRecord& r = rec.result;
    if (r.U && r.S && r.H) {
      double recomputed = cls::harmonic_mean(*r.U, *r.S);
      if (std::abs(recomputed - *r.H) > 0.05)
        warn.push_back("harmonic-mean mismatch for " +
                       rec.cfg.dataset_id + "/" + to_string(rec.cfg.model) +
                       ": stored " + fmt1(r.H) + " vs recomputed " +
                       fmt1(recomputed));
    }
  }

  // CSV
  {
    std::ostringstream csv;
    csv << "dataset,model,task,shots,provenance_x,provenance_a,Z,ZT,U,S,H,HT,"
           "seed\n";
    for (const auto& rec : records) {
      const ExperimentConfig& c = rec.cfg;
      const ResultRecord& r = rec.result;
      csv << c.dataset_id << ',' << to_string(c.model) << ','
          << to_string(c.task) << ',' << (c.shots ? std::to_string(*c.shots) : "")
          << ',' << to_string(c.visual_provenance) << ','
          << to_string(c.semantic_provenance) << ',' << fmt1(r.Z) << ','
          << fmt_hours(r.ZT) << ',' << fmt1(r.U) << ',' << fmt1(r.S) << ','
          << fmt1(r.H) << ',' << fmt_hours(r.HT) << ',' << r.seed << '\n';
    }
    io::atomic_write(out_dir / "report.csv", csv.str());
  }

  // Best cells per dataset, for highlighting in the text table.
  std::map<std::string, double> best_z, best_h;
  for (const auto& rec : records) {
    if (rec.result.Z) {
      auto& b = best_z[rec.cfg.dataset_id];
      b = std::max(b, *rec.result.Z);
    }
    if (rec.result.H) {
      auto& b = best_h[rec.cfg.dataset_id];
      b = std::max(b, *rec.result.H);
    }
  }

  // Aligned text table.
  {
    std::vector<std::vector<std::string>> rows;
    rows.push_back({"dataset", "model", "task", "Z", "ZT", "U", "S", "H", "HT"});
    for (const auto& rec : records) {
      const ResultRecord& r = rec.result;
      std::string z = fmt1(r.Z), h = fmt1(r.H);
      if (r.Z && *r.Z == best_z[rec.cfg.dataset_id]) z += "*";
      if (r.H && *r.H == best_h[rec.cfg.dataset_id]) h += "*";
      rows.push_back({rec.cfg.dataset_id, to_string(rec.cfg.model),
                      task_label(rec.cfg), z, fmt_hours(r.ZT), fmt1(r.U),
                      fmt1(r.S), h, fmt_hours(r.HT)});
    }
    std::vector<std::size_t> widths(rows[0].size(), 0);
    for (const auto& row : rows)
      for (std::size_t k = 0; k < row.size(); ++k)
        widths[k] = std::max(widths[k], row[k].size());
    std::ostringstream txt;
    for (const auto& row : rows) {
      for (std::size_t k = 0; k < row.size(); ++k)
        txt << pad(row[k], widths[k] + 2);
      txt << '\n';
    }
    if (!warn.empty()) {
      txt << '\n';
      for (const auto& w : warn) txt << "WARNING: " << w << '\n';
    }
    io::atomic_write(out_dir / "report.txt", txt.str());
  }

  // Average model rank across (dataset, task) cells. Primary metric is H for
  // generalized scopes, Z otherwise; ties share the better rank.
  {
    std::map<std::string, std::vector<std::pair<std::string, double>>> cells;
    for (const auto& rec : records) {
      const ResultRecord& r = rec.result;
      std::optional<double> metric = r.H ? r.H : r.Z;
      if (!metric) continue;
      cells[rec.cfg.dataset_id + "/" + task_label(rec.cfg)].emplace_back(
          to_string(rec.cfg.model), *metric);
    }
    std::map<std::string, std::pair<double, int>> acc;  // model -> (sum, n)
    for (const auto& [cell, entries] : cells) {
      for (const auto& [model, value] : entries) {
        int better = 0;
        for (const auto& [other, v2] : entries)
          if (v2 > value) ++better;
        auto& [sum, count] = acc[model];
        sum += better + 1;
        ++count;
      }
    }
    std::vector<std::pair<double, std::string>> ranked;
    for (const auto& [model, sc] : acc)
      ranked.emplace_back(sc.first / sc.second, model);
    std::sort(ranked.begin(), ranked.end());
    std::ostringstream txt;
    txt << pad("model", 14) << "avg_rank\n";
    for (const auto& [rank, model] : ranked) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.2f", rank);
      txt << pad(model, 14) << buf << '\n';
    }
    io::atomic_write(out_dir / "ranks.txt", txt.str());
  }

  if (warnings) *warnings = std::move(warn);
}

}  // namespace gasl::hrn
