#pragma once

// Per-difficulty accuracy reports laid out like a results table: in-domain
// levels with their average, then OOD levels, then the overall average.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace kkrl {

struct LevelSplit {
  std::set<int> in_domain{3, 4, 5, 6, 7};
  std::set<int> ood{2, 8};
};

struct BucketCounts {
  std::size_t correct = 0;
  std::size_t total = 0;

  double accuracy() const { return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total); }
};

class EvalReport {
 public:
  EvalReport() = default;

  static EvalReport from_counts(const std::map<int, BucketCounts>& counts, const LevelSplit& split = {}) {
    std::map<int, double> acc;
    for (const auto& [level, c] : counts) acc[level] = c.accuracy();
    EvalReport r = from_accuracies(acc, split);
    r.counts_ = counts;
    return r;
  }

  /// Levels present in `accuracy` that are not OOD count as in-domain.
  static EvalReport from_accuracies(const std::map<int, double>& accuracy, const LevelSplit& split = {}) {
    EvalReport r;
    r.accuracy_ = accuracy;
    r.split_ = split;
    for (const auto& [level, a] : accuracy)
      if (!split.ood.contains(level)) r.split_.in_domain.insert(level);
    double in_sum = 0, all_sum = 0;
    std::size_t in_n = 0;
    for (const auto& [level, a] : accuracy) {
      all_sum += a;
      if (!split.ood.contains(level)) {
        in_sum += a;
        ++in_n;
      }
    }
    r.in_domain_avg_ = in_n ? in_sum / static_cast<double>(in_n) : 0.0;
    r.overall_avg_ = accuracy.empty() ? 0.0 : all_sum / static_cast<double>(accuracy.size());
    return r;
  }

  const std::map<int, double>& level_accuracy() const { return accuracy_; }
  const std::map<int, BucketCounts>& counts() const { return counts_; }
  const LevelSplit& split() const { return split_; }
  double in_domain_avg() const { return in_domain_avg_; }
  double overall_avg() const { return overall_avg_; }

  bool has_level(int level) const { return accuracy_.contains(level); }
  double accuracy(int level) const { return accuracy_.at(level); }

 private:
  std::map<int, double> accuracy_;
  std::map<int, BucketCounts> counts_;
  LevelSplit split_;
  double in_domain_avg_ = 0;
  double overall_avg_ = 0;
};

/// Half-up rounding to two decimals, formatted "0.65".
inline std::string format_2dp(double x) {
  const double r = std::floor(x * 100.0 + 0.5 + 1e-9) / 100.0;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", r == 0 ? 0.0 : r);
  return buf;
}

enum class ReportFormat { Text, Csv };

inline std::string render_report(const EvalReport& r, const std::string& label = "model",
                                 ReportFormat fmt = ReportFormat::Text) {
  std::vector<std::string> header{"Model"};
  std::vector<std::string> row{label};
  auto cell = [&](int level) { return r.has_level(level) ? format_2dp(r.accuracy(level)) : std::string("-"); };
  for (int level : r.split().in_domain) {
    header.push_back(std::to_string(level));
    row.push_back(cell(level));
  }
  header.push_back("Avg.");
  row.push_back(format_2dp(r.in_domain_avg()));
  for (int level : r.split().ood) {
    header.push_back(std::to_string(level) + " (OOD)");
    row.push_back(cell(level));
  }
  header.push_back("Avg.");
  row.push_back(format_2dp(r.overall_avg()));

  std::string out;
  if (fmt == ReportFormat::Csv) {
    // CSV needs distinct column names
    std::vector<std::string> names{"model"};
    for (int level : r.split().in_domain) names.push_back(std::to_string(level));
    names.push_back("in_domain_avg");
    for (int level : r.split().ood) names.push_back(std::to_string(level) + "_ood");
    names.push_back("overall_avg");
    for (std::size_t i = 0; i < names.size(); ++i) out += (i ? "," : "") + names[i];
    out += '\n';
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + row[i];
    out += '\n';
    return out;
  }
  std::vector<std::size_t> width(header.size());
  for (std::size_t i = 0; i < header.size(); ++i) width[i] = std::max(header[i].size(), row[i].size());
  auto line = [&](const std::vector<std::string>& cells) {
    std::string s;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i == 0) {
        s += cells[i] + std::string(width[i] - cells[i].size(), ' ');
      } else {
        s += "  " + std::string(width[i] - cells[i].size(), ' ') + cells[i];
      }
    }
    return s + '\n';
  };
  out += line(header);
  out += line(row);
  return out;
}

}  // namespace kkrl
