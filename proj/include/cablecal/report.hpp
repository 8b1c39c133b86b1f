#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cablecal/calibrator.hpp"

namespace cablecal {

/// One experiment cell: a table row under one condition for one seed.
/// Metrics are stored in internal units (rad, rad, m).
struct MetricsRecord {
  std::string study;      // reference | baseline | removal | inaccurate | torque | homing
  std::string label;      // table row
  std::string condition;  // unloaded | loaded | dataset1 | dataset2
  std::uint64_t seed = 0;
  int segment = -1;       // homing test segment; -1 is the whole test set
  JointMetrics metrics;

  bool operator==(const MetricsRecord&) const = default;
};

/// "# cablecal-metrics v1" followed by a comma-separated table. Throws
/// Error(kIoError).
void write_metrics(const std::filesystem::path& path, const std::vector<MetricsRecord>& records);
/// Throws Error(kMissingDataset) if absent, Error(kSchemaMismatch) on a bad
/// header or row.
std::vector<MetricsRecord> read_metrics(const std::filesystem::path& path);

/// File name of one (study, row, condition, seed) cell. `order` keeps the
/// manifest order when files are listed alphabetically.
std::filesystem::path cell_path(const std::string& study, int order, const std::string& label,
                                const std::string& condition, std::uint64_t seed);

/// Every metrics file below `dir` in path order, skipping aggregate files.
std::vector<MetricsRecord> collect_results(const std::filesystem::path& dir);

struct AggregateRow {
  std::string study;
  std::string label;
  std::string condition;
  int segment = -1;
  int seeds = 0;
  JointMetrics mean;
  JointMetrics stdev;  // population standard deviation over seeds
};
/// Groups records by (study, label, condition, segment) in order of first
/// appearance.
std::vector<AggregateRow> aggregate(const std::vector<MetricsRecord>& records);
void write_aggregate(const std::filesystem::path& path, const std::vector<AggregateRow>& rows);

/// Bold rule of the ablation tables: relative increase strictly above 30%.
bool highlight(double value, double baseline);
/// Mean with four decimals, "mean ± sd" when sd exceeds 5% of the mean.
std::string format_cell(double mean, double sd, bool bold);

struct Report {
  bool empty = true;
  std::string markdown;  // Tables II-V analogs
  std::string figure_csv;  // per-segment homing series
};
Report render_report(const std::vector<MetricsRecord>& records);

}  // namespace cablecal
