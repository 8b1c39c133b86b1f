#include "cablecal/report.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "cablecal/ablation.hpp"
#include "cablecal/error.hpp"

namespace cablecal {

namespace {

constexpr const char* kMetricsHeader = "# cablecal-metrics v1";
constexpr const char* kMetricsColumns =
    "study,label,condition,seed,segment,rmse_q1,rmse_q2,rmse_q3,peak_q1,peak_q2,peak_q3";
constexpr const char* kAggregateHeader = "# cablecal-aggregate v1";

std::string number(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string quoted(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields(1);
  bool in_quotes = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (in_quotes) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        in_quotes = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      in_quotes = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back() += c;
    }
  }
  return fields;
}

template <class T>
T parse_field(const std::string& s, const std::filesystem::path& path, std::size_t line) {
  T v{};
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) {
    throw Error(ErrorCategory::kSchemaMismatch,
                path.string() + ":" + std::to_string(line) + ": bad number '" + s + "'");
  }
  return v;
}

std::string slug(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!out.empty() && out.back() != '-') {
      out += '-';
    }
  }
  while (!out.empty() && out.back() == '-') out.pop_back();
  return out.empty() ? "row" : out;
}

// One markdown table with a block of six metric columns per condition.
class Table {
 public:
  Table(std::string title, std::string first_column, std::vector<std::pair<std::string, std::string>> conditions)
      : title_(std::move(title)), first_(std::move(first_column)), conditions_(std::move(conditions)) {}

  void add(const std::string& label, const std::vector<const AggregateRow*>& cells,
           const std::vector<const AggregateRow*>& baselines) {
    std::string line = "| " + label + " |";
    bool any = false;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const AggregateRow* r = cells[c];
      const AggregateRow* b = baselines.empty() ? nullptr : baselines[c];
      for (int metric = 0; metric < 2; ++metric) {
        for (int j = 0; j < 3; ++j) {
          if (!r) {
            line += " - |";
            continue;
          }
          any = true;
          const Vec3 mean = to_report_units(metric == 0 ? r->mean.rmse : r->mean.peak);
          const Vec3 sd = to_report_units(metric == 0 ? r->stdev.rmse : r->stdev.peak);
          bool bold = false;
          if (b && b != r) {
            const Vec3 base = to_report_units(metric == 0 ? b->mean.rmse : b->mean.peak);
            bold = highlight(mean[j], base[j]);
          }
          line += " " + format_cell(mean[j], sd[j], bold) + " |";
        }
      }
    }
    if (any) rows_.push_back(line);
  }

  bool empty() const { return rows_.empty(); }

  std::string render() const {
    std::ostringstream out;
    out << "## " << title_ << "\n\n| " << first_ << " |";
    std::string rule = "|---|";
    for (const auto& [name, _] : conditions_) {
      const std::string p = name.empty() ? "" : name + " ";
      out << " " << p << "RMSE J1 (deg) | " << p << "RMSE J2 (deg) | " << p << "RMSE J3 (mm) | " << p
          << "Peak J1 (deg) | " << p << "Peak J2 (deg) | " << p << "Peak J3 (mm) |";
      rule += "---:|---:|---:|---:|---:|---:|";
    }
    out << "\n" << rule << "\n";
    for (const auto& r : rows_) out << r << "\n";
    out << "\n";
    return out.str();
  }

  const std::vector<std::pair<std::string, std::string>>& conditions() const { return conditions_; }

 private:
  std::string title_;
  std::string first_;
  std::vector<std::pair<std::string, std::string>> conditions_;  // (heading, condition key)
  std::vector<std::string> rows_;
};

class Index {
 public:
  explicit Index(const std::vector<AggregateRow>& rows) : rows_(rows) {}

  const AggregateRow* find(const std::string& study, const std::string& label, const std::string& condition,
                           int segment = -1) const {
    for (const auto& r : rows_) {
      if (r.study == study && r.label == label && r.condition == condition && r.segment == segment) return &r;
    }
    return nullptr;
  }
  // Labels of a study in order of first appearance.
  std::vector<std::string> labels(const std::string& study) const {
    std::vector<std::string> out;
    for (const auto& r : rows_) {
      if (r.study == study && std::find(out.begin(), out.end(), r.label) == out.end()) out.push_back(r.label);
    }
    return out;
  }

 private:
  const std::vector<AggregateRow>& rows_;
};

void add_row(Table& table, const Index& index, const std::string& shown, const std::string& study,
             const std::string& label, const std::pair<std::string, std::string>* baseline) {
  std::vector<const AggregateRow*> cells, bases;
  for (const auto& [_, condition] : table.conditions()) {
    cells.push_back(index.find(study, label, condition));
    if (baseline) bases.push_back(index.find(baseline->first, baseline->second, condition));
  }
  table.add(shown, cells, bases);
}

}  // namespace

void write_metrics(const std::filesystem::path& path, const std::vector<MetricsRecord>& records) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCategory::kIoError, "cannot write " + path.string());
  out << kMetricsHeader << "\n" << kMetricsColumns << "\n";
  for (const auto& r : records) {
    out << quoted(r.study) << ',' << quoted(r.label) << ',' << quoted(r.condition) << ',' << r.seed << ','
        << r.segment;
    for (const Vec3* v : {&r.metrics.rmse, &r.metrics.peak}) {
      for (int j = 0; j < 3; ++j) out << ',' << number((*v)[j]);
    }
    out << "\n";
  }
  if (!out) throw Error(ErrorCategory::kIoError, "write failed: " + path.string());
}

std::vector<MetricsRecord> read_metrics(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCategory::kMissingDataset, "no metrics file " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader || !std::getline(in, line) || line != kMetricsColumns) {
    throw Error(ErrorCategory::kSchemaMismatch, path.string() + ": not a cablecal-metrics v1 file");
  }
  std::vector<MetricsRecord> records;
  std::size_t line_no = 2;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 11) {
      throw Error(ErrorCategory::kSchemaMismatch,
                  path.string() + ":" + std::to_string(line_no) + ": expected 11 columns, got " +
                      std::to_string(f.size()));
    }
    MetricsRecord r;
    r.study = f[0];
    r.label = f[1];
    r.condition = f[2];
    r.seed = parse_field<std::uint64_t>(f[3], path, line_no);
    r.segment = parse_field<int>(f[4], path, line_no);
    for (int j = 0; j < 3; ++j) {
      r.metrics.rmse[j] = parse_field<double>(f[5 + j], path, line_no);
      r.metrics.peak[j] = parse_field<double>(f[8 + j], path, line_no);
    }
    records.push_back(std::move(r));
  }
  return records;
}

std::filesystem::path cell_path(const std::string& study, int order, const std::string& label,
                                const std::string& condition, std::uint64_t seed) {
  char prefix[16];
  std::snprintf(prefix, sizeof prefix, "%02d", order);
  return std::filesystem::path(study) /
         (std::string(prefix) + "_" + slug(label) + "_" + condition + "_seed" + std::to_string(seed) + ".csv");
}

std::vector<MetricsRecord> collect_results(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  std::error_code ec;
  if (std::filesystem::is_directory(dir, ec)) {
    for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
      if (!e.is_regular_file() || e.path().extension() != ".csv") continue;
      std::ifstream in(e.path());
      std::string first;
      std::getline(in, first);
      if (first == kMetricsHeader) files.push_back(e.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<MetricsRecord> all;
  for (const auto& f : files) {
    auto r = read_metrics(f);
    all.insert(all.end(), r.begin(), r.end());
  }
  return all;
}

std::vector<AggregateRow> aggregate(const std::vector<MetricsRecord>& records) {
  std::vector<AggregateRow> rows;
  std::vector<std::vector<JointMetrics>> groups;
  std::vector<std::vector<std::uint64_t>> seeds;
  for (const auto& r : records) {
    std::size_t i = 0;
    while (i < rows.size() && !(rows[i].study == r.study && rows[i].label == r.label &&
                                rows[i].condition == r.condition && rows[i].segment == r.segment)) {
      ++i;
    }
    if (i == rows.size()) {
      AggregateRow row;
      row.study = r.study;
      row.label = r.label;
      row.condition = r.condition;
      row.segment = r.segment;
      rows.push_back(row);
      groups.emplace_back();
      seeds.emplace_back();
    }
    groups[i].push_back(r.metrics);
    seeds[i].push_back(r.seed);
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const RunResult agg = RunResult::aggregate(rows[i].label, seeds[i], groups[i]);
    rows[i].seeds = static_cast<int>(groups[i].size());
    rows[i].mean = agg.mean;
    rows[i].stdev = agg.stdev;
  }
  return rows;
}

void write_aggregate(const std::filesystem::path& path, const std::vector<AggregateRow>& rows) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCategory::kIoError, "cannot write " + path.string());
  out << kAggregateHeader << "\n"
      << "study,label,condition,segment,seeds,rmse_q1,rmse_q2,rmse_q3,peak_q1,peak_q2,peak_q3,"
         "sd_rmse_q1,sd_rmse_q2,sd_rmse_q3,sd_peak_q1,sd_peak_q2,sd_peak_q3\n";
  for (const auto& r : rows) {
    out << quoted(r.study) << ',' << quoted(r.label) << ',' << quoted(r.condition) << ',' << r.segment << ','
        << r.seeds;
    for (const Vec3* v : {&r.mean.rmse, &r.mean.peak, &r.stdev.rmse, &r.stdev.peak}) {
      for (int j = 0; j < 3; ++j) out << ',' << number((*v)[j]);
    }
    out << "\n";
  }
  if (!out) throw Error(ErrorCategory::kIoError, "write failed: " + path.string());
}

bool highlight(double value, double baseline) {
  return baseline > 0.0 && value > 1.3 * baseline;
}

std::string format_cell(double mean, double sd, bool bold) {
  char buf[64];
  if (sd > 0.05 * std::abs(mean)) {
    std::snprintf(buf, sizeof buf, "%.4f ± %.4f", mean, sd);
  } else {
    std::snprintf(buf, sizeof buf, "%.4f", mean);
  }
  return bold ? "**" + std::string(buf) + "**" : std::string(buf);
}

Report render_report(const std::vector<MetricsRecord>& records) {
  Report report;
  if (records.empty()) {
    report.markdown = "nothing to report\n";
    return report;
  }
  report.empty = false;
  const auto rows = aggregate(records);
  const Index index(rows);
  const std::vector<std::pair<std::string, std::string>> loads{{"Unloaded", "unloaded"}, {"Loaded", "loaded"}};
  const std::pair<std::string, std::string> all_features{"baseline", "All Features"};

  std::ostringstream md;
  md << "# Calibration results\n\n"
     << "Means over seeds; \"± sd\" is shown where the seed spread exceeds 5% of the mean. "
     << "Bold marks an increase of more than 30% over All Features.\n\n";

  Table removal("Removal of features", "Features", loads);
  add_row(removal, index, "Before Calibration", "reference", "Before Calibration", nullptr);
  add_row(removal, index, "Bias Removal", "reference", "Bias Removal", nullptr);
  add_row(removal, index, "All Features", "baseline", "All Features", nullptr);
  for (const auto& l : index.labels("removal")) add_row(removal, index, l, "removal", l, &all_features);
  if (!index.labels("removal").empty()) md << removal.render();

  Table inaccurate("Inaccurate features", "Inaccurate features", loads);
  add_row(inaccurate, index, "Before Calibration", "reference", "Before Calibration", nullptr);
  add_row(inaccurate, index, "All Features", "baseline", "All Features", nullptr);
  for (const auto& l : index.labels("inaccurate")) add_row(inaccurate, index, l, "inaccurate", l, &all_features);
  if (!index.labels("inaccurate").empty()) md << inaccurate.render();

  Table torque("Modified torque features", "Torque features", loads);
  add_row(torque, index, "Unmodified", "baseline", "All Features", nullptr);
  for (const auto& l : index.labels("torque")) add_row(torque, index, l, "torque", l, &all_features);
  if (!index.labels("torque").empty()) md << torque.render();

  const auto homing_labels = index.labels("homing");
  if (!homing_labels.empty()) {
    Table homing("Homing inconsistency", "Features", {{"", "dataset1"}});
    for (const std::string ds : {"dataset1", "dataset2"}) {
      const std::string name = ds == "dataset1" ? "Dataset 1 (no homing in training)" : "Dataset 2 (homing in training)";
      const AggregateRow* base = index.find("homing", "All features", ds);
      for (const auto& l : homing_labels) {
        const AggregateRow* r = index.find("homing", l, ds);
        if (!r) continue;
        homing.add(name + ": " + l, {r}, {base});
      }
    }
    md << homing.render();

    std::ostringstream fig;
    fig << "# cablecal-figure v1\ncondition,label,segment,homings,seeds,rmse_q1_deg,rmse_q2_deg,rmse_q3_mm\n";
    for (const auto& r : rows) {
      if (r.study != "homing" || r.segment < 0) continue;
      const Vec3 u = to_report_units(r.mean.rmse);
      char buf[160];
      std::snprintf(buf, sizeof buf, ",%d,%d,%d,%.6f,%.6f,%.6f\n", r.segment, r.segment, r.seeds, u[0], u[1], u[2]);
      fig << quoted(r.condition) << ',' << quoted(r.label) << buf;
    }
    report.figure_csv = fig.str();
  }
  report.markdown = md.str();
  return report;
}

}  // namespace cablecal
