#include "cablecal/pipeline.hpp"

#include <fstream>
#include <memory>

#include "cablecal/ablation.hpp"
#include "cablecal/error.hpp"

namespace cablecal {

namespace {

void make_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw Error(ErrorCategory::kIoError, "cannot create directory " + dir.string() +
                                             (ec ? ": " + ec.message() : std::string()));
  }
}

Dataset load_required(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCategory::kMissingDataset, "missing dataset " + path.string() + " (run gen-data first)");
  }
  return read_dataset(path);
}

// Fans the derived network seeds back to the listed seed numbers for file
// names and records.
struct SeedMap {
  std::vector<std::uint64_t> listed;
  std::vector<std::uint64_t> derived;
};

SeedMap seed_map(const WorkbenchConfig& config) {
  return {config.calibrator.seeds, config.effective_calibrator().seeds};
}

class ResultWriter {
 public:
  explicit ResultWriter(const OutputLayout& layout) : layout_(layout) {}

  void write(const std::string& study, int order, const std::string& file_label, const std::string& label,
             const std::string& condition, std::uint64_t seed, const JointMetrics& metrics, int segment = -1) {
    write(study, order, file_label, condition, seed, {{study, label, condition, seed, segment, metrics}});
  }
  void write(const std::string& study, int order, const std::string& file_label, const std::string& condition,
             std::uint64_t seed, const std::vector<MetricsRecord>& records) {
    const auto path = layout_.results_dir() / cell_path(study, order, file_label, condition, seed);
    write_metrics(path, records);
    written_.push_back(path);
  }
  void write_run(const std::string& study, int order, const std::string& file_label, const std::string& label,
                 const std::string& condition, const SeedMap& seeds, const RunResult& run) {
    for (std::size_t k = 0; k < run.per_seed.size(); ++k) {
      write(study, order, file_label, label, condition, seeds.listed[k], run.per_seed[k]);
    }
  }
  std::vector<std::filesystem::path> finish() {
    write_aggregate(layout_.aggregate(), aggregate(collect_results(layout_.results_dir())));
    written_.push_back(layout_.aggregate());
    return written_;
  }

 private:
  const OutputLayout& layout_;
  std::vector<std::filesystem::path> written_;
};

void write_history(const std::filesystem::path& path, const TrainResult& history) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCategory::kIoError, "cannot write " + path.string());
  out << "# cablecal-history v1\nepoch,loss\n";
  char buf[64];
  for (std::size_t e = 0; e < history.loss_history.size(); ++e) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", e + 1, history.loss_history[e]);
    out << buf;
  }
}

std::string torque_label(TorqueOp op) {
  switch (op) {
    case TorqueOp::kNoise:
      return "± STDV";
    case TorqueOp::kNegate:
      return "× -1";
    case TorqueOp::kTriple:
      return "× 3";
    case TorqueOp::kNone:
      break;
  }
  return "Unmodified";
}

}  // namespace

std::filesystem::path OutputLayout::train_set(bool loaded) const {
  return data_dir() / ("train_" + condition_name(loaded) + ".dataset");
}
std::filesystem::path OutputLayout::test_set(bool loaded) const {
  return data_dir() / ("test_" + condition_name(loaded) + ".dataset");
}
std::filesystem::path OutputLayout::homing_train_set(int dataset) const {
  return data_dir() / ("homing" + std::to_string(dataset) + "_train.dataset");
}
std::filesystem::path OutputLayout::homing_test_set(int dataset) const {
  return data_dir() / ("homing" + std::to_string(dataset) + "_test.dataset");
}
std::filesystem::path OutputLayout::model(bool loaded, std::uint64_t seed) const {
  return model_dir() / ("all-features_" + condition_name(loaded) + "_seed" + std::to_string(seed) + ".ccal");
}
std::filesystem::path OutputLayout::history(bool loaded, std::uint64_t seed) const {
  return model_dir() / ("all-features_" + condition_name(loaded) + "_seed" + std::to_string(seed) + ".history.csv");
}

std::string condition_name(bool loaded) { return loaded ? "loaded" : "unloaded"; }

std::vector<std::filesystem::path> cmd_gen_data(const WorkbenchConfig& config, bool homing) {
  config.validate();
  const OutputLayout layout(config.output_dir);
  make_dir(layout.data_dir());
  std::vector<std::filesystem::path> written;
  for (bool loaded : {false, true}) {
    const Session s = generate_session(config.plant, config.kinematics, config.dataset,
                                       loaded ? config.dataset.load_mass : 0.0, config.session_seed(loaded));
    write_dataset(s.train, layout.train_set(loaded));
    write_dataset(s.test, layout.test_set(loaded));
    written.push_back(layout.train_set(loaded));
    written.push_back(layout.test_set(loaded));
  }
  if (homing) {
    for (int ds : {1, 2}) {
      const Session s =
          generate_homing_session(config.plant, config.kinematics, config.dataset, ds == 2, config.homing_seed(ds));
      write_dataset(s.train, layout.homing_train_set(ds));
      write_dataset(s.test, layout.homing_test_set(ds));
      written.push_back(layout.homing_train_set(ds));
      written.push_back(layout.homing_test_set(ds));
    }
  }
  return written;
}

std::vector<std::filesystem::path> cmd_train(const WorkbenchConfig& config) {
  config.validate();
  const OutputLayout layout(config.output_dir);
  const CalibratorConfig cal = config.effective_calibrator();
  const SeedMap seeds = seed_map(config);
  std::vector<std::filesystem::path> written;
  for (bool loaded : {false, true}) {
    const Dataset train = load_required(layout.train_set(loaded));
    make_dir(layout.model_dir());
    for (std::size_t k = 0; k < cal.seeds.size(); ++k) {
      const CalibratorFit fit = train_calibrator(train, cal, cal.seeds[k]);
      save_calibrator(fit.calibrator, layout.model(loaded, seeds.listed[k]));
      write_history(layout.history(loaded, seeds.listed[k]), fit.history);
      written.push_back(layout.model(loaded, seeds.listed[k]));
      written.push_back(layout.history(loaded, seeds.listed[k]));
    }
  }
  return written;
}

std::vector<std::filesystem::path> cmd_eval(const WorkbenchConfig& config) {
  config.validate();
  const OutputLayout layout(config.output_dir);
  ResultWriter out(layout);
  for (bool loaded : {false, true}) {
    const std::string cond = condition_name(loaded);
    const Dataset test = load_required(layout.test_set(loaded));
    for (auto seed : config.calibrator.seeds) {
      const Calibrator c = load_calibrator(layout.model(loaded, seed));
      out.write("baseline", 0, "All Features", "All Features", cond, seed, evaluate(c, test));
      std::vector<MetricsRecord> hourly;
      const auto windows = windowed_metrics(c, test, 3600.0);
      for (std::size_t h = 0; h < windows.size(); ++h) {
        hourly.push_back({"hourly", "All Features", cond, seed, static_cast<int>(h), windows[h]});
      }
      out.write("hourly", 0, "All Features", cond, seed, hourly);
    }
  }
  return out.finish();
}

std::vector<std::filesystem::path> cmd_ablate(const WorkbenchConfig& config) {
  config.validate();
  const OutputLayout layout(config.output_dir);
  const SeedMap seeds = seed_map(config);
  ResultWriter out(layout);
  for (bool loaded : {false, true}) {
    const std::string cond = condition_name(loaded);
    auto train = std::make_shared<const Dataset>(load_required(layout.train_set(loaded)));
    auto test = std::make_shared<const Dataset>(load_required(layout.test_set(loaded)));
    Study study(train, test, config.effective_calibrator());
    out.write("reference", 0, "Before Calibration", "Before Calibration", cond, 0, study.before());
    out.write("reference", 1, "Bias Removal", "Bias Removal", cond, 0, study.bias_removal());
    out.write_run("baseline", 0, "All Features", "All Features", cond, seeds, study.baseline());
    int order = 1;
    for (const auto& spec : config.manifest) {
      const std::string kind = to_string(spec.method);
      out.write_run(kind, order, spec.label, spec.label, cond, seeds, study.run(spec));
      ++order;
    }
  }
  return out.finish();
}

std::vector<std::filesystem::path> cmd_torque_study(const WorkbenchConfig& config) {
  config.validate();
  const OutputLayout layout(config.output_dir);
  const SeedMap seeds = seed_map(config);
  ResultWriter out(layout);
  for (bool loaded : {false, true}) {
    const std::string cond = condition_name(loaded);
    auto train = std::make_shared<const Dataset>(load_required(layout.train_set(loaded)));
    auto test = std::make_shared<const Dataset>(load_required(layout.test_set(loaded)));
    Study study(train, test, config.effective_calibrator());
    out.write_run("baseline", 0, "All Features", "All Features", cond, seeds, study.baseline());
    int order = 1;
    for (TorqueOp op : {TorqueOp::kNoise, TorqueOp::kNegate, TorqueOp::kTriple}) {
      out.write_run("torque", order++, to_string(op), torque_label(op), cond, seeds, study.torque(op));
    }
  }
  return out.finish();
}

std::vector<std::filesystem::path> cmd_homing_study(const WorkbenchConfig& config) {
  config.validate();
  const OutputLayout layout(config.output_dir);
  Session first{load_required(layout.homing_train_set(1)), load_required(layout.homing_test_set(1))};
  Session second{load_required(layout.homing_train_set(2)), load_required(layout.homing_test_set(2))};
  const HomingStudyResult result = homing_study(first, second, config.effective_calibrator());

  ResultWriter out(layout);
  const std::vector<std::pair<std::string, const std::vector<JointMetrics>*>> references{
      {"Before Calibration", &result.before_per_segment}, {"Bias Removal", &result.bias_per_segment}};
  int order = 0;
  for (const auto& [label, per_segment] : references) {
    std::vector<MetricsRecord> records;
    for (std::size_t k = 0; k < per_segment->size(); ++k) {
      records.push_back({"homing", label, "dataset1", 0, static_cast<int>(k), (*per_segment)[k]});
    }
    out.write("homing", order++, label, "dataset1", 0, records);
  }
  for (const auto& row : result.rows) {
    const std::string cond = "dataset" + std::to_string(row.dataset);
    for (std::size_t s = 0; s < row.seeds.size(); ++s) {
      const std::uint64_t seed = config.calibrator.seeds[s];
      std::vector<MetricsRecord> records{{"homing", row.label, cond, seed, -1, row.overall_per_seed[s]}};
      for (std::size_t k = 0; k < row.segment_per_seed.size(); ++k) {
        records.push_back({"homing", row.label, cond, seed, static_cast<int>(k), row.segment_per_seed[k][s]});
      }
      out.write("homing", order, row.label, cond, seed, records);
    }
    ++order;
  }
  return out.finish();
}

Report cmd_report(const WorkbenchConfig& config) {
  const OutputLayout layout(config.output_dir);
  Report report = render_report(collect_results(layout.results_dir()));
  if (report.empty) return report;
  make_dir(layout.root());
  for (const auto& [path, text] : {std::pair{layout.report(), &report.markdown}, {layout.figure(), &report.figure_csv}}) {
    if (text->empty()) continue;
    std::ofstream f(path, std::ios::binary);
    if (!f || !(f << *text)) throw Error(ErrorCategory::kIoError, "cannot write " + path.string());
  }
  return report;
}

}  // namespace cablecal
