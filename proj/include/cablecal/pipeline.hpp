#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cablecal/config.hpp"
#include "cablecal/report.hpp"

namespace cablecal {

/// File layout below the output directory.
class OutputLayout {
 public:
  explicit OutputLayout(std::filesystem::path root) : root_(std::move(root)) {}

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path data_dir() const { return root_ / "data"; }
  std::filesystem::path model_dir() const { return root_ / "models"; }
  std::filesystem::path results_dir() const { return root_ / "results"; }

  std::filesystem::path train_set(bool loaded) const;
  std::filesystem::path test_set(bool loaded) const;
  /// Homing-study sessions; dataset 1 has no homing in training, dataset 2 does.
  std::filesystem::path homing_train_set(int dataset) const;
  std::filesystem::path homing_test_set(int dataset) const;
  std::filesystem::path model(bool loaded, std::uint64_t seed) const;
  std::filesystem::path history(bool loaded, std::uint64_t seed) const;
  std::filesystem::path aggregate() const { return results_dir() / "aggregate.csv"; }
  std::filesystem::path report() const { return root_ / "report.md"; }
  std::filesystem::path figure() const { return root_ / "homing_segments.csv"; }

 private:
  std::filesystem::path root_;
};

std::string condition_name(bool loaded);

// Each command returns the files it wrote. Study commands also rewrite the
// aggregate of every metrics file under results/.

/// Train/test sets for both load cases; with `homing` also the two homing
/// study sessions. Throws Error(kIoError) if the directory is not writable.
std::vector<std::filesystem::path> cmd_gen_data(const WorkbenchConfig& config, bool homing);
/// All-features calibrators per load case and seed. Throws
/// Error(kMissingDataset) when the training sets are absent.
std::vector<std::filesystem::path> cmd_train(const WorkbenchConfig& config);
/// Evaluates the checkpoints written by cmd_train on the test sets.
std::vector<std::filesystem::path> cmd_eval(const WorkbenchConfig& config);
/// Before-calibration, bias-removal, all-features and every manifest row.
std::vector<std::filesystem::path> cmd_ablate(const WorkbenchConfig& config);
std::vector<std::filesystem::path> cmd_torque_study(const WorkbenchConfig& config);
std::vector<std::filesystem::path> cmd_homing_study(const WorkbenchConfig& config);
/// Renders every metrics file found under results/ into report.md and the
/// per-segment homing series.
Report cmd_report(const WorkbenchConfig& config);

}  // namespace cablecal
