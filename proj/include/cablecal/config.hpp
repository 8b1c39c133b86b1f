#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cablecal/ablation.hpp"
#include "cablecal/calibrator.hpp"
#include "cablecal/kinematics.hpp"
#include "cablecal/plant.hpp"
#include "cablecal/workbench.hpp"

namespace cablecal {

/// Everything a workbench run depends on. All quantities are SI (rad, m, s).
struct WorkbenchConfig {
  std::string profile = "desk";
  std::uint64_t seed = 0;
  std::string output_dir = "results";
  KinematicParams kinematics = KinematicParams::reference();
  PlantParams plant = PlantParams::reference();
  DatasetProfile dataset = DatasetProfile::desk();
  CalibratorConfig calibrator;
  std::vector<AblationSpec> manifest = standard_manifest();

  /// About 20k training pairs, [in,128,64,3], 200 epochs, 3 seeds.
  static WorkbenchConfig desk();
  /// Full protocol: about 68k training pairs, [in,256,128,64,3], 600 epochs, 5 seeds.
  static WorkbenchConfig paper();
  /// Throws Error(kConfigError) on an unknown name.
  static WorkbenchConfig for_profile(const std::string& name);

  /// Throws the category of the first failing component.
  void validate() const;

  // Seed fan-out. Every random component draws from the global seed through a
  // fixed tag, so one number reproduces the whole pipeline.
  std::uint64_t session_seed(bool loaded) const;
  std::uint64_t homing_seed(int dataset) const;
  /// Calibrator config whose network seeds are derived from the global seed
  /// ("network/<k>" for every listed seed k).
  CalibratorConfig effective_calibrator() const;

  bool operator==(const WorkbenchConfig&) const = default;
};

/// Parses YAML text. Keys absent from the text keep the values of the base
/// profile, which is `profile_override` if given, else the file's `profile`
/// key, else desk. Errors are Error(kConfigError) and name the line and column.
WorkbenchConfig parse_config(const std::string& text,
                             const std::optional<std::string>& profile_override = std::nullopt);
/// Throws Error(kIoError) if the file cannot be read.
WorkbenchConfig load_config(const std::filesystem::path& path,
                            const std::optional<std::string>& profile_override = std::nullopt);
/// Full YAML dump; parse_config(serialize_config(c)) == c.
std::string serialize_config(const WorkbenchConfig& config);

}  // namespace cablecal
