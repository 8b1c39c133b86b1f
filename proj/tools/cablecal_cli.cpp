#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cablecal/config.hpp"
#include "cablecal/error.hpp"
#include "cablecal/pipeline.hpp"

namespace {

using cablecal::WorkbenchConfig;

struct GlobalOptions {
  std::string config_path;
  std::string profile;
  std::optional<std::uint64_t> seed;
  std::string out;
};

WorkbenchConfig resolve(const GlobalOptions& opt) {
  const std::optional<std::string> profile =
      opt.profile.empty() ? std::nullopt : std::optional<std::string>(opt.profile);
  WorkbenchConfig config = opt.config_path.empty() ? WorkbenchConfig::for_profile(profile.value_or("desk"))
                                                   : cablecal::load_config(opt.config_path, profile);
  if (opt.seed) config.seed = *opt.seed;
  if (!opt.out.empty()) config.output_dir = opt.out;
  return config;
}

void list(const std::vector<std::filesystem::path>& files) {
  for (const auto& f : files) std::cout << f.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Calibration workbench for a simulated cable-driven arm"};
  app.require_subcommand(1);
  GlobalOptions opt;
  app.add_option("--config", opt.config_path, "YAML workbench config");
  app.add_option("--profile", opt.profile, "Base profile")->check(CLI::IsMember({"desk", "paper"}));
  app.add_option("--seed", opt.seed, "Global seed (overrides the config)");
  app.add_option("--out", opt.out, "Output directory (overrides the config)");

  bool homing = false;
  auto* gen = app.add_subcommand("gen-data", "Simulate training and test sessions");
  gen->add_flag("--homing", homing, "Also generate the two homing-study sessions");
  auto* train = app.add_subcommand("train", "Train all-features calibrators per load case and seed");
  auto* eval = app.add_subcommand("eval", "Evaluate trained calibrators on the test sets");
  auto* ablate = app.add_subcommand("ablate", "Run the removal and inaccurate ablation manifest");
  auto* torque = app.add_subcommand("torque-study", "Modify torque features at test time");
  auto* homing_cmd = app.add_subcommand("homing-study", "Re-homing inconsistency study");
  auto* report = app.add_subcommand("report", "Render tables from the result files");
  auto* dump = app.add_subcommand("dump-config", "Print the resolved config");

  CLI11_PARSE(app, argc, argv);

  try {
    const WorkbenchConfig config = resolve(opt);
    if (*gen) list(cablecal::cmd_gen_data(config, homing));
    if (*train) list(cablecal::cmd_train(config));
    if (*eval) list(cablecal::cmd_eval(config));
    if (*ablate) list(cablecal::cmd_ablate(config));
    if (*torque) list(cablecal::cmd_torque_study(config));
    if (*homing_cmd) list(cablecal::cmd_homing_study(config));
    if (*dump) std::cout << cablecal::serialize_config(config);
    if (*report) {
      const auto r = cablecal::cmd_report(config);
      std::cout << r.markdown;
    }
  } catch (const cablecal::Error& e) {
    std::cerr << "error[" << cablecal::category_name(e.category()) << "]: " << e.what() << "\n";
    return cablecal::exit_code(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error[Internal]: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
