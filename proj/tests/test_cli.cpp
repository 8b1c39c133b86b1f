#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome cli(const std::string& args, const fs::path& scratch) {
  const fs::path out = scratch / "stdout.txt", err = scratch / "stderr.txt";
  const std::string cmd = std::string("\"") + CABLECAL_CLI_PATH + "\" " + args + " >\"" + out.string() + "\" 2>\"" +
                          err.string() + "\"";
  const int status = std::system(cmd.c_str());
  Outcome o;
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  o.out = slurp(out);
  o.err = slurp(err);
  return o;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "cablecal-cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Small enough to run the whole pipeline in seconds.
fs::path tiny_config(const fs::path& dir) {
  const fs::path p = dir / "tiny.yaml";
  std::ofstream(p) << "seed: 5\n"
                      "dataset:\n"
                      "  sparsities: [0.5]\n"
                      "  test_duration: 20\n"
                      "  homing_segments: 2\n"
                      "  homing_segment_duration: 10\n"
                      "calibrator:\n"
                      "  hidden_layers: [8]\n"
                      "  seeds: [0, 1]\n"
                      "  train:\n"
                      "    epochs: 2\n";
  return p;
}

std::vector<fs::path> files_below(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out.push_back(fs::relative(e.path(), dir));
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("missing datasets exit with the MissingDataset code") {
    const fs::path dir = fresh_dir("missing");
    for (const char* cmd : {"train", "eval", "ablate", "torque-study", "homing-study"}) {
      const Outcome o = cli(std::string("--out \"") + (dir / "run").string() + "\" " + cmd, dir);
      CHECK(o.code == 4);
      CHECK(o.err.find("error[MissingDataset]") != std::string::npos);
    }
  }

  TEST_CASE("bad configs exit with the ConfigError code") {
    const fs::path dir = fresh_dir("badconfig");
    std::ofstream(dir / "bad.yaml") << "seed: 1\nplant:\n  bias: [1, 2]\n";
    const Outcome o = cli("--config \"" + (dir / "bad.yaml").string() + "\" dump-config", dir);
    CHECK(o.code == 2);
    CHECK(o.err.find("error[ConfigError]") != std::string::npos);
    CHECK(o.err.find("line 3") != std::string::npos);
  }

  TEST_CASE("an uncreatable output directory is an I/O error") {
    const fs::path dir = fresh_dir("unwritable");
    std::ofstream(dir / "plain-file") << "x";
    const Outcome o = cli("--config \"" + tiny_config(dir).string() + "\" --out \"" + (dir / "plain-file" / "run").string() +
                              "\" gen-data",
                          dir);
    CHECK(o.code == 3);
    CHECK(o.err.find("error[IoError]") != std::string::npos);
  }

  TEST_CASE("report on an empty directory says nothing to report") {
    const fs::path dir = fresh_dir("empty");
    const Outcome o = cli("--out \"" + (dir / "run").string() + "\" report", dir);
    CHECK(o.code == 0);
    CHECK(o.out == "nothing to report\n");
  }

  TEST_CASE("the full pipeline is reproducible byte for byte") {
    const fs::path dir = fresh_dir("pipeline");
    const fs::path config = tiny_config(dir);
    for (const char* run : {"a", "b"}) {
      const std::string base = "--config \"" + config.string() + "\" --out \"" + (dir / run).string() + "\" ";
      for (const char* cmd : {"gen-data --homing", "train", "eval", "ablate", "torque-study", "homing-study", "report"}) {
        const Outcome o = cli(base + cmd, dir);
        REQUIRE_MESSAGE(o.code == 0, cmd << ": " << o.err);
      }
    }
    const auto files = files_below(dir / "a");
    CHECK(files == files_below(dir / "b"));
    for (const auto& f : files) CHECK_MESSAGE(slurp(dir / "a" / f) == slurp(dir / "b" / f), f.string());

    // One metrics file per (manifest row, seed, load) plus the references.
    int removal = 0, inaccurate = 0;
    for (const auto& f : files) {
      const std::string s = f.string();
      if (s.rfind("results/removal/", 0) == 0) ++removal;
      if (s.rfind("results/inaccurate/", 0) == 0) ++inaccurate;
    }
    CHECK(removal == 10 * 2 * 2);
    CHECK(inaccurate == 9 * 2 * 2);
    CHECK(fs::exists(dir / "a" / "results" / "aggregate.csv"));
    const std::string report = slurp(dir / "a" / "report.md");
    CHECK(report.find("Removal of features") != std::string::npos);
    CHECK(report.find("Modified torque features") != std::string::npos);
    CHECK(report.find("Homing inconsistency") != std::string::npos);
    CHECK(slurp(dir / "a" / "homing_segments.csv").rfind("# cablecal-figure v1", 0) == 0);
  }
}
