#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "cablecal/calibrator.hpp"
#include "cablecal/error.hpp"
#include "cablecal/rng.hpp"
#include "cablecal/workbench.hpp"

using namespace cablecal;

namespace {

// A plant whose only transmission error is a constant bias.
PlantParams bias_only(const Vec3& bias) {
  PlantParams p = PlantParams::reference();
  p.bias = bias;
  p.runout_amplitude = Vec3::Zero();
  p.compliance = Vec3::Zero();
  p.backlash = Vec3::Zero();
  for (auto& h : p.hysteresis) h.alpha = 0.0;
  p.coupled_hysteresis = 0.0;
  p.disturbance_sigma = Vec3::Zero();
  p.friction_variation = Vec3::Zero();
  return p;
}

Dataset record(const PlantParams& params, std::uint64_t seed, double duration) {
  TrajectorySpec spec;
  spec.kind = TrajectoryKind::kRandomSinusoid;
  spec.seed = seed;
  spec.duration = duration;
  spec.velocity_min = Vec3(3 * kDegToRad, 3 * kDegToRad, 0.003);
  spec.velocity_max = Vec3(15 * kDegToRad, 15 * kDegToRad, 0.015);
  const auto kin = KinematicParams::reference();
  const SetpointStream path = random_sinusoid(spec);
  PlantState plant = make_plant(params, kin, path.front(), seed);
  Recorder rec(params, kin);
  Dataset d;
  rec.run(plant, path, d, 0);
  return d;
}

CalibratorConfig small_config(int epochs) {
  CalibratorConfig c;
  c.hidden_layers = {16, 8};
  c.train.epochs = epochs;
  c.train.batch_size = 128;
  c.train.learning_rate = 3e-3;
  c.seeds = {0};
  return c;
}

// Calibrator whose network outputs `value` regardless of input.
Calibrator constant_output(const Vec3& value) {
  Calibrator c;
  c.mask = FeatureMask::all();
  c.input = Normalizer::identity(kFeatureCount);
  c.output = Normalizer::identity(3);
  c.model = Mlp<double>::zeros({kFeatureCount, 1, 3});
  c.model.bias(1) = value;
  return c;
}

// Quantization scale of the ground truth plus the encoder-derived pose.
Vec3 quantization(const PlantParams& p) {
  const double rev = 2 * kPi / p.ground_truth_rev_counts;
  Vec3 q;
  for (int j = 0; j < 3; ++j) {
    q[j] = (j < 2 ? rev : p.ground_truth_linear_step) +
           p.coupling.row(j).cwiseAbs().maxCoeff() / p.motor_counts_per_rad[j];
  }
  return q;
}

}  // namespace

TEST_SUITE("calibrator") {
  TEST_CASE("normalizer statistics") {
    Rng rng(4);
    Eigen::MatrixXd x(2, 10000);
    for (int c = 0; c < x.cols(); ++c) {
      x(0, c) = rng.normal();
      x(1, c) = 7.5;
    }
    const Normalizer n = Normalizer::fit(x);
    CHECK(std::abs(n.mean[0]) < 0.05);
    CHECK(n.sigma[0] == doctest::Approx(1.0).epsilon(0.05));
    const Eigen::MatrixXd z = n.apply(x);
    CHECK(z.row(1).isZero(0.0));
    CHECK((n.invert(z).row(0) - x.row(0)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK_THROWS_AS(Normalizer::fit(Eigen::MatrixXd(2, 0)), Error);
  }

  TEST_CASE("metrics by hand") {
    Eigen::MatrixXd r(3, 2);
    r << 3, 4, 3, -4, 0, 0;
    const JointMetrics m = compute_metrics(r);
    CHECK(m.rmse[0] == doctest::Approx(std::sqrt(12.5)));
    CHECK(m.rmse[1] == doctest::Approx(std::sqrt(12.5)));
    CHECK(m.peak[1] == 4.0);
    CHECK(m.rmse[2] == 0.0);
    CHECK(m.peak[2] == 0.0);
    CHECK_THROWS_AS(compute_metrics(Eigen::MatrixXd(3, 0)), Error);
  }

  TEST_CASE("report units are degrees and millimetres") {
    const Vec3 u = to_report_units(Vec3(kPi, 0.5, 0.002));
    CHECK(u[0] == doctest::Approx(180.0));
    CHECK(u[1] == doctest::Approx(0.5 * 180.0 / kPi));
    CHECK(u[2] == doctest::Approx(2.0));
  }

  TEST_CASE("calibrate adds the predicted error to the raw joint pose") {
    Rng rng(8);
    Eigen::MatrixXd f(kFeatureCount, 6);
    for (int c = 0; c < f.cols(); ++c)
      for (int r = 0; r < kFeatureCount; ++r) f(r, c) = rng.uniform(-1, 1);

    const Calibrator zero = constant_output(Vec3::Zero());
    CHECK(zero.calibrate(f) == f.middleRows(layout::kJointPose, 3));

    const Calibrator one = constant_output(Vec3::Ones());
    const Eigen::MatrixXd corrected = one.calibrate(f);
    CHECK((corrected - f.middleRows(layout::kJointPose, 3)).isApprox(Eigen::MatrixXd::Ones(3, 6)));
    for (int c = 0; c < f.cols(); ++c) {
      FeatureVector state;
      for (int r = 0; r < kFeatureCount; ++r) state[r] = f(r, c);
      CHECK(one.calibrate(state) == Vec3(corrected.col(c)));
    }
    CHECK_THROWS_AS(one.predict(Eigen::MatrixXd::Zero(111, 2)), Error);
  }

  TEST_CASE("a bias-only plant is fully corrected by bias removal") {
    const PlantParams p = bias_only(Vec3(0.9 * kDegToRad, 1.2 * kDegToRad, 2e-3));
    const Dataset train = record(p, 1, 30), test = record(p, 2, 30);
    const JointMetrics before = before_calibration(test);
    const JointMetrics bias = bias_removal_baseline(train, test);
    const Vec3 q = quantization(p);
    for (int j = 0; j < 3; ++j) {
      CHECK(before.rmse[j] > 10 * q[j]);
      CHECK(bias.rmse[j] < q[j]);
    }
    CHECK_THROWS_AS(bias_offset(Dataset{}), Error);
  }

  TEST_CASE("nothing to learn gives near-zero predictions") {
    const PlantParams p = bias_only(Vec3::Zero());
    const Dataset train = record(p, 3, 60), test = record(p, 4, 30);
    const CalibratorFit fit = train_calibrator(train, small_config(20), 0);
    const JointMetrics m = evaluate(fit.calibrator, test);
    const Vec3 q = quantization(p);
    for (int j = 0; j < 3; ++j) CHECK(m.rmse[j] < 3 * q[j]);
  }

  TEST_CASE("evaluation reuses the training statistics") {
    const PlantParams p = PlantParams::reference();
    const Dataset train = record(p, 5, 40), test = record(p, 6, 20);
    const CalibratorFit fit = train_calibrator(train, small_config(3), 0);
    const auto active = fit.calibrator.mask.active_indices();
    Eigen::MatrixXd x_train(active.size(), train.size());
    const Eigen::MatrixXd all_train = feature_matrix(train);
    for (std::size_t i = 0; i < active.size(); ++i) x_train.row(i) = all_train.row(active[i]);
    CHECK(fit.calibrator.input == Normalizer::fit(x_train));
    CHECK(fit.calibrator.output == Normalizer::fit(target_matrix(train)));

    // Statistics refitted on the test set would give different predictions.
    const Eigen::MatrixXd x_test_all = feature_matrix(test);
    Eigen::MatrixXd x_test(active.size(), test.size());
    for (std::size_t i = 0; i < active.size(); ++i) x_test.row(i) = x_test_all.row(active[i]);
    const Eigen::MatrixXd leaked =
        fit.calibrator.output.invert(fit.calibrator.model.forward(Normalizer::fit(x_test).apply(x_test)));
    const Eigen::MatrixXd proper = fit.calibrator.predict(x_test_all);
    CHECK((leaked - proper).cwiseAbs().maxCoeff() > 0.0);
    CHECK(proper == fit.calibrator.output.invert(fit.calibrator.model.forward(fit.calibrator.input.apply(x_test))));
  }

  TEST_CASE("windowed metrics split the test set by time stamp") {
    const PlantParams p = PlantParams::reference();
    const Dataset test = record(p, 9, 30);
    const Calibrator zero = constant_output(Vec3::Zero());
    const auto one = windowed_metrics(zero, test, 3600.0);
    REQUIRE(one.size() == 1);
    CHECK(one[0] == evaluate(zero, test));
    const auto tens = windowed_metrics(zero, test, 10.0);
    CHECK(tens.size() >= 3);
    CHECK(tens.size() <= 4);
    Vec3 peak = Vec3::Zero();
    for (const auto& m : tens) peak = peak.cwiseMax(m.peak);
    CHECK(peak == one[0].peak);
    CHECK_THROWS_AS(windowed_metrics(zero, test, 0.0), Error);
  }

  TEST_CASE("training is seeded and checkpoints round-trip") {
    const PlantParams p = PlantParams::reference();
    const Dataset train = record(p, 7, 20);
    const CalibratorFit a = train_calibrator(train, small_config(2), 5);
    const CalibratorFit b = train_calibrator(train, small_config(2), 5);
    const CalibratorFit c = train_calibrator(train, small_config(2), 6);
    CHECK(a.calibrator == b.calibrator);
    CHECK(a.history.loss_history == b.history.loss_history);
    CHECK(!(a.calibrator.model == c.calibrator.model));

    const auto dir = std::filesystem::temp_directory_path() / "cablecal-tests";
    std::filesystem::create_directories(dir);
    save_calibrator(a.calibrator, dir / "cal.ccal");
    CHECK(load_calibrator(dir / "cal.ccal") == a.calibrator);
    try {
      load_calibrator(dir / "missing.ccal");
      FAIL("loaded a missing checkpoint");
    } catch (const Error& e) {
      CHECK(e.category() == ErrorCategory::kMissingDataset);
    }
    CHECK_THROWS_AS(train_calibrator(Dataset{}, small_config(1), 0), Error);
  }
}
