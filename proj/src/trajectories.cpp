#include "cablecal/trajectories.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cablecal/error.hpp"
#include "cablecal/rng.hpp"

namespace cablecal {

namespace {

/// Position along a trapezoidal (or triangular) profile covering `distance`.
struct Trapezoid {
  double distance = 0.0, v = 0.0, a = 0.0, t_ramp = 0.0, t_total = 0.0;

  Trapezoid(double d, double vmax, double amax) : distance(d), v(vmax), a(amax) {
    if (d * a < v * v) {  // never reaches cruise speed
      v = std::sqrt(d * a);
    }
    t_ramp = v / a;
    t_total = d > 0.0 ? 2.0 * t_ramp + (d - v * t_ramp) / v : 0.0;
  }

  double at(double t) const {
    if (t <= 0.0) return 0.0;
    if (t >= t_total) return distance;
    if (t < t_ramp) return 0.5 * a * t * t;
    if (t > t_total - t_ramp) {
      const double r = t_total - t;
      return distance - 0.5 * a * r * r;
    }
    return 0.5 * a * t_ramp * t_ramp + v * (t - t_ramp);
  }
};

}  // namespace

std::array<JointLimits, 3> reference_limits() {
  return {JointLimits{20.0 * kDegToRad, 60.0 * kDegToRad},
          JointLimits{55.0 * kDegToRad, 110.0 * kDegToRad}, JointLimits{0.33, 0.42}};
}

void TrajectorySpec::validate() const {
  for (const auto& l : limits) {
    if (!(l.lo < l.hi)) throw Error(ErrorCategory::kInvalidArgument, "trajectory: joint limit lo >= hi");
  }
  if (kind == TrajectoryKind::kZigzag && !(sparsity > 0.0 && sparsity <= 1.0)) {
    throw Error(ErrorCategory::kInvalidSparsity,
                "trajectory: sparsity must lie in (0, 1], got " + std::to_string(sparsity));
  }
  if (kind == TrajectoryKind::kRandomSinusoid && !(duration > 0.0)) {
    throw Error(ErrorCategory::kInvalidArgument, "trajectory: duration must be positive");
  }
  if ((velocity_max.array() <= 0.0).any() || (velocity_min.array() < 0.0).any() ||
      (velocity_min.array() > velocity_max.array()).any()) {
    throw Error(ErrorCategory::kInvalidArgument, "trajectory: invalid velocity bounds");
  }
  if ((acceleration.array() <= 0.0).any() || !(rate > 0.0)) {
    throw Error(ErrorCategory::kInvalidArgument, "trajectory: acceleration and rate must be positive");
  }
}

int zigzag_levels(double sparsity) {
  if (!(sparsity > 0.0 && sparsity <= 1.0)) {
    throw Error(ErrorCategory::kInvalidSparsity,
                "trajectory: sparsity must lie in (0, 1], got " + std::to_string(sparsity));
  }
  const double steps = 1.0 / sparsity;
  const double rounded = std::round(steps);
  return static_cast<int>(std::abs(steps - rounded) < 1e-9 ? rounded : std::ceil(steps)) + 1;
}

void append_move(SetpointStream& out, Vec3 from, int joint, double to, double velocity,
                 double acceleration, double rate) {
  const double start = from[joint];
  const double d = std::abs(to - start);
  if (d == 0.0) return;
  const double sgn = to > start ? 1.0 : -1.0;
  const Trapezoid profile(d, velocity, acceleration);
  const double dt = 1.0 / rate;
  const auto ticks = static_cast<long>(std::ceil(profile.t_total * rate));
  for (long k = 1; k <= ticks; ++k) {
    from[joint] = k == ticks ? to : start + sgn * profile.at(static_cast<double>(k) * dt);
    out.push_back(from);
  }
}

SetpointStream zigzag(const TrajectorySpec& spec) {
  spec.validate();
  const int levels = zigzag_levels(spec.sparsity);
  auto level = [&](int joint, int k) {
    const auto& l = spec.limits[joint];
    return l.lo + std::min(1.0, k * spec.sparsity) * (l.hi - l.lo);
  };
  // Each move cruises at its own speed drawn from the velocity bounds, so the
  // raster also covers the speed range.
  Rng rng(derive_seed(spec.seed, "zigzag/speed"));
  auto speed = [&](int joint) {
    return spec.velocity_min[joint] > 0.0 ? rng.uniform(spec.velocity_min[joint], spec.velocity_max[joint])
                                          : spec.velocity_max[joint];
  };

  // Joint 1 sweeps back and forth without pausing. A joint-2 or joint-3 step
  // starts at a joint-1 reversal and runs during the following sweep.
  struct Segment {
    double start;
    double from, to;
    Trapezoid profile;
  };
  std::array<std::vector<Segment>, 3> moves;
  std::array<double, 3> position{spec.limits[0].lo, spec.limits[1].lo, spec.limits[2].lo};
  auto schedule = [&](int joint, double t0, double to, double v) {
    Segment seg{t0, position[joint], to, Trapezoid(std::abs(to - position[joint]), v, spec.acceleration[joint])};
    position[joint] = to;
    moves[joint].push_back(seg);
    return seg.profile.t_total;
  };

  double t = 0.0;
  bool joint1_high = false;
  int pending_joint = -1;
  double pending_target = 0.0;
  for (int k3 = 0; k3 < levels; ++k3) {
    const bool ascending = k3 % 2 == 0;
    for (int idx = 0; idx < levels; ++idx) {
      joint1_high = !joint1_high;
      const double sweep = schedule(0, t, joint1_high ? spec.limits[0].hi : spec.limits[0].lo, speed(0));
      double span = sweep;
      if (pending_joint >= 0) {
        // Fast enough to finish inside this sweep when the bounds allow;
        // otherwise joint 1 dwells at the far end until the step completes.
        const double d = std::abs(pending_target - position[pending_joint]);
        const double a = spec.acceleration[pending_joint];
        double v = speed(pending_joint);
        const double disc = a * a * sweep * sweep - 4.0 * a * d;
        if (disc >= 0.0) v = std::max(v, 0.5 * (a * sweep - std::sqrt(disc)) * (1.0 + 1e-9));
        v = std::min(v, spec.velocity_max[pending_joint]);
        span = std::max(span, schedule(pending_joint, t, pending_target, v));
        pending_joint = -1;
      }
      t += span;
      if (idx + 1 < levels) {
        pending_joint = 1;
        pending_target = level(1, ascending ? idx + 1 : levels - 2 - idx);
      } else if (k3 + 1 < levels) {
        pending_joint = 2;
        pending_target = level(2, k3 + 1);
      }
    }
  }

  const auto ticks = static_cast<long>(std::ceil(t * spec.rate));
  SetpointStream out;
  out.reserve(static_cast<std::size_t>(ticks) + 1);
  std::array<std::size_t, 3> cursor{0, 0, 0};
  for (long k = 0; k <= ticks; ++k) {
    const double now = static_cast<double>(k) / spec.rate;
    Vec3 q;
    for (int j = 0; j < 3; ++j) {
      auto& list = moves[static_cast<std::size_t>(j)];
      auto& c = cursor[static_cast<std::size_t>(j)];
      while (c + 1 < list.size() && now >= list[c + 1].start) ++c;
      if (list.empty() || now < list[c].start) {
        q[j] = list.empty() ? spec.limits[j].lo : list[c].from;
        continue;
      }
      const Segment& seg = list[c];
      const double s = seg.profile.at(now - seg.start);
      q[j] = now - seg.start >= seg.profile.t_total ? seg.to : seg.from + (seg.to > seg.from ? s : -s);
    }
    out.push_back(q);
  }
  return out;
}

SetpointStream random_sinusoid(const TrajectorySpec& spec) {
  spec.validate();
  const auto ticks = static_cast<std::size_t>(std::llround(spec.duration * spec.rate));
  const double dt = 1.0 / spec.rate;
  SetpointStream out(ticks, Vec3::Zero());
  for (int j = 0; j < kActiveJoints; ++j) {
    Rng rng(derive_seed(spec.seed, "sinusoid/joint" + std::to_string(j)));
    const auto& lim = spec.limits[j];
    double q0 = rng.uniform(lim.lo, lim.hi);
    std::size_t k = 0;
    while (k < ticks) {
      const double target = rng.uniform(lim.lo, lim.hi);
      const double v = rng.uniform(spec.velocity_min[j], spec.velocity_max[j]);
      const double delta = target - q0;
      // Half-cosine easing peaks at pi*|delta|/(2T).
      const double period = std::max(dt, kPi * std::abs(delta) / (2.0 * std::max(v, 1e-12)));
      const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(period * spec.rate)));
      for (std::size_t i = 1; i <= n && k < ticks; ++i, ++k) {
        const double phase = std::min(1.0, static_cast<double>(i) / static_cast<double>(n));
        out[k][j] = i == n ? target : q0 + delta * 0.5 * (1.0 - std::cos(kPi * phase));
      }
      q0 = target;
    }
  }
  return out;
}

SetpointStream generate(const TrajectorySpec& spec) {
  return spec.kind == TrajectoryKind::kZigzag ? zigzag(spec) : random_sinusoid(spec);
}

SetpointStream transition(const Vec3& from, const Vec3& to, const Vec3& velocity,
                          const Vec3& acceleration, double rate) {
  // Scale every joint onto the slowest joint's schedule.
  double t_total = 0.0;
  for (int j = 0; j < kActiveJoints; ++j) {
    t_total = std::max(t_total, Trapezoid(std::abs(to[j] - from[j]), velocity[j], acceleration[j]).t_total);
  }
  SetpointStream out;
  const auto ticks = static_cast<long>(std::ceil(t_total * rate));
  for (long k = 1; k <= ticks; ++k) {
    Vec3 q;
    for (int j = 0; j < kActiveJoints; ++j) {
      const Trapezoid p(std::abs(to[j] - from[j]), velocity[j], acceleration[j]);
      const double s = p.t_total > 0.0 ? p.at(static_cast<double>(k) / rate * p.t_total / t_total) : 0.0;
      q[j] = k == ticks ? to[j] : from[j] + (to[j] > from[j] ? s : -s);
    }
    out.push_back(q);
  }
  return out;
}

std::string describe(const TrajectorySpec& spec) {
  std::ostringstream os;
  if (spec.kind == TrajectoryKind::kZigzag) {
    os << "zigzag(sparsity=" << spec.sparsity << ")";
  } else {
    os << "random_sinusoid(duration=" << spec.duration << ",seed=" << spec.seed << ")";
  }
  return os.str();
}

}  // namespace cablecal
