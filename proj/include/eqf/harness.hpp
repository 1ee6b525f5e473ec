// Monte Carlo experiment runner: scenario sampling, the gyro-tick schedule,
// error metrics and batch aggregation.

#pragma once

#include "eqf/cascade.hpp"
#include "eqf/geom.hpp"
#include "eqf/models.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <random>
#include <string>
#include <thread>
#include <vector>

namespace eqf {

inline constexpr double kNeverReached = std::numeric_limits<double>::infinity();

struct ScenarioConfig {
  std::uint64_t seed = 1;
  double duration_s = 15.0;
  double gyro_rate = 100.0;
  double star_rate = 1.0;
  double vector_rate = 10.0;
  int update_iterations = 20;

  // Gains are scalar multiples of the identity.
  double gain_M = 1.0;
  double gain_N = 0.1;
  double sigma0 = 1.0;

  double gyro_noise_std = 0.01;       // rad/s
  double direction_noise_std = 0.01;  // rad

  // Magnitudes drawn uniformly in [min, max] deg/s, directions uniform on S^2.
  double omega_T_min_dps = 0.5;
  double omega_T_max_dps = 3.0;
  double u_min_dps = 0.5;
  double u_max_dps = 3.0;
  double b_min_dps = 0.5;
  double b_max_dps = 2.0;

  Stage2InputMode input_mode = Stage2InputMode::unbiased_cascade;

  // A negative angle keeps the default start (I, 0) for both filters against
  // random truth attitudes; otherwise both filters start at the truth
  // perturbed by this attitude error and vector error (random directions).
  double init_att_error_deg = -1.0;
  double init_vec_error_dps = 0.0;

  // Optional sinusoidal modulation of the chaser rate along a random axis.
  double u_sine_amplitude_dps = 0.0;
  double u_sine_freq_hz = 0.1;

  Vec3 feature_d1 = Vec3::UnitX();
  Vec3 feature_d2 = Vec3::UnitY();

  double window_start_s = 10.0;
  double window_end_s = 15.0;
  double threshold_deg = 1.0;

  /// Throws std::invalid_argument for inconsistent settings.
  void validate() const {
    sensors().validate();
    if (!(duration_s > 0.0)) throw std::invalid_argument("ScenarioConfig: duration must be positive");
    if (update_iterations < 1) throw std::invalid_argument("ScenarioConfig: update_iterations must be >= 1");
    if (!(gain_M > 0.0) || !(gain_N > 0.0) || !(sigma0 > 0.0)) {
      throw std::invalid_argument("ScenarioConfig: gains must be positive");
    }
    if (omega_T_min_dps > omega_T_max_dps || u_min_dps > u_max_dps || b_min_dps > b_max_dps ||
        omega_T_min_dps < 0.0 || u_min_dps < 0.0 || b_min_dps < 0.0) {
      throw std::invalid_argument("ScenarioConfig: magnitude ranges must satisfy 0 <= min <= max");
    }
    if (feature_d1.normalized().cross(feature_d2.normalized()).norm() <= kMinFeatureSeparation) {
      throw std::invalid_argument("ScenarioConfig: feature directions must be non-collinear");
    }
    if (window_end_s < window_start_s) throw std::invalid_argument("ScenarioConfig: empty metric window");
    if (window_end_s > duration_s + 1e-9) throw std::invalid_argument("ScenarioConfig: metric window ends after the run");
  }

  SensorConfig sensors() const {
    return {gyro_noise_std, direction_noise_std, gyro_rate, star_rate, vector_rate};
  }

  CascadeConfig cascade() const {
    CascadeConfig c;
    c.gains1.M = gain_M * Mat6::Identity();
    c.gains1.N = gain_N * Stage1Gains::OutMat::Identity();
    c.gains1.Sigma0 = sigma0 * Mat6::Identity();
    c.gains1.update_iterations = update_iterations;
    c.gains2.M = gain_M * Mat6::Identity();
    c.gains2.N = gain_N * Stage2Gains::OutMat::Identity();
    c.gains2.Sigma0 = sigma0 * Mat6::Identity();
    c.gains2.update_iterations = update_iterations;
    c.features = {feature_d1.normalized(), feature_d2.normalized()};
    c.mode = input_mode;
    return c;
  }

  bool operator==(const ScenarioConfig&) const = default;
};

/// One row of the per-tick error time series.
struct SeriesRow {
  double t = 0.0;
  double err_att_chaser_deg = 0.0;
  Vec3 err_euler_chaser_deg = Vec3::Zero();  // roll, pitch, yaw (signed)
  double err_bias_dps = 0.0;
  double err_att_rel_deg = 0.0;
  Vec3 err_euler_rel_deg = Vec3::Zero();
  double err_omega_dps = 0.0;
  double V1 = 0.0;
  double V2 = 0.0;
  double E_A_norm = 0.0;  // ||E_A - I||_F
  double E_a_norm = 0.0;
  double E_Q_norm = 0.0;
  double E_q_norm = 0.0;
};

struct AttitudeMetrics {
  Vec3 mean_deg = Vec3::Zero();  // |roll|, |pitch|, |yaw| means in the window
  Vec3 min_deg = Vec3::Zero();
  Vec3 time_to_threshold_s = Vec3::Zero();
  double mean_norm_rad = 0.0;  // geodesic error norm, window mean
};

struct VectorMetrics {
  double mean_dps = 0.0;
  double min_dps = 0.0;
  double mean_pct = 0.0;
  double min_pct = 0.0;
};

struct RunMetrics {
  std::uint64_t seed = 0;
  bool failed = false;
  std::string failure_reason;
  AttitudeMetrics chaser;
  VectorMetrics bias;
  AttitudeMetrics relative;
  VectorMetrics omega;
  double true_bias_dps = 0.0;
  double true_omega_dps = 0.0;
  double max_q_hat_norm = 0.0;
  bool gimbal_flag = false;
  std::vector<SeriesRow> series;
};

struct BatchSummary {
  std::size_t runs = 0;
  std::size_t failures = 0;
  /// Mean over non-failed runs. Time-to-threshold means skip runs that never
  /// reached the threshold; their count is in never_reached_*.
  RunMetrics mean;
  Eigen::Vector3i never_reached_chaser = Eigen::Vector3i::Zero();
  Eigen::Vector3i never_reached_relative = Eigen::Vector3i::Zero();
  std::vector<RunMetrics> per_run;
};

// ---------------------------------------------------------------------------
// Metric helpers
// ---------------------------------------------------------------------------

struct EulerError {
  Vec3 deg = Vec3::Zero();  // estimate minus truth, wrapped to (-180, 180]
  bool gimbal = false;
};

/// Wraps an angle in degrees to (-180, 180].
[[nodiscard]] inline double wrap_deg(double a) {
  double r = std::fmod(a + 180.0, 360.0);
  if (r <= 0.0) r += 360.0;
  return r - 180.0;
}

/// ZYX (yaw-pitch-roll) angles in degrees, returned as (roll, pitch, yaw).
[[nodiscard]] inline Vec3 euler_zyx_deg(const Rotation& r) {
  const double pitch = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
  const double roll = std::atan2(r(2, 1), r(2, 2));
  const double yaw = std::atan2(r(1, 0), r(0, 0));
  return Vec3(roll, pitch, yaw) / kDeg;
}

/// Per-axis ZYX Euler differences. Within 1e-6 rad of the pitch singularity
/// every axis reports the geodesic angle instead and `gimbal` is set.
[[nodiscard]] inline EulerError euler_errors(const Rotation& r_true, const Rotation& r_hat) {
  const Vec3 a = euler_zyx_deg(r_true);
  const Vec3 b = euler_zyx_deg(r_hat);
  const double limit = 90.0 - 1e-6 / kDeg;
  if (std::abs(a.y()) >= limit || std::abs(b.y()) >= limit) {
    return {Vec3::Constant(rotation_angle(r_true, r_hat) / kDeg), true};
  }
  return {Vec3(wrap_deg(b.x() - a.x()), wrap_deg(b.y() - a.y()), wrap_deg(b.z() - a.z())), false};
}

/// First time after which every sample stays below `threshold`; the first
/// sample time if all are below; kNeverReached if the last sample is not.
/// Throws std::invalid_argument on mismatched or empty input.
[[nodiscard]] inline double time_to_threshold(const std::vector<double>& t, const std::vector<double>& value,
                                              double threshold) {
  if (t.empty() || t.size() != value.size()) {
    throw std::invalid_argument("time_to_threshold: series must be non-empty and aligned");
  }
  for (std::size_t i = value.size(); i-- > 0;) {
    if (!(value[i] < threshold)) {
      return i + 1 < t.size() ? t[i + 1] : kNeverReached;
    }
  }
  return t.front();
}

[[nodiscard]] inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed of run `index` in a batch started from `master`.
[[nodiscard]] inline std::uint64_t run_seed(std::uint64_t master, std::size_t index) {
  return splitmix64(splitmix64(master) + static_cast<std::uint64_t>(index));
}

namespace detail {

template <class Urbg>
Vec3 random_vector(Urbg& rng, double min_dps, double max_dps) {
  std::uniform_real_distribution<double> mag(min_dps, max_dps);
  const Vec3 dir = random_unit_vector(rng);
  return dir * mag(rng) * kDeg;
}

inline SeriesRow make_row(const CascadeState& cs, const TruthWorld& w) {
  SeriesRow row;
  row.t = cs.t;
  const StageState s1 = recover_state1(cs.s1.X_hat);
  const StageState s2 = recover_state2(cs.s2.X_hat);
  const StageState rel = relative_state(w);

  row.err_att_chaser_deg = rotation_angle(w.R_CI, s1.rot) / kDeg;
  row.err_euler_chaser_deg = euler_errors(w.R_CI, s1.rot).deg;
  row.err_bias_dps = (s1.vec - w.b).norm() / kDeg;
  row.err_att_rel_deg = rotation_angle(rel.rot, s2.rot) / kDeg;
  row.err_euler_rel_deg = euler_errors(rel.rot, s2.rot).deg;
  row.err_omega_dps = (s2.vec - rel.vec).norm() / kDeg;

  const SymmetryElement e1 = group_error1(cs, w);
  const SymmetryElement e2 = group_error2(cs, w);
  row.E_A_norm = (e1.rot - Mat3::Identity()).norm();
  row.E_a_norm = e1.vec.norm();
  row.E_Q_norm = (e2.rot - Mat3::Identity()).norm();
  row.E_q_norm = e2.vec.norm();

  try {
    row.V1 = lyapunov_value(local_error1(cs, w), cs.s1.Sigma);
    row.V2 = lyapunov_value(local_error2(cs, w), cs.s2.Sigma);
  } catch (const std::invalid_argument&) {
    row.V1 = row.V2 = std::numeric_limits<double>::quiet_NaN();
  }
  return row;
}

inline void window_stats(const std::vector<SeriesRow>& rows, const ScenarioConfig& cfg, RunMetrics& m) {
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  std::size_t n = 0;
  Vec3 sum_c = Vec3::Zero(), sum_r = Vec3::Zero();
  Vec3 min_c = Vec3::Constant(kNeverReached), min_r = Vec3::Constant(kNeverReached);
  double sum_norm_c = 0.0, sum_norm_r = 0.0;
  double sum_b = 0.0, min_b = kNeverReached, sum_w = 0.0, min_w = kNeverReached;
  constexpr double eps = 1e-9;
  for (const SeriesRow& r : rows) {
    if (r.t < cfg.window_start_s - eps || r.t > cfg.window_end_s + eps) continue;
    ++n;
    const Vec3 ac = r.err_euler_chaser_deg.cwiseAbs();
    const Vec3 ar = r.err_euler_rel_deg.cwiseAbs();
    sum_c += ac;
    sum_r += ar;
    min_c = min_c.cwiseMin(ac);
    min_r = min_r.cwiseMin(ar);
    sum_norm_c += r.err_att_chaser_deg * kDeg;
    sum_norm_r += r.err_att_rel_deg * kDeg;
    sum_b += r.err_bias_dps;
    min_b = std::min(min_b, r.err_bias_dps);
    sum_w += r.err_omega_dps;
    min_w = std::min(min_w, r.err_omega_dps);
  }
  if (n == 0) {
    m.chaser.mean_deg = m.chaser.min_deg = m.relative.mean_deg = m.relative.min_deg = Vec3::Constant(nan);
    m.chaser.mean_norm_rad = m.relative.mean_norm_rad = nan;
    m.bias = {nan, nan, nan, nan};
    m.omega = {nan, nan, nan, nan};
    return;
  }
  const double inv = 1.0 / static_cast<double>(n);
  m.chaser.mean_deg = sum_c * inv;
  m.chaser.min_deg = min_c;
  m.chaser.mean_norm_rad = sum_norm_c * inv;
  m.relative.mean_deg = sum_r * inv;
  m.relative.min_deg = min_r;
  m.relative.mean_norm_rad = sum_norm_r * inv;
  m.bias = {sum_b * inv, min_b, 100.0 * sum_b * inv / m.true_bias_dps, 100.0 * min_b / m.true_bias_dps};
  m.omega = {sum_w * inv, min_w, 100.0 * sum_w * inv / m.true_omega_dps, 100.0 * min_w / m.true_omega_dps};
}

inline void threshold_stats(const std::vector<SeriesRow>& rows, double threshold, RunMetrics& m) {
  std::vector<double> t(rows.size());
  std::vector<double> v(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) t[i] = rows[i].t;
  for (int axis = 0; axis < 3; ++axis) {
    for (std::size_t i = 0; i < rows.size(); ++i) v[i] = std::abs(rows[i].err_euler_chaser_deg(axis));
    m.chaser.time_to_threshold_s(axis) = time_to_threshold(t, v, threshold);
    for (std::size_t i = 0; i < rows.size(); ++i) v[i] = std::abs(rows[i].err_euler_rel_deg(axis));
    m.relative.time_to_threshold_s(axis) = time_to_threshold(t, v, threshold);
  }
}

}  // namespace detail

/// Samples the truth world and the initial cascade state for `cfg`.
template <class Urbg>
[[nodiscard]] std::pair<TruthWorld, CascadeState> make_scenario(const ScenarioConfig& cfg, Urbg& rng) {
  const Rotation r_ti = random_rotation(rng);
  const Rotation r_ci = random_rotation(rng);
  const Vec3 omega_t = detail::random_vector(rng, cfg.omega_T_min_dps, cfg.omega_T_max_dps);
  const Vec3 u = detail::random_vector(rng, cfg.u_min_dps, cfg.u_max_dps);
  const Vec3 b = detail::random_vector(rng, cfg.b_min_dps, cfg.b_max_dps);
  TruthWorld world(r_ti, r_ci, omega_t, u, b, cfg.feature_d1, cfg.feature_d2);

  const CascadeConfig cc = cfg.cascade();
  CascadeState cs = make_cascade(cc);
  if (cfg.init_att_error_deg >= 0.0) {
    const auto perturb = [&](const StageState& truth) {
      const Vec3 axis = random_unit_vector(rng);
      const Vec3 dir = random_unit_vector(rng);
      return StageState{truth.rot * exp_so3(axis * cfg.init_att_error_deg * kDeg),
                        truth.vec + dir * cfg.init_vec_error_dps * kDeg};
    };
    cs.s1.X_hat = group_state_of(perturb({world.R_CI, world.b}));
    cs.s2.X_hat = group_state_of(perturb(relative_state(world)));
  }
  return {world, cs};
}

/// Runs one scenario. Deterministic in cfg.seed. Numerical failures and
/// exceptions inside the loop mark the run failed instead of propagating.
[[nodiscard]] inline RunMetrics run_single(const ScenarioConfig& cfg, bool keep_series = true) {
  cfg.validate();
  RunMetrics m;
  m.seed = cfg.seed;
  std::mt19937_64 rng(cfg.seed);

  auto [world, cs] = make_scenario(cfg, rng);
  const CascadeConfig cc = cfg.cascade();
  const Vec3 u0 = world.u;
  const Vec3 u_axis = random_unit_vector(rng);
  m.true_bias_dps = world.b.norm() / kDeg;
  m.true_omega_dps = world.omega_T.norm() / kDeg;

  const auto ticks = static_cast<long>(std::llround(cfg.duration_s * cfg.gyro_rate));
  const auto star_every = static_cast<long>(std::llround(cfg.gyro_rate / cfg.star_rate));
  const auto vec_every = static_cast<long>(std::llround(cfg.gyro_rate / cfg.vector_rate));
  const double dt = 1.0 / cfg.gyro_rate;

  std::vector<SeriesRow> rows;
  rows.reserve(static_cast<std::size_t>(ticks) + 1);
  const auto record = [&] {
    rows.push_back(detail::make_row(cs, world));
    m.max_q_hat_norm = std::max(m.max_q_hat_norm, cs.s2.X_hat.vec.norm());
    m.gimbal_flag = m.gimbal_flag || euler_errors(world.R_CI, cs.s1.X_hat.rot).gimbal ||
                    euler_errors(relative_state(world).rot, cs.s2.X_hat.rot).gimbal;
  };

  try {
    record();
    for (long k = 1; k <= ticks; ++k) {
      const double t_prev = static_cast<double>(k - 1) * dt;
      if (cfg.u_sine_amplitude_dps != 0.0) {
        world.u = u0 + u_axis * cfg.u_sine_amplitude_dps * kDeg * std::sin(2.0 * kPi * cfg.u_sine_freq_hz * t_prev);
      }
      MeasurementBundle bundle;
      bundle.gyro = measure_gyro(world, cfg.gyro_noise_std, rng);
      world = propagate_truth(world, dt);
      bundle.t = static_cast<double>(k) * dt;
      if (k % star_every == 0) bundle.star = measure_star_tracker(world, cfg.direction_noise_std, rng);
      if (k % vec_every == 0) bundle.features = measure_features(world, cfg.direction_noise_std, rng);
      cs = step(cs, bundle, cc);
      if (cs.s1.numerical_failure || cs.s2.numerical_failure) {
        m.failed = true;
        m.failure_reason = cs.s1.numerical_failure ? "stage 1 Riccati state lost positive definiteness"
                                                   : "stage 2 Riccati state lost positive definiteness";
        break;
      }
      record();
    }
  } catch (const std::exception& e) {
    m.failed = true;
    m.failure_reason = e.what();
  }

  detail::window_stats(rows, cfg, m);
  detail::threshold_stats(rows, cfg.threshold_deg, m);
  const auto finite = [](const auto& x) { return std::isfinite(x); };
  if (!m.failed && !(finite(m.chaser.mean_norm_rad) && finite(m.relative.mean_norm_rad) &&
                     finite(m.bias.mean_dps) && finite(m.omega.mean_dps))) {
    m.failed = true;
    m.failure_reason = "non-finite error metrics";
  }
  if (keep_series) m.series = std::move(rows);
  return m;
}

namespace detail {

inline void accumulate_attitude(const std::vector<const RunMetrics*>& ok, AttitudeMetrics RunMetrics::*field,
                                AttitudeMetrics& out, Eigen::Vector3i& never) {
  out = {};
  Vec3 reached_sum = Vec3::Zero();
  Eigen::Vector3i reached = Eigen::Vector3i::Zero();
  for (const RunMetrics* r : ok) {
    const AttitudeMetrics& a = r->*field;
    out.mean_deg += a.mean_deg;
    out.min_deg += a.min_deg;
    out.mean_norm_rad += a.mean_norm_rad;
    for (int i = 0; i < 3; ++i) {
      if (std::isfinite(a.time_to_threshold_s(i))) {
        reached_sum(i) += a.time_to_threshold_s(i);
        ++reached(i);
      } else {
        ++never(i);
      }
    }
  }
  const double inv = 1.0 / static_cast<double>(ok.size());
  out.mean_deg *= inv;
  out.min_deg *= inv;
  out.mean_norm_rad *= inv;
  for (int i = 0; i < 3; ++i) {
    out.time_to_threshold_s(i) = reached(i) > 0 ? reached_sum(i) / reached(i) : kNeverReached;
  }
}

inline void accumulate_vector(const std::vector<const RunMetrics*>& ok, VectorMetrics RunMetrics::*field,
                              VectorMetrics& out) {
  out = {};
  for (const RunMetrics* r : ok) {
    const VectorMetrics& v = r->*field;
    out.mean_dps += v.mean_dps;
    out.min_dps += v.min_dps;
    out.mean_pct += v.mean_pct;
    out.min_pct += v.min_pct;
  }
  const double inv = 1.0 / static_cast<double>(ok.size());
  out.mean_dps *= inv;
  out.min_dps *= inv;
  out.mean_pct *= inv;
  out.min_pct *= inv;
}

}  // namespace detail

/// Aggregates per-run metrics in index order.
[[nodiscard]] inline BatchSummary summarize(std::vector<RunMetrics> runs) {
  BatchSummary s;
  s.runs = runs.size();
  std::vector<const RunMetrics*> ok;
  for (const RunMetrics& r : runs) {
    if (r.failed) {
      ++s.failures;
    } else {
      ok.push_back(&r);
    }
  }
  if (!ok.empty()) {
    detail::accumulate_attitude(ok, &RunMetrics::chaser, s.mean.chaser, s.never_reached_chaser);
    detail::accumulate_attitude(ok, &RunMetrics::relative, s.mean.relative, s.never_reached_relative);
    detail::accumulate_vector(ok, &RunMetrics::bias, s.mean.bias);
    detail::accumulate_vector(ok, &RunMetrics::omega, s.mean.omega);
    for (const RunMetrics* r : ok) {
      s.mean.true_bias_dps += r->true_bias_dps / static_cast<double>(ok.size());
      s.mean.true_omega_dps += r->true_omega_dps / static_cast<double>(ok.size());
      s.mean.max_q_hat_norm = std::max(s.mean.max_q_hat_norm, r->max_q_hat_norm);
    }
  } else {
    s.mean.failed = true;
    s.mean.failure_reason = "all runs failed";
  }
  s.per_run = std::move(runs);
  return s;
}

/// Runs `n_runs` scenarios with seeds derived from cfg.seed. Work is spread
/// over `threads` workers (0 = hardware concurrency); results do not depend
/// on the worker count.
[[nodiscard]] inline BatchSummary run_batch(const ScenarioConfig& cfg, std::size_t n_runs, unsigned threads = 0,
                                            bool keep_series = false) {
  if (n_runs < 1) throw std::invalid_argument("run_batch: need at least one run");
  cfg.validate();
  std::vector<RunMetrics> runs(n_runs);
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < n_runs; i = next++) {
      ScenarioConfig c = cfg;
      c.seed = run_seed(cfg.seed, i);
      runs[i] = run_single(c, keep_series);
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n_runs));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
  }
  return summarize(std::move(runs));
}

}  // namespace eqf
