// Ground-truth chaser/target kinematics and the noisy sensor models
// (gyroscope, star tracker, body-fixed feature directions).

#pragma once

#include "eqf/geom.hpp"

#include <array>
#include <optional>
#include <random>
#include <stdexcept>

namespace eqf {

using StarMeasurement = std::array<Vec3, 3>;
using FeatureMeasurement = std::array<Vec3, 2>;

/// Minimum |d1 x d2| for the target feature directions.
inline constexpr double kMinFeatureSeparation = 1e-3;

/// Simulator ground truth. Rotations map body to inertial coordinates.
class TruthWorld {
 public:
  Rotation R_TI = Rotation::Identity();  // target attitude
  Rotation R_CI = Rotation::Identity();  // chaser attitude (R_C)
  Vec3 omega_T = Vec3::Zero();           // target angular velocity, target frame [rad/s]
  Vec3 u = Vec3::Zero();                 // chaser angular velocity, chaser frame [rad/s]
  Vec3 b = Vec3::Zero();                 // gyro bias [rad/s]
  Vec3 d1 = Vec3::UnitX();               // feature directions, target frame
  Vec3 d2 = Vec3::UnitY();

  TruthWorld() = default;

  /// Throws std::invalid_argument for invalid rotations or collinear features.
  TruthWorld(const Rotation& target_attitude, const Rotation& chaser_attitude, const Vec3& target_rate,
             const Vec3& chaser_rate, const Vec3& gyro_bias, const Vec3& feature1, const Vec3& feature2)
      : R_TI(target_attitude),
        R_CI(chaser_attitude),
        omega_T(target_rate),
        u(chaser_rate),
        b(gyro_bias),
        d1(feature1.normalized()),
        d2(feature2.normalized()) {
    if (!is_rotation(R_TI) || !is_rotation(R_CI)) {
      throw std::invalid_argument("TruthWorld: attitudes must be rotation matrices");
    }
    if (!feature1.allFinite() || !feature2.allFinite() || feature1.norm() < 1e-12 || feature2.norm() < 1e-12 ||
        d1.cross(d2).norm() <= kMinFeatureSeparation) {
      throw std::invalid_argument("TruthWorld: feature directions must be non-collinear");
    }
  }
};

struct SensorConfig {
  double gyro_noise_std = 0.01;       // rad/s
  double direction_noise_std = 0.01;  // rad
  double gyro_rate = 100.0;           // Hz
  double star_rate = 1.0;             // Hz
  double vector_rate = 10.0;          // Hz

  /// Throws std::invalid_argument when a field is out of range.
  void validate() const {
    if (gyro_noise_std < 0.0 || direction_noise_std < 0.0) {
      throw std::invalid_argument("SensorConfig: noise standard deviations must be non-negative");
    }
    if (!(gyro_rate > 0.0) || !(star_rate > 0.0) || !(vector_rate > 0.0)) {
      throw std::invalid_argument("SensorConfig: rates must be positive");
    }
    for (double rate : {star_rate, vector_rate}) {
      const double ratio = gyro_rate / rate;
      if (ratio < 1.0 - 1e-9 || std::abs(ratio - std::round(ratio)) > 1e-9) {
        throw std::invalid_argument("SensorConfig: measurement rates must divide the gyro rate");
      }
    }
  }
};

struct MeasurementBundle {
  double t = 0.0;
  Vec3 gyro = Vec3::Zero();
  std::optional<StarMeasurement> star;
  std::optional<FeatureMeasurement> features;
};

/// Exact flow over `dt` with constant angular velocities.
[[nodiscard]] inline TruthWorld propagate_truth(const TruthWorld& w, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("propagate_truth: dt must be positive");
  TruthWorld next = w;
  next.R_TI = renormalize(w.R_TI * exp_so3(w.omega_T * dt));
  next.R_CI = renormalize(w.R_CI * exp_so3(w.u * dt));
  return next;
}

/// Chaser attitude relative to the target and the target rate in the chaser frame.
[[nodiscard]] inline StageState relative_state(const TruthWorld& w) {
  const Rotation r = w.R_TI.transpose() * w.R_CI;
  return {r, r.transpose() * w.omega_T};
}

template <class Urbg>
[[nodiscard]] Vec3 measure_gyro(const TruthWorld& w, double noise_std, Urbg& rng) {
  Vec3 out = w.u + w.b;
  if (noise_std > 0.0) {
    std::normal_distribution<double> n(0.0, noise_std);
    out += Vec3(n(rng), n(rng), n(rng));
  }
  return out;
}

/// Rotates `v` about a uniformly distributed axis by a N(0, sigma^2) angle.
template <class Urbg>
[[nodiscard]] Vec3 perturb_direction(const Vec3& v, double sigma, Urbg& rng) {
  if (sigma <= 0.0) return v;
  const Vec3 axis = random_unit_vector(rng);
  std::normal_distribution<double> n(0.0, sigma);
  return (exp_so3(n(rng) * axis) * v).normalized();
}

template <class Urbg>
[[nodiscard]] StarMeasurement measure_star_tracker(const TruthWorld& w, double sigma, Urbg& rng) {
  StarMeasurement y;
  for (int i = 0; i < 3; ++i) {
    y[i] = perturb_direction(Vec3(w.R_CI.row(i).transpose()), sigma, rng);  // R_C^T e_i
  }
  return y;
}

template <class Urbg>
[[nodiscard]] FeatureMeasurement measure_features(const TruthWorld& w, double sigma, Urbg& rng) {
  const Rotation r = relative_state(w).rot;
  return {perturb_direction(Vec3(r.transpose() * w.d1), sigma, rng),
          perturb_direction(Vec3(r.transpose() * w.d2), sigma, rng)};
}

}  // namespace eqf
