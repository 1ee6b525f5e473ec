// SO(3) / SE(3) primitives shared by the filters, the truth simulator and
// the Monte Carlo harness.
//
// Conventions
// -----------
// Rotation         3x3 orthonormal matrix, det +1.
// SymmetryElement  (rot, vec) with product (A1,a1)(A2,a2) = (A1 A2, A1 a2 + a1).
// AlgebraElement   (rot, vec) coordinates of se(3): rot is the so(3) vector.

#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace eqf {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Rotation = Eigen::Matrix3d;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kDeg = kPi / 180.0;

/// Below this angle exp/log switch to Taylor expansions.
inline constexpr double kSmallAngle = 1e-4;
/// Within this distance of pi the log uses the symmetric-part axis branch.
inline constexpr double kNearPi = 1e-6;
/// Orthonormality drift that triggers re-projection onto SO(3).
inline constexpr double kDriftTolerance = 1e-9;

struct SymmetryElement {
  Rotation rot = Rotation::Identity();
  Vec3 vec = Vec3::Zero();

  static SymmetryElement identity() { return {}; }
};

struct AlgebraElement {
  Vec3 rot = Vec3::Zero();
  Vec3 vec = Vec3::Zero();

  Vec6 stacked() const {
    Vec6 out;
    out << rot, vec;
    return out;
  }
  static AlgebraElement from_stacked(const Vec6& x) { return {x.head<3>(), x.tail<3>()}; }
};

/// Point of SO(3) x R^3: (R_C, b) for stage 1, (R, omega) for stage 2.
struct StageState {
  Rotation rot = Rotation::Identity();
  Vec3 vec = Vec3::Zero();
};

// ---------------------------------------------------------------------------
// so(3)
// ---------------------------------------------------------------------------

/// Cross-product matrix: wedge(x) * y == x.cross(y).
[[nodiscard]] inline Mat3 wedge(const Vec3& x) {
  Mat3 m;
  // clang-format off
  m <<    0.0, -x.z(),  x.y(),
        x.z(),    0.0, -x.x(),
       -x.y(),  x.x(),    0.0;
  // clang-format on
  return m;
}

/// Inverse of wedge. Throws std::invalid_argument when the symmetric part of
/// `m` has Frobenius norm above 1e-6.
[[nodiscard]] inline Vec3 vee(const Mat3& m) {
  if ((m + m.transpose()).norm() * 0.5 > 1e-6) {
    throw std::invalid_argument("vee: matrix is not skew-symmetric");
  }
  return Vec3(m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1)) * 0.5;
}

/// Rodrigues formula.
[[nodiscard]] inline Rotation exp_so3(const Vec3& x) {
  const double theta2 = x.squaredNorm();
  const double theta = std::sqrt(theta2);
  const Mat3 w = wedge(x);
  double a;  // sin(theta) / theta
  double b;  // (1 - cos(theta)) / theta^2
  if (theta < kSmallAngle) {
    a = 1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0;
    b = 0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
  }
  return Mat3::Identity() + a * w + b * w * w;
}

/// Logarithm of a rotation, returned as a rotation vector with norm in [0, pi].
///
/// Near pi the axis is read from the dominant column of the symmetric part.
/// Its sign follows the antisymmetric part while that is above rounding
/// level; otherwise the largest-magnitude component is made positive.
[[nodiscard]] inline Vec3 log_so3(const Rotation& r) {
  const Vec3 s(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));  // 2 sin(theta) n
  const double sin_theta = 0.5 * s.norm();
  const double cos_theta = std::clamp(0.5 * (r.trace() - 1.0), -1.0, 1.0);
  const double theta = std::atan2(sin_theta, cos_theta);

  if (theta < kSmallAngle) {
    // theta / (2 sin theta) ~ 1/2 (1 + theta^2/6)
    return 0.5 * (1.0 + theta * theta / 6.0) * s;
  }
  if (kPi - theta > 1e-3) {
    return theta / (2.0 * sin_theta) * s;
  }

  // (R + R^T)/2 = cos(theta) I + (1 - cos(theta)) n n^T
  const Mat3 nnt = (0.5 * (r + r.transpose()) - cos_theta * Mat3::Identity()) / (1.0 - cos_theta);
  Eigen::Index k = 0;
  nnt.diagonal().maxCoeff(&k);
  Vec3 n = nnt.col(k) / std::sqrt(std::max(nnt(k, k), 1e-300));
  n.normalize();
  if (kPi - theta > kNearPi || std::abs(n.dot(s)) > 1e-12) {
    if (n.dot(s) < 0.0) n = -n;
  } else {
    Eigen::Index j = 0;
    n.cwiseAbs().maxCoeff(&j);
    if (n(j) < 0.0) n = -n;
  }
  return theta * n;
}

/// Left Jacobian of SO(3), J_l(x) = sum_k wedge(x)^k / (k+1)!.
[[nodiscard]] inline Mat3 left_jacobian_so3(const Vec3& x) {
  const double theta2 = x.squaredNorm();
  const double theta = std::sqrt(theta2);
  const Mat3 w = wedge(x);
  double a;  // (1 - cos) / theta^2
  double b;  // (theta - sin) / theta^3
  if (theta < kSmallAngle) {
    a = 0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0;
    b = 1.0 / 6.0 - theta2 / 120.0 + theta2 * theta2 / 5040.0;
  } else {
    a = (1.0 - std::cos(theta)) / theta2;
    b = (theta - std::sin(theta)) / (theta2 * theta);
  }
  return Mat3::Identity() + a * w + b * w * w;
}

/// Nearest rotation in Frobenius norm (polar projection).
[[nodiscard]] inline Rotation project_to_so3(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  return svd.matrixU() * d * svd.matrixV().transpose();
}

/// Re-projects onto SO(3) only when R^T R drifted more than kDriftTolerance.
[[nodiscard]] inline Rotation renormalize(const Rotation& r) {
  if ((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() > kDriftTolerance) {
    return project_to_so3(r);
  }
  return r;
}

[[nodiscard]] inline bool is_rotation(const Mat3& r, double tol = 1e-9) {
  return r.allFinite() && (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol &&
         std::abs(r.determinant() - 1.0) <= tol;
}

/// Geodesic distance ||log(R1^T R2)|| in radians.
[[nodiscard]] inline double rotation_angle(const Rotation& r1, const Rotation& r2) {
  return log_so3(r1.transpose() * r2).norm();
}

[[nodiscard]] inline Rotation rot_x(double angle) { return exp_so3(Vec3(angle, 0.0, 0.0)); }
[[nodiscard]] inline Rotation rot_y(double angle) { return exp_so3(Vec3(0.0, angle, 0.0)); }
[[nodiscard]] inline Rotation rot_z(double angle) { return exp_so3(Vec3(0.0, 0.0, angle)); }

// ---------------------------------------------------------------------------
// SE(3) used abstractly as the symmetry group
// ---------------------------------------------------------------------------

[[nodiscard]] inline SymmetryElement group_compose(const SymmetryElement& g1, const SymmetryElement& g2) {
  return {g1.rot * g2.rot, g1.rot * g2.vec + g1.vec};
}

[[nodiscard]] inline SymmetryElement group_inverse(const SymmetryElement& g) {
  const Mat3 rt = g.rot.transpose();
  return {rt, -rt * g.vec};
}

/// Group exponential of se(3) in (rot, vec) coordinates.
[[nodiscard]] inline SymmetryElement exp_se3(const AlgebraElement& x) {
  return {exp_so3(x.rot), left_jacobian_so3(x.rot) * x.vec};
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

/// Haar-uniform rotation from a normalized 4D Gaussian quaternion.
template <class Urbg>
[[nodiscard]] Rotation random_rotation(Urbg& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Eigen::Vector4d q;
  do {
    q = Eigen::Vector4d(n01(rng), n01(rng), n01(rng), n01(rng));
  } while (q.norm() < 1e-12);
  q.normalize();
  return Eigen::Quaterniond(q(0), q(1), q(2), q(3)).toRotationMatrix();
}

/// Uniform direction on the unit sphere.
template <class Urbg>
[[nodiscard]] Vec3 random_unit_vector(Urbg& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Vec3 v;
  do {
    v = Vec3(n01(rng), n01(rng), n01(rng));
  } while (v.norm() < 1e-12);
  return v.normalized();
}

}  // namespace eqf
