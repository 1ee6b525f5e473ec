// First-stage equivariant filter: chaser attitude R_C and gyro bias b from
// the biased gyro signal u_bar and star-tracker directions R_C^T e_i.
//
// State (R_C, b), group state (A, a), origin (I, 0):
//   phi((A,a), (R_C,b)) = (R_C A, A^T (b - a))
//   psi((A,a), u_bar)   = A^T (u_bar - a)
//   rho((A,a), y)       = A^T y
//   Lambda((R_C,b), u_bar) = ((u_bar - b), -u_bar x b)

#pragma once

#include "eqf/eqf_core.hpp"
#include "eqf/models.hpp"

namespace eqf {

using Stage1Estimate = FilterEstimate;
using Stage1Gains = FilterGains<9>;

/// Origin of the stage-1 coordinate system.
inline const StageState kOrigin1{Rotation::Identity(), Vec3::Zero()};

[[nodiscard]] inline StageState state_action1(const SymmetryElement& g, const StageState& xi) {
  return {xi.rot * g.rot, g.rot.transpose() * (xi.vec - g.vec)};
}

[[nodiscard]] inline Vec3 input_action1(const SymmetryElement& g, const Vec3& u_bar) {
  return g.rot.transpose() * (u_bar - g.vec);
}

[[nodiscard]] inline StarMeasurement output_action1(const SymmetryElement& g, const StarMeasurement& y) {
  const Mat3 at = g.rot.transpose();
  return {at * y[0], at * y[1], at * y[2]};
}

/// Star-tracker output model (R_C^T e_1, R_C^T e_2, R_C^T e_3).
[[nodiscard]] inline StarMeasurement output1(const StageState& xi) {
  return {xi.rot.row(0).transpose(), xi.rot.row(1).transpose(), xi.rot.row(2).transpose()};
}

/// System vector field f1: (R_C (u_bar - b)^, 0) as (matrix derivative, bias derivative).
struct Stage1Tangent {
  Mat3 rot_dot;
  Vec3 vec_dot;
};
[[nodiscard]] inline Stage1Tangent dynamics1(const StageState& xi, const Vec3& u_bar) {
  return {xi.rot * wedge(u_bar - xi.vec), Vec3::Zero()};
}

[[nodiscard]] inline AlgebraElement lift1(const StageState& xi, const Vec3& u_bar) {
  return {u_bar - xi.vec, -u_bar.cross(xi.vec)};
}

/// (R_C, b) = (A, -A^T a).
[[nodiscard]] inline StageState recover_state1(const SymmetryElement& x_hat) {
  return {x_hat.rot, -x_hat.rot.transpose() * x_hat.vec};
}

/// [[0, -I], [0, (A u_bar + a)^]].
[[nodiscard]] inline Mat6 a_matrix1(const SymmetryElement& x_hat, const Vec3& u_bar) {
  Mat6 a = Mat6::Zero();
  a.block<3, 3>(0, 3) = -Mat3::Identity();
  a.block<3, 3>(3, 3) = wedge(x_hat.rot * u_bar + x_hat.vec);
  return a;
}

[[nodiscard]] inline Eigen::Matrix<double, 9, 6> c_matrix1(const StarMeasurement& y, const StarMeasurement& y_hat,
                                                           const Rotation& a_hat) {
  return vector_output_matrix(y, y_hat, a_hat);
}

struct Stage1Model {
  using Input = Vec3;
  using Output = StarMeasurement;
  static constexpr std::size_t kOutputs = 3;

  StageState recover(const SymmetryElement& x) const { return recover_state1(x); }
  AlgebraElement lift(const StageState& xi, const Input& u_bar) const { return lift1(xi, u_bar); }
  Mat6 a_matrix(const SymmetryElement& x, const Input& u_bar) const { return a_matrix1(x, u_bar); }
  Output output(const StageState& xi) const { return output1(xi); }
};

[[nodiscard]] inline Stage1Estimate make_stage1_estimate(const Stage1Gains& gains) {
  return {SymmetryElement::identity(), gains.Sigma0, false};
}

[[nodiscard]] inline Stage1Estimate predict1(const Stage1Estimate& est, const Vec3& u_bar, const Stage1Gains& gains,
                                             double dt) {
  return eqf_predict(Stage1Model{}, est, u_bar, gains.M, dt);
}

[[nodiscard]] inline Stage1Estimate update1(const Stage1Estimate& est, const StarMeasurement& y,
                                            const Stage1Gains& gains, double dt_update) {
  return eqf_update(Stage1Model{}, est, y, gains, dt_update);
}

}  // namespace eqf
