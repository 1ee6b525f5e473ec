// Second-stage equivariant filter: relative attitude R (chaser w.r.t.
// target) and target angular velocity omega (chaser frame) from the
// chaser rate u and two target-fixed feature directions R^T d_i.
//
// The system is extended with virtual inputs (v, w) to make it
// equivariant; production call sites pass v = w = 0.
//   phi((Q,q), (R,omega))  = (R Q, Q^T (omega - q))
//   psi((Q,q), (u,v,w))    = (Q^T u, Q^T (v - q), Q^T (w + q))
//   rho((Q,q), y)          = Q^T y
//   Lambda((R,omega),(u,v,w)) = (u - omega + v, u x w + omega x v)

#pragma once

#include "eqf/eqf_core.hpp"
#include "eqf/models.hpp"

namespace eqf {

using Stage2Estimate = FilterEstimate;
using Stage2Gains = FilterGains<6>;

inline const StageState kOrigin2{Rotation::Identity(), Vec3::Zero()};

struct Stage2Input {
  Vec3 u = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Vec3 w = Vec3::Zero();
};

/// Target-fixed feature directions known to the filter.
struct FeatureReference {
  Vec3 d1 = Vec3::UnitX();
  Vec3 d2 = Vec3::UnitY();
};

[[nodiscard]] inline StageState state_action2(const SymmetryElement& g, const StageState& xi) {
  return {xi.rot * g.rot, g.rot.transpose() * (xi.vec - g.vec)};
}

[[nodiscard]] inline Stage2Input input_action2(const SymmetryElement& g, const Stage2Input& in) {
  const Mat3 qt = g.rot.transpose();
  return {qt * in.u, qt * (in.v - g.vec), qt * (in.w + g.vec)};
}

[[nodiscard]] inline FeatureMeasurement output_action2(const SymmetryElement& g, const FeatureMeasurement& y) {
  const Mat3 qt = g.rot.transpose();
  return {qt * y[0], qt * y[1]};
}

[[nodiscard]] inline FeatureMeasurement output2(const StageState& xi, const FeatureReference& ref) {
  return {xi.rot.transpose() * ref.d1, xi.rot.transpose() * ref.d2};
}

/// Extended vector field (R (u - omega + v)^, omega x u - u x w); equals the
/// physical system (R (u - omega)^, omega x u) when v = w = 0.
struct Stage2Tangent {
  Mat3 rot_dot;
  Vec3 vec_dot;
};
[[nodiscard]] inline Stage2Tangent dynamics2(const StageState& xi, const Stage2Input& in) {
  return {xi.rot * wedge(in.u - xi.vec + in.v), xi.vec.cross(in.u) - in.u.cross(in.w)};
}

[[nodiscard]] inline AlgebraElement lift2(const StageState& xi, const Stage2Input& in) {
  return {in.u - xi.vec + in.v, in.u.cross(in.w) + xi.vec.cross(in.v)};
}

/// (R, omega) = (Q, -Q^T q).
[[nodiscard]] inline StageState recover_state2(const SymmetryElement& x_hat) {
  return {x_hat.rot, -x_hat.rot.transpose() * x_hat.vec};
}

/// [[0, -I], [0, q^]].
[[nodiscard]] inline Mat6 a_matrix2(const SymmetryElement& x_hat) {
  Mat6 a = Mat6::Zero();
  a.block<3, 3>(0, 3) = -Mat3::Identity();
  a.block<3, 3>(3, 3) = wedge(x_hat.vec);
  return a;
}

[[nodiscard]] inline Eigen::Matrix<double, 6, 6> c_matrix2(const FeatureMeasurement& y,
                                                           const FeatureMeasurement& y_hat, const Rotation& q_hat) {
  return vector_output_matrix(y, y_hat, q_hat);
}

struct Stage2Model {
  using Input = Stage2Input;
  using Output = FeatureMeasurement;
  static constexpr std::size_t kOutputs = 2;

  FeatureReference reference;

  StageState recover(const SymmetryElement& x) const { return recover_state2(x); }
  AlgebraElement lift(const StageState& xi, const Input& in) const { return lift2(xi, in); }
  Mat6 a_matrix(const SymmetryElement& x, const Input&) const { return a_matrix2(x); }
  Output output(const StageState& xi) const { return output2(xi, reference); }
};

[[nodiscard]] inline Stage2Estimate make_stage2_estimate(const Stage2Gains& gains) {
  return {SymmetryElement::identity(), gains.Sigma0, false};
}

[[nodiscard]] inline Stage2Estimate predict2(const Stage2Estimate& est, const Stage2Input& in,
                                             const Stage2Gains& gains, double dt) {
  return eqf_predict(Stage2Model{}, est, in, gains.M, dt);
}

/// Production prediction: virtual inputs fixed to zero.
[[nodiscard]] inline Stage2Estimate predict2(const Stage2Estimate& est, const Vec3& u, const Stage2Gains& gains,
                                             double dt) {
  return predict2(est, Stage2Input{u, Vec3::Zero(), Vec3::Zero()}, gains, dt);
}

[[nodiscard]] inline Stage2Estimate update2(const Stage2Estimate& est, const FeatureMeasurement& y,
                                            const Stage2Gains& gains, double dt_update,
                                            const FeatureReference& ref = {}) {
  return eqf_update(Stage2Model{ref}, est, y, gains, dt_update);
}

}  // namespace eqf
