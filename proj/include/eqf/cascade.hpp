// Two-stage cascade: the stage-1 bias estimate is removed from the gyro
// signal before it drives stage 2. Also holds the truth-based diagnostics
// (local-coordinate errors, Lyapunov values, the bias perturbation term)
// used only by the simulator.

#pragma once

#include "eqf/eqf_stage1.hpp"
#include "eqf/eqf_stage2.hpp"
#include "eqf/models.hpp"

#include <stdexcept>

namespace eqf {

enum class Stage2InputMode {
  unbiased_cascade,    // u_bar - b_hat
  biased_passthrough,  // u_bar, stage-1 bias ignored
};

struct CascadeConfig {
  Stage1Gains gains1;
  Stage2Gains gains2;
  FeatureReference features;
  Stage2InputMode mode = Stage2InputMode::unbiased_cascade;
};

struct CascadeState {
  Stage1Estimate s1;
  Stage2Estimate s2;
  double t = 0.0;
  double last_star_t = 0.0;
  double last_feature_t = 0.0;
  /// Input fed to stage 2 on the last step.
  Vec3 last_stage2_input = Vec3::Zero();
};

struct ErrorVector {
  Vec3 eps_rot = Vec3::Zero();
  Vec3 eps_vec = Vec3::Zero();

  Vec6 stacked() const {
    Vec6 out;
    out << eps_rot, eps_vec;
    return out;
  }
  double norm() const { return stacked().norm(); }
};

[[nodiscard]] inline CascadeState make_cascade(const CascadeConfig& cfg, double t0 = 0.0) {
  return {make_stage1_estimate(cfg.gains1), make_stage2_estimate(cfg.gains2), t0, t0, t0, Vec3::Zero()};
}

/// One gyro tick: stage 1 predict (+ update), then stage 2 predict (+ update)
/// with the post-update bias estimate. Throws std::invalid_argument when
/// m.t precedes the state time.
[[nodiscard]] inline CascadeState step(const CascadeState& cs, const MeasurementBundle& m, const CascadeConfig& cfg) {
  if (!(m.t >= cs.t)) throw std::invalid_argument("cascade step: non-monotone timestamp");
  CascadeState out = cs;
  out.t = m.t;
  const double dt = m.t - cs.t;

  if (dt > 0.0) out.s1 = predict1(out.s1, m.gyro, cfg.gains1, dt);
  if (m.star) {
    if (m.t > cs.last_star_t) out.s1 = update1(out.s1, *m.star, cfg.gains1, m.t - cs.last_star_t);
    out.last_star_t = m.t;
  }

  const Vec3 b_hat = recover_state1(out.s1.X_hat).vec;
  out.last_stage2_input = cfg.mode == Stage2InputMode::unbiased_cascade ? Vec3(m.gyro - b_hat) : m.gyro;

  if (dt > 0.0) out.s2 = predict2(out.s2, out.last_stage2_input, cfg.gains2, dt);
  if (m.features) {
    if (m.t > cs.last_feature_t) {
      out.s2 = update2(out.s2, *m.features, cfg.gains2, m.t - cs.last_feature_t, cfg.features);
    }
    out.last_feature_t = m.t;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Simulation-only diagnostics
// ---------------------------------------------------------------------------

/// Group element whose action on the origin gives (rot, vec): (rot, -rot vec).
[[nodiscard]] inline SymmetryElement group_state_of(const StageState& xi) { return {xi.rot, -xi.rot * xi.vec}; }

/// E = X X_hat^-1, e = phi(E, origin), eps = (log(e_rot), e_vec).
[[nodiscard]] inline ErrorVector local_error(const SymmetryElement& x_true, const SymmetryElement& x_hat) {
  const SymmetryElement e = group_compose(x_true, group_inverse(x_hat));
  return {log_so3(e.rot), -e.rot.transpose() * e.vec};
}

[[nodiscard]] inline SymmetryElement group_error1(const CascadeState& cs, const TruthWorld& w) {
  return group_compose(group_state_of({w.R_CI, w.b}), group_inverse(cs.s1.X_hat));
}

[[nodiscard]] inline SymmetryElement group_error2(const CascadeState& cs, const TruthWorld& w) {
  return group_compose(group_state_of(relative_state(w)), group_inverse(cs.s2.X_hat));
}

[[nodiscard]] inline ErrorVector local_error1(const CascadeState& cs, const TruthWorld& w) {
  return local_error(group_state_of({w.R_CI, w.b}), cs.s1.X_hat);
}

[[nodiscard]] inline ErrorVector local_error2(const CascadeState& cs, const TruthWorld& w) {
  return local_error(group_state_of(relative_state(w)), cs.s2.X_hat);
}

/// Perturbation of the stage-2 error dynamics caused by the stage-1 bias
/// error: ((Q A^T eps_b)^, q^ Q A^T eps_b).
[[nodiscard]] inline AlgebraElement gamma_term(const Rotation& a_hat, const Rotation& q_hat, const Vec3& q_vec_hat,
                                               const Vec3& eps_b) {
  const Vec3 p = q_hat * a_hat.transpose() * eps_b;
  return {p, q_vec_hat.cross(p)};
}

/// eps^T Sigma^-1 eps. Throws std::invalid_argument if Sigma is not SPD.
[[nodiscard]] inline double lyapunov_value(const ErrorVector& eps, const RiccatiState& sigma) {
  const Eigen::LLT<Mat6> llt(sigma);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("lyapunov_value: Sigma must be SPD");
  const Vec6 e = eps.stacked();
  return e.dot(llt.solve(e));
}

}  // namespace eqf
