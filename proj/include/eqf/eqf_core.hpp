// Machinery shared by both equivariant filters: Riccati state handling,
// gains, correction application and the generic predict/update loop.
//
// Both stages use G = SE(3) with a state action of the form
//   phi((A,a), (R,x)) = (R A, A^T (x - a))
// and the origin (I, 0). The differential of phi at the origin maps
// (Delta_A, delta_a) to (Delta_A, -delta_a), so a correction vector
// delta = (delta_rot, delta_vec) in local coordinates corresponds to the
// algebra element (delta_rot, -delta_vec).

#pragma once

#include "eqf/geom.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <array>
#include <stdexcept>

namespace eqf {

/// Symmetric positive-definite 6x6 matrix driving the correction gain.
using RiccatiState = Mat6;

[[nodiscard]] inline Mat6 symmetrize(const Mat6& m) { return 0.5 * (m + m.transpose()); }

template <class Derived>
[[nodiscard]] bool is_spd(const Eigen::MatrixBase<Derived>& m, double min_eigenvalue = 0.0) {
  if (!m.allFinite()) return false;
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-9 * std::max(1.0, m.cwiseAbs().maxCoeff())) return false;
  using Plain = typename Derived::PlainObject;
  Eigen::SelfAdjointEigenSolver<Plain> es(m.eval(), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() > min_eigenvalue;
}

/// Constant tuning of one filter stage. OutDim is the stacked output size.
template <int OutDim>
struct FilterGains {
  using OutMat = Eigen::Matrix<double, OutDim, OutDim>;

  Mat6 M = Mat6::Identity();
  OutMat N = 0.1 * OutMat::Identity();
  Mat6 Sigma0 = Mat6::Identity();
  int update_iterations = 20;

  /// Throws std::invalid_argument on non-SPD matrices or a zero iteration count.
  void validate() const {
    if (!is_spd(M) || !is_spd(Sigma0)) {
      throw std::invalid_argument("FilterGains: M and Sigma0 must be symmetric positive definite");
    }
    if (!is_spd(N)) {
      throw std::invalid_argument("FilterGains: N must be symmetric positive definite");
    }
    if (update_iterations < 1) {
      throw std::invalid_argument("FilterGains: update_iterations must be >= 1");
    }
  }
};

struct FilterEstimate {
  SymmetryElement X_hat;
  RiccatiState Sigma = Mat6::Identity();
  /// Set once Sigma stops being SPD or the group state becomes non-finite.
  bool numerical_failure = false;
};

/// Sigma + (A Sigma + Sigma A^T + M) dt.
[[nodiscard]] inline Mat6 riccati_predict(const Mat6& sigma, const Mat6& a, const Mat6& m, double dt) {
  return symmetrize(sigma + (a * sigma + sigma * a.transpose() + m) * dt);
}

/// Exact flow of dSigma/dt = -Sigma C^T N^-1 C Sigma over tau, written in
/// Woodbury form: Sigma - Sigma C^T (N/tau + C Sigma C^T)^-1 C Sigma.
template <int OutDim>
[[nodiscard]] Mat6 riccati_correct(const Mat6& sigma, const Eigen::Matrix<double, OutDim, 6>& c,
                                   const Eigen::Matrix<double, OutDim, OutDim>& n, double tau) {
  const Eigen::Matrix<double, OutDim, 6> cs = c * sigma;
  const Eigen::Matrix<double, OutDim, OutDim> s = n / tau + cs * c.transpose();
  return symmetrize(sigma - cs.transpose() * s.ldlt().solve(cs));
}

/// Integrates dX/dt = (Delta_A X, Delta_A x + delta_a) over tau, i.e. left
/// multiplication by exp(tau (delta_rot, -delta_vec)).
[[nodiscard]] inline SymmetryElement apply_correction(const SymmetryElement& x, const Vec6& delta, double tau) {
  const AlgebraElement step{delta.head<3>() * tau, -delta.tail<3>() * tau};
  SymmetryElement out = group_compose(exp_se3(step), x);
  out.rot = renormalize(out.rot);
  return out;
}

/// Lifted flow with the lift held constant over dt: X exp(dt Lambda).
[[nodiscard]] inline SymmetryElement integrate_lift(const SymmetryElement& x, const AlgebraElement& lift,
                                                    double dt) {
  SymmetryElement out = group_compose(x, exp_se3({lift.rot * dt, lift.vec * dt}));
  out.rot = renormalize(out.rot);
  return out;
}

inline void check_health(FilterEstimate& est) {
  if (!est.X_hat.rot.allFinite() || !est.X_hat.vec.allFinite() || !is_spd(est.Sigma)) {
    est.numerical_failure = true;
  }
}

template <std::size_t K>
[[nodiscard]] Eigen::Matrix<double, 3 * K, 1> stack(const std::array<Vec3, K>& y) {
  Eigen::Matrix<double, 3 * K, 1> out;
  for (std::size_t i = 0; i < K; ++i) out.template segment<3>(3 * i) = y[i];
  return out;
}

/// Output C matrix shared by both stages:
/// block row i = 1/2 wedge(y_i + yhat_i) Rhat^T, zero velocity columns.
template <std::size_t K>
[[nodiscard]] Eigen::Matrix<double, 3 * K, 6> vector_output_matrix(const std::array<Vec3, K>& y,
                                                                   const std::array<Vec3, K>& y_hat,
                                                                   const Rotation& rot_hat) {
  Eigen::Matrix<double, 3 * K, 6> c = Eigen::Matrix<double, 3 * K, 6>::Zero();
  for (std::size_t i = 0; i < K; ++i) {
    c.template block<3, 3>(3 * i, 0) = 0.5 * wedge(y[i] + y_hat[i]) * rot_hat.transpose();
  }
  return c;
}

// ---------------------------------------------------------------------------
// Generic predict / iterated update. `Model` supplies
//   Input, Output, kOutputs
//   recover(X) -> StageState
//   lift(StageState, Input) -> AlgebraElement
//   a_matrix(X, Input) -> Mat6
//   output(StageState) -> Output
// ---------------------------------------------------------------------------

template <class Model>
[[nodiscard]] FilterEstimate eqf_predict(const Model& model, const FilterEstimate& est,
                                         const typename Model::Input& input, const Mat6& m, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("predict: dt must be positive");
  FilterEstimate out = est;
  const Mat6 a = model.a_matrix(est.X_hat, input);
  out.X_hat = integrate_lift(est.X_hat, model.lift(model.recover(est.X_hat), input), dt);
  out.Sigma = riccati_predict(est.Sigma, a, m, dt);
  check_health(out);
  return out;
}

/// Holds the measurement fixed and integrates the correction dynamics over
/// dt_update in update_iterations equal sub-steps, re-linearizing each time.
template <class Model, int OutDim>
[[nodiscard]] FilterEstimate eqf_update(const Model& model, const FilterEstimate& est,
                                        const typename Model::Output& y, const FilterGains<OutDim>& gains,
                                        double dt_update) {
  static_assert(OutDim == 3 * static_cast<int>(Model::kOutputs));
  if (!(dt_update > 0.0)) throw std::invalid_argument("update: dt_update must be positive");
  const Eigen::LDLT<Eigen::Matrix<double, OutDim, OutDim>> n_ldlt(gains.N);
  if (n_ldlt.info() != Eigen::Success || !n_ldlt.isPositive() || n_ldlt.vectorD().minCoeff() <= 0.0) {
    throw std::invalid_argument("update: N must be positive definite");
  }
  const double tau = dt_update / gains.update_iterations;
  const Eigen::Matrix<double, OutDim, 1> y_stacked = stack(y);

  FilterEstimate out = est;
  for (int k = 0; k < gains.update_iterations; ++k) {
    const auto y_hat = model.output(model.recover(out.X_hat));
    const Eigen::Matrix<double, OutDim, 6> c = vector_output_matrix(y, y_hat, out.X_hat.rot);
    const Eigen::Matrix<double, OutDim, 1> residual = y_stacked - stack(y_hat);
    const Vec6 delta = out.Sigma * c.transpose() * n_ldlt.solve(residual);
    out.X_hat = apply_correction(out.X_hat, delta, tau);
    out.Sigma = riccati_correct<OutDim>(out.Sigma, c, gains.N, tau);
    check_health(out);
    if (out.numerical_failure) break;
  }
  return out;
}

}  // namespace eqf
