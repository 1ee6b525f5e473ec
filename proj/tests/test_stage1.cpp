#include "eqf/eqf_stage1.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace eqf;

namespace {

SymmetryElement random_group(std::mt19937_64& rng, double vec_scale = 0.05) {
  return {oracle::random_rotation(rng), oracle::random_vec(rng, vec_scale)};
}

StageState random_state(std::mt19937_64& rng) { return {oracle::random_rotation(rng), oracle::random_vec(rng, 0.05)}; }

bool near(const StageState& a, const StageState& b, double tol) {
  return (a.rot - b.rot).cwiseAbs().maxCoeff() <= tol && (a.vec - b.vec).cwiseAbs().maxCoeff() <= tol;
}

// Local error of a true state relative to an estimate: phi(X_hat^-1, xi).
Vec6 oracle_error(const StageState& xi, const SymmetryElement& x_hat) {
  const Mat3 e_rot = xi.rot * x_hat.rot.transpose();
  Vec6 out;
  out << log_so3(e_rot), x_hat.rot * xi.vec + x_hat.vec;
  return out;
}

// True state with local error eps relative to x_hat.
StageState from_error(const Vec6& eps, const SymmetryElement& x_hat) {
  return state_action1(x_hat, {exp_so3(eps.head<3>()), eps.tail<3>()});
}

SymmetryElement flow_lift(const SymmetryElement& x, const AlgebraElement& lift, double t) {
  const Eigen::Matrix4d g = oracle::homogeneous(x.rot, x.vec) * oracle::expm(oracle::algebra_matrix(lift.rot * t, lift.vec * t));
  return {g.topLeftCorner<3, 3>(), g.topRightCorner<3, 1>()};
}

StarMeasurement rows_of(const Rotation& r) {
  return {r.row(0).transpose(), r.row(1).transpose(), r.row(2).transpose()};
}

}  // namespace

TEST(Stage1Actions, RightActionAxioms) {
  std::mt19937_64 rng(101);
  for (int i = 0; i < 50; ++i) {
    const SymmetryElement g1 = random_group(rng), g2 = random_group(rng);
    const StageState xi = random_state(rng);
    EXPECT_TRUE(near(state_action1(SymmetryElement::identity(), xi), xi, 0.0));
    EXPECT_TRUE(near(state_action1(g2, state_action1(g1, xi)), state_action1(group_compose(g1, g2), xi), 1e-12));

    const Vec3 u = oracle::random_vec(rng, 0.1);
    EXPECT_LT((input_action1(g2, input_action1(g1, u)) - input_action1(group_compose(g1, g2), u)).norm(), 1e-12);

    const StarMeasurement y = rows_of(oracle::random_rotation(rng));
    const auto lhs = output_action1(g2, output_action1(g1, y));
    const auto rhs = output_action1(group_compose(g1, g2), y);
    for (int k = 0; k < 3; ++k) EXPECT_LT((lhs[k] - rhs[k]).norm(), 1e-12);
  }
}

TEST(Stage1Actions, OutputEquivariance) {
  std::mt19937_64 rng(102);
  for (int i = 0; i < 50; ++i) {
    const SymmetryElement g = random_group(rng);
    const StageState xi = random_state(rng);
    const auto lhs = output1(state_action1(g, xi));
    const auto rhs = output_action1(g, output1(xi));
    for (int k = 0; k < 3; ++k) EXPECT_LT((lhs[k] - rhs[k]).norm(), 1e-12);
  }
}

TEST(Stage1Actions, OutputIsStarTrackerModel) {
  const Rotation r = rot_z(0.3) * rot_x(1.1);
  const auto y = output1({r, Vec3::Zero()});
  for (int k = 0; k < 3; ++k) EXPECT_LT((y[k] - r.transpose() * Vec3::Unit(k)).norm(), 1e-15);
}

TEST(Stage1System, EquivarianceByPushforward) {
  std::mt19937_64 rng(103);
  for (int i = 0; i < 50; ++i) {
    const SymmetryElement g = random_group(rng);
    const StageState xi = random_state(rng);
    const Vec3 u = oracle::random_vec(rng, 0.1);
    const Stage1Tangent f = dynamics1(xi, u);
    const double h = 1e-6;
    const StageState plus = state_action1(g, {xi.rot + h * f.rot_dot, xi.vec + h * f.vec_dot});
    const StageState minus = state_action1(g, {xi.rot - h * f.rot_dot, xi.vec - h * f.vec_dot});
    const Stage1Tangent pushed{(plus.rot - minus.rot) / (2 * h), (plus.vec - minus.vec) / (2 * h)};
    const Stage1Tangent direct = dynamics1(state_action1(g, xi), input_action1(g, u));
    EXPECT_LT((pushed.rot_dot - direct.rot_dot).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_LT((pushed.vec_dot - direct.vec_dot).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(Stage1System, LiftCompatibility) {
  std::mt19937_64 rng(104);
  for (int i = 0; i < 50; ++i) {
    const StageState xi = random_state(rng);
    const Vec3 u = oracle::random_vec(rng, 0.1);
    const AlgebraElement lam = lift1(xi, u);
    const double h = 1e-5;
    const StageState plus = state_action1(flow_lift(SymmetryElement::identity(), lam, h), xi);
    const StageState minus = state_action1(flow_lift(SymmetryElement::identity(), lam, -h), xi);
    const Stage1Tangent f = dynamics1(xi, u);
    EXPECT_LT(((plus.rot - minus.rot) / (2 * h) - f.rot_dot).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_LT(((plus.vec - minus.vec) / (2 * h) - f.vec_dot).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(Stage1System, RecoverStateIsActionOnOrigin) {
  std::mt19937_64 rng(105);
  for (int i = 0; i < 20; ++i) {
    const SymmetryElement g = random_group(rng);
    EXPECT_TRUE(near(recover_state1(g), state_action1(g, kOrigin1), 1e-15));
  }
}

TEST(Stage1Linearization, StateMatrixMatchesErrorFlow) {
  std::mt19937_64 rng(106);
  for (int trial = 0; trial < 10; ++trial) {
    const SymmetryElement x_hat = random_group(rng);
    const Vec3 u_bar = oracle::random_vec(rng, 0.1);
    const AlgebraElement lam = lift1(recover_state1(x_hat), u_bar);
    const double dt = 1e-4;

    const std::function<Vec6(const Vec6&)> eps_dot = [&](const Vec6& eps0) -> Vec6 {
      const StageState xi = from_error(eps0, x_hat);
      const oracle::Pair p{xi.rot, xi.vec};
      const auto fwd = oracle::rk4(p, oracle::chaser_kinematics(u_bar), dt, 4);
      const auto bwd = oracle::rk4(p, oracle::chaser_kinematics(u_bar), -dt, 4);
      const Vec6 ep = oracle_error({fwd.R, fwd.x}, flow_lift(x_hat, lam, dt));
      const Vec6 em = oracle_error({bwd.R, bwd.x}, flow_lift(x_hat, lam, -dt));
      return (ep - em) / (2 * dt);
    };
    const Mat6 fd = oracle::jacobian_at_zero<6>(eps_dot, 1e-4);
    EXPECT_LT((fd - a_matrix1(x_hat, u_bar)).cwiseAbs().maxCoeff(), 1e-5) << fd;
  }
}

TEST(Stage1Linearization, OutputMatrixMatchesFiniteDifference) {
  std::mt19937_64 rng(107);
  for (int trial = 0; trial < 20; ++trial) {
    const SymmetryElement x_hat = random_group(rng);
    const auto y_hat = output1(recover_state1(x_hat));
    const std::function<Eigen::Matrix<double, 9, 1>(const Vec6&)> resid = [&](const Vec6& eps) {
      return Eigen::Matrix<double, 9, 1>(stack(output1(from_error(eps, x_hat))) - stack(y_hat));
    };
    const auto fd = oracle::jacobian_at_zero<9>(resid, 1e-6);
    EXPECT_LT((fd - c_matrix1(y_hat, y_hat, x_hat.rot)).cwiseAbs().maxCoeff(), 1e-5);
  }
}

TEST(Stage1Linearization, CorrectionDecreasesLocalErrorByDelta) {
  // d/dtau eps(apply_correction(X_hat, delta, tau)) = -delta for a fixed truth.
  std::mt19937_64 rng(108);
  for (int trial = 0; trial < 20; ++trial) {
    const SymmetryElement x_hat = random_group(rng);
    const StageState xi = from_error(Vec6::Zero(), x_hat);
    Vec6 delta;
    delta << oracle::random_vec(rng, 1.0), oracle::random_vec(rng, 1.0);
    const double h = 1e-6;
    const Vec6 rate =
        (oracle_error(xi, apply_correction(x_hat, delta, h)) - oracle_error(xi, apply_correction(x_hat, delta, -h))) /
        (2 * h);
    EXPECT_LT((rate + delta).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(Stage1Predict, ClosedFormFlowWithExactBias) {
  const Vec3 b(0.01, -0.02, 0.015), u(0.03, 0.01, -0.02);
  const Rotation r0 = rot_z(0.7) * rot_y(-0.3);
  Stage1Gains gains;
  Stage1Estimate est = make_stage1_estimate(gains);
  est.X_hat = {r0, -r0 * b};  // recovers (r0, b)
  for (int k = 0; k < 100; ++k) est = predict1(est, u + b, gains, 0.01);
  const StageState s = recover_state1(est.X_hat);
  EXPECT_LT((s.rot - r0 * exp_so3(u * 1.0)).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LT((s.vec - b).norm(), 1e-12);
}

TEST(Stage1Predict, RiccatiGrowsByEulerStep) {
  Stage1Gains gains;
  const Stage1Estimate est = make_stage1_estimate(gains);
  const Vec3 u(0.1, 0.0, 0.0);
  const Stage1Estimate next = predict1(est, u, gains, 0.01);
  const Mat6 a = a_matrix1(est.X_hat, u);
  const Mat6 expected = est.Sigma + (a * est.Sigma + est.Sigma * a.transpose() + gains.M) * 0.01;
  EXPECT_LT((next.Sigma - expected).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_THROW((void)predict1(est, u, gains, 0.0), std::invalid_argument);
}

TEST(Stage1Update, RiccatiDecrementMatchesRk4) {
  std::mt19937_64 rng(109);
  const SymmetryElement x_hat = random_group(rng);
  const auto y_hat = output1(recover_state1(x_hat));
  const auto c = c_matrix1(y_hat, y_hat, x_hat.rot);
  Mat6 sigma = Mat6::Identity() * 2.0;
  sigma(0, 3) = sigma(3, 0) = 0.5;
  const Stage1Gains gains;
  for (double tau : {1e-3, 0.05, 1.0}) {
    const Mat6 s = c.transpose() * gains.N.inverse() * c;
    const Mat6 ref = oracle::riccati_rk4(sigma, Mat6::Zero(), Mat6::Zero(), s, tau, 20000);
    EXPECT_LT((riccati_correct<9>(sigma, c, gains.N, tau) - ref).cwiseAbs().maxCoeff(), 1e-9) << tau;
  }
}

TEST(Stage1Update, SingleIterationReducesResidual) {
  std::mt19937_64 rng(110);
  Stage1Gains gains;
  gains.update_iterations = 1;
  for (int trial = 0; trial < 20; ++trial) {
    const Rotation truth = oracle::random_rotation(rng);
    Stage1Estimate est = make_stage1_estimate(gains);
    est.X_hat = {truth * exp_so3(oracle::random_vec(rng, 0.02)), Vec3::Zero()};
    const StarMeasurement y = rows_of(truth);
    const auto residual = [&](const Stage1Estimate& e) {
      return (stack(y) - stack(output1(recover_state1(e.X_hat)))).norm();
    };
    EXPECT_LT(residual(update1(est, y, gains, 0.01)), residual(est));
  }
}

TEST(Stage1Update, NoiselessRepeatedUpdatesConverge) {
  std::mt19937_64 rng(111);
  const Stage1Gains gains;
  for (int trial = 0; trial < 10; ++trial) {
    const Rotation truth = oracle::random_rotation(rng);
    Stage1Estimate est = make_stage1_estimate(gains);
    est.X_hat = {truth * exp_so3(random_unit_vector(rng) * 20.0 * kDeg), Vec3::Zero()};
    const StarMeasurement y = rows_of(truth);
    for (int k = 0; k < 50; ++k) est = update1(est, y, gains, 1.0);
    EXPECT_LT(rotation_angle(recover_state1(est.X_hat).rot, truth), 1e-3);
    EXPECT_TRUE(is_spd(est.Sigma));
  }
}

TEST(Stage1Update, RejectsBadArguments) {
  Stage1Gains gains;
  const Stage1Estimate est = make_stage1_estimate(gains);
  const StarMeasurement y = rows_of(Rotation::Identity());
  EXPECT_THROW((void)update1(est, y, gains, 0.0), std::invalid_argument);
  gains.N(0, 0) = -1.0;
  EXPECT_THROW((void)update1(est, y, gains, 1.0), std::invalid_argument);
}

TEST(Stage1Gains, Validation) {
  Stage1Gains g;
  EXPECT_NO_THROW(g.validate());
  g.update_iterations = 0;
  EXPECT_THROW(g.validate(), std::invalid_argument);
  g = Stage1Gains{};
  g.M(0, 1) = 5.0;
  EXPECT_THROW(g.validate(), std::invalid_argument);
}
