#include "eqf/models.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace eqf;

namespace {

TruthWorld sample_world(std::mt19937_64& rng) {
  return TruthWorld(oracle::random_rotation(rng), oracle::random_rotation(rng), oracle::random_vec(rng, 0.05),
                    oracle::random_vec(rng, 0.05), oracle::random_vec(rng, 0.03), Vec3(1, 0.2, 0), Vec3(0, 1, 0.4));
}

}  // namespace

TEST(TruthWorld, RejectsCollinearFeatures) {
  EXPECT_THROW(TruthWorld(Rotation::Identity(), Rotation::Identity(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero(),
                          Vec3(1, 0, 0), Vec3(2, 1e-5, 0)),
               std::invalid_argument);
  Mat3 bad = Mat3::Identity();
  bad(0, 0) = -1.0;
  EXPECT_THROW(TruthWorld(bad, Rotation::Identity(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::UnitX(),
                          Vec3::UnitY()),
               std::invalid_argument);
}

TEST(SensorConfig, RatesMustDivideGyroRate) {
  SensorConfig s;
  EXPECT_NO_THROW(s.validate());
  s.vector_rate = 30.0;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s.vector_rate = 200.0;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s = SensorConfig{};
  s.gyro_noise_std = -1.0;
  EXPECT_THROW(s.validate(), std::invalid_argument);
}

TEST(PropagateTruth, ZeroRatesLeaveWorldUnchanged) {
  TruthWorld w(rot_x(0.3), rot_y(-0.4), Vec3::Zero(), Vec3::Zero(), Vec3(0.01, 0, 0), Vec3::UnitX(), Vec3::UnitY());
  const TruthWorld n = propagate_truth(w, 2.0);
  EXPECT_EQ(n.R_TI, w.R_TI);
  EXPECT_EQ(n.R_CI, w.R_CI);
  EXPECT_EQ(n.b, w.b);
  EXPECT_THROW((void)propagate_truth(w, 0.0), std::invalid_argument);
}

TEST(PropagateTruth, QuarterTurn) {
  TruthWorld w;
  w.u = Vec3(0, 0, kPi / 2);
  const TruthWorld n = propagate_truth(w, 1.0);
  Mat3 expected;
  expected << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  EXPECT_LT((n.R_CI - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(PropagateTruth, StepwiseEqualsSingleStep) {
  std::mt19937_64 rng(21);
  const TruthWorld w = sample_world(rng);
  TruthWorld stepped = w;
  for (int i = 0; i < 1000; ++i) stepped = propagate_truth(stepped, 0.01);
  const TruthWorld once = propagate_truth(w, 10.0);
  EXPECT_LT((stepped.R_CI - once.R_CI).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT((stepped.R_TI - once.R_TI).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(PropagateTruth, RelativeStateMatchesRk4OfRelativeKinematics) {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 5; ++trial) {
    const TruthWorld w = sample_world(rng);
    const StageState r0 = relative_state(w);
    const oracle::Pair ref = oracle::rk4({r0.rot, r0.vec}, oracle::relative_kinematics(w.u), 1.0, 10000);
    TruthWorld stepped = w;
    for (int i = 0; i < 100; ++i) stepped = propagate_truth(stepped, 0.01);
    const StageState r1 = relative_state(stepped);
    EXPECT_LT((r1.rot - ref.R).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_LT((r1.vec - ref.x).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(RelativeState, Definitions) {
  TruthWorld w(rot_z(0.4), rot_z(0.4), Vec3::Zero(), Vec3(0.1, 0, 0), Vec3::Zero(), Vec3::UnitX(), Vec3::UnitY());
  EXPECT_LT((relative_state(w).rot - Mat3::Identity()).norm(), 1e-15);
  EXPECT_EQ(relative_state(w).vec, Vec3::Zero());
}

TEST(RelativeState, OmegaDerivativeByFiniteDifference) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    const TruthWorld w = sample_world(rng);
    const double h = 1e-5;
    // Backward propagation is the same exact flow with negated rates.
    TruthWorld back = w;
    back.omega_T = -w.omega_T;
    back.u = -w.u;
    back = propagate_truth(back, h);
    back.omega_T = w.omega_T;
    const Vec3 fd = (relative_state(propagate_truth(w, h)).vec - relative_state(back).vec) / (2 * h);
    const Vec3 omega = relative_state(w).vec;
    EXPECT_LT((fd - omega.cross(w.u)).norm(), 1e-6);
  }
}

TEST(MeasureGyro, Noiseless) {
  std::mt19937_64 rng(1);
  TruthWorld w;
  w.u = Vec3(0.1, 0.2, 0.3);
  EXPECT_EQ(measure_gyro(w, 0.0, rng), w.u);
  w.b = Vec3(-0.01, 0.0, 0.02);
  EXPECT_EQ(measure_gyro(w, 0.0, rng), w.u + w.b);
}

TEST(MeasureGyro, SampleMeanConverges) {
  std::mt19937_64 rng(2);
  TruthWorld w;
  w.u = Vec3(0.1, 0.2, 0.3);
  w.b = Vec3(-0.01, 0.0, 0.02);
  const int n = 100000;
  const double sigma = 0.01;
  Vec3 mean = Vec3::Zero();
  Vec3 sq = Vec3::Zero();
  for (int i = 0; i < n; ++i) {
    const Vec3 e = measure_gyro(w, sigma, rng) - w.u - w.b;
    mean += e / n;
    sq += e.cwiseProduct(e) / n;
  }
  EXPECT_LT(mean.cwiseAbs().maxCoeff(), 4 * sigma / std::sqrt(n));
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(std::sqrt(sq(i)), sigma, 0.02 * sigma);
}

TEST(PerturbDirection, ZeroSigmaAndUnitNorm) {
  std::mt19937_64 rng(3);
  const Vec3 v = Vec3(1, 2, -2).normalized();
  EXPECT_EQ(perturb_direction(v, 0.0, rng), v);
  for (int i = 0; i < 1000; ++i) EXPECT_NEAR(perturb_direction(v, 0.3, rng).norm(), 1.0, 1e-12);
}

TEST(PerturbDirection, AngleDistributionMatchesGenerativeModel) {
  // Independent simulation: Gaussian-normalized axis, series exponential.
  const double sigma = 0.05;
  const int n = 40000;
  const Vec3 v = Vec3(0.3, -0.2, 0.9).normalized();
  std::mt19937_64 rng(4), ref_rng(5);
  std::normal_distribution<double> g;
  double mean_lib = 0.0, mean_ref = 0.0, sq_lib = 0.0;
  for (int i = 0; i < n; ++i) {
    const double a = std::acos(std::clamp(perturb_direction(v, sigma, rng).dot(v), -1.0, 1.0));
    mean_lib += a / n;
    sq_lib += a * a / n;
    const Vec3 axis = Vec3(g(ref_rng), g(ref_rng), g(ref_rng)).normalized();
    const Vec3 out = oracle::expm(oracle::hat(axis * sigma * g(ref_rng))) * v;
    mean_ref += std::acos(std::clamp(out.dot(v), -1.0, 1.0)) / n;
  }
  const double sd = std::sqrt(sq_lib - mean_lib * mean_lib);
  EXPECT_NEAR(mean_lib, mean_ref, 4.0 * sd * std::sqrt(2.0 / n));
  // |theta| sin(beta) with beta the axis/v angle: E = sigma sqrt(2/pi) * pi/4.
  EXPECT_NEAR(mean_ref, sigma * std::sqrt(2.0 / kPi) * kPi / 4.0, 0.02 * sigma);
}

TEST(MeasureStarTracker, RowsOfAttitude) {
  std::mt19937_64 rng(6);
  TruthWorld w;
  auto y = measure_star_tracker(w, 0.0, rng);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(y[i], Vec3::Unit(i));
  w.R_CI = rot_z(kPi / 2);
  y = measure_star_tracker(w, 0.0, rng);
  EXPECT_LT((y[0] - Vec3(0, -1, 0)).norm(), 1e-15);
  EXPECT_LT((y[1] - Vec3(1, 0, 0)).norm(), 1e-15);
  EXPECT_LT((y[2] - Vec3(0, 0, 1)).norm(), 1e-15);
}

TEST(MeasureStarTracker, NoisyColumnsStayUnitAndClose) {
  std::mt19937_64 rng(7);
  TruthWorld w;
  w.R_CI = oracle::random_rotation(rng);
  double sq = 0.0;
  const int n = 20000;
  for (int k = 0; k < n; ++k) {
    const auto y = measure_star_tracker(w, 0.01, rng);
    for (int i = 0; i < 3; ++i) {
      ASSERT_NEAR(y[i].norm(), 1.0, 1e-12);
      const double a = std::acos(std::clamp(y[i].dot(w.R_CI.row(i).transpose()), -1.0, 1.0));
      sq += a * a / (3.0 * n);
    }
  }
  // E[theta^2 sin^2 beta] = sigma^2 * 2/3 for a uniform axis.
  EXPECT_NEAR(std::sqrt(sq), 0.01 * std::sqrt(2.0 / 3.0), 2e-4);
}

TEST(MeasureFeatures, NoiselessPreservesGeometry) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const TruthWorld w = sample_world(rng);
    const auto y = measure_features(w, 0.0, rng);
    EXPECT_NEAR(y[0].dot(y[1]), w.d1.dot(w.d2), 1e-12);
    const Rotation r = relative_state(w).rot;
    EXPECT_LT((y[0] - r.transpose() * w.d1).norm(), 1e-15);
  }
  TruthWorld id;
  const auto y = measure_features(id, 0.0, rng);
  EXPECT_EQ(y[0], id.d1);
  EXPECT_EQ(y[1], id.d2);
}
