// Drives the cascade by hand on a noiseless world: gyro every tick, star
// tracker every second, feature vectors at 10 Hz.

#include "eqf/eqf.hpp"

#include <cstdio>
#include <random>

int main() {
  using namespace eqf;

  TruthWorld world(rot_z(0.4) * rot_x(-0.2), rot_y(0.3), Vec3(0.01, -0.02, 0.03), Vec3(0.02, 0.0, -0.01),
                   Vec3(0.015, 0.01, -0.02), Vec3::UnitX(), Vec3::UnitY());
  const CascadeConfig cfg;
  CascadeState cs = make_cascade(cfg);
  std::mt19937_64 rng(7);

  const double dt = 0.01;
  for (int k = 1; k <= 1500; ++k) {
    MeasurementBundle m;
    m.gyro = world.u + world.b;
    world = propagate_truth(world, dt);
    m.t = k * dt;
    if (k % 100 == 0) m.star = measure_star_tracker(world, 0.0, rng);
    if (k % 10 == 0) m.features = measure_features(world, 0.0, rng);
    cs = step(cs, m, cfg);
    if (k % 300 == 0) {
      const StageState s1 = recover_state1(cs.s1.X_hat);
      const StageState s2 = recover_state2(cs.s2.X_hat);
      std::printf("t=%5.1f  chaser %.2e rad  bias %.2e rad/s  relative %.2e rad  omega %.2e rad/s\n", m.t,
                  rotation_angle(s1.rot, world.R_CI), (s1.vec - world.b).norm(),
                  rotation_angle(s2.rot, relative_state(world).rot), (s2.vec - relative_state(world).vec).norm());
    }
  }
}
