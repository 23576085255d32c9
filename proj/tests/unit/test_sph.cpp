#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include <hyb/sph/phases.hpp>
#include <hyb/sph/scene.hpp>
#include <hyb/sph/simulation.hpp>

#include "../support/oracles.hpp"
#include "../support/scenes.hpp"

using namespace hyb::sph;
using std::numbers::pi;

// ---- kernel -------------------------------------------------------------------

TEST(Kernel, CompactSupport) {
  EXPECT_EQ(kernel_w(0.3, 0.3), 0.0);
  EXPECT_EQ(kernel_w(0.6, 0.3), 0.0);
  EXPECT_EQ(kernel_dw(0.6, 0.3), 0.0);
}

TEST(Kernel, ValueAtZero) {
  const double h = 0.2;
  EXPECT_DOUBLE_EQ(kernel_w(0.0, h), 8.0 / (pi * h * h * h));
  EXPECT_EQ(kernel_dw(0.0, h), 0.0);
}

TEST(Kernel, ValueAtHalf) {
  const double h = 0.2;
  EXPECT_DOUBLE_EQ(kernel_w(h / 2, h), 2.0 / (pi * h * h * h));
  EXPECT_EQ(spline::inner(0.5), spline::outer(0.5));
  EXPECT_EQ(spline::inner(0.5), 0.25);
}

TEST(Kernel, SlopeAtHalfFromBothBranches) {
  EXPECT_EQ(spline::inner_slope(0.5), -1.5);
  EXPECT_EQ(spline::outer_slope(0.5), -1.5);
  const double h = 0.7;
  // -6 * 8/(pi h^4) * 0.25 = -12/(pi h^4)
  EXPECT_DOUBLE_EQ(kernel_dw(h / 2, h), -12.0 / (pi * h * h * h * h));
}

TEST(Kernel, MatchesAlternativeForm) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> q(0.0, 1.2);
  for(int i = 0; i < 1000; ++i) {
    const double h = 0.3, r = q(rng) * h;
    EXPECT_NEAR(kernel_w(r, h), oracle::W(r, h), 1e-12 * oracle::W(0, h));
    EXPECT_NEAR(kernel_dw(r, h), oracle::dW(r, h), 1e-12 * oracle::W(0, h) / h);
  }
}

// ---- field property -------------------------------------------------------------

TEST(FieldProperty, EmptyNeighborhood) {
  auto U = scenes::random_scene(10, 0.5, 1);
  scenes::with_densities(U);
  EXPECT_EQ(field_property({1.5, 1.5, 1.5}, U, [](const Particle& p) { return p.density; }), 0.0);
  const Vec3 v = field_property({1.5, 1.5, 1.5}, U, [](const Particle& p) { return p.velocity; });
  EXPECT_EQ(v, Vec3{});
}

TEST(FieldProperty, SingleParticleDensity) {
  SimulationState U;
  U.particles.resize(1);
  U.particles[0].mass = 0.3;
  U.particles[0].position = {0.1, 0.2, 0.3};
  scenes::with_densities(U);
  const double got = field_property(U.particles[0].position, U, [](const Particle& p) { return p.density; });
  EXPECT_DOUBLE_EQ(got, 0.3 * kernel_w(0.0, U.params.h));
}

TEST(FieldProperty, MatchesBruteForce) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> c(-0.6, 0.6);
  for(int s = 0; s < 5; ++s) {
    auto U = scenes::random_scene(300, 1.0, 50 + s);
    scenes::with_densities(U);
    for(int q = 0; q < 40; ++q) {
      const Vec3 x{c(rng), c(rng), c(rng)};
      const double want = oracle::field_density(U.particles, x, U.params.h);
      const double got = field_property(x, U, [](const Particle& p) { return p.density; });
      EXPECT_LE(oracle::relative_error(got, want, want), 1e-12);
      const Vec3 vwant = oracle::field_velocity(U.particles, x, U.params.h);
      const Vec3 vgot = field_property(x, U, [](const Particle& p) { return p.velocity; });
      EXPECT_LE(oracle::relative_error(vgot, vwant, norm(vwant)), 1e-12);
    }
  }
}

// ---- gravity ------------------------------------------------------------------

TEST(Gravity, ParticleAtCellCenterFeelsNothingThere) {
  const GridSpec g{{0, 0, 0}, 1.0, {3, 3, 3}};
  std::vector<Particle> ps(1);
  ps[0].mass = 1.0;
  ps[0].position = g.cell_center(1, 1, 1);
  const auto f = build_gravity_field(ps, g, 1.0, 0.1);
  EXPECT_EQ(f.cells[g.linear(1, 1, 1)], Vec3{});
}

TEST(Gravity, SymmetricPairCancels) {
  const GridSpec g{{0, 0, 0}, 1.0, {3, 3, 3}};
  std::vector<Particle> ps(2);
  const Vec3 c = g.cell_center(1, 1, 1);
  ps[0].mass = ps[1].mass = 2.0;
  ps[0].position = c + Vec3{0.25, 0.5, -0.125};
  ps[1].position = c - Vec3{0.25, 0.5, -0.125};
  const auto f = build_gravity_field(ps, g, 1.0, 0.05);
  EXPECT_EQ(f.cells[g.linear(1, 1, 1)], Vec3{});
}

TEST(Gravity, FarFieldIsPointMass) {
  const GridSpec g{{0, 0, 0}, 1.0, {8, 1, 1}};
  std::vector<Particle> ps(1);
  ps[0].mass = 3.0;
  ps[0].position = {0.5, 0.5, 0.5};
  const double G = 2.0, eps = 0.05;  // d >= 5 so eps <= d / 100
  const auto f = build_gravity_field(ps, g, G, eps);
  for(std::size_t ix = 5; ix < 8; ++ix) {
    const double d = static_cast<double>(ix);
    const double want = G * 3.0 / (d * d);
    EXPECT_NEAR(norm(f.cells[ix]), want, 0.01 * want);
    EXPECT_LT(f.cells[ix].x, 0.0);  // pulls toward the particle
  }
}

TEST(Gravity, TrilinearAgreesAtCellCenters) {
  auto U = scenes::random_scene(50, 2.0, 4);
  const GridSpec g{{-2, -2, -2}, 1.0, {4, 4, 4}};
  const auto f = build_gravity_field(U.particles, g, 1.0, 0.1);
  for(std::size_t i = 0; i < 4; ++i) {
    const Vec3 c = g.cell_center(i, 3 - i, 1);
    const Vec3 t = f.sample(c, GravitySampling::trilinear);
    EXPECT_LE(norm(t - f.sample(c)), 1e-12 * norm(f.sample(c)));
  }
}

// ---- phases -------------------------------------------------------------------

TEST(Phase1, IdempotentAndEmpty) {
  auto U = scenes::random_scene(100, 2.0, 8);
  phase1_prepare(U);
  const auto heads = U.index.heads();
  const auto field = U.gravity;
  phase1_prepare(U);
  EXPECT_EQ(U.index.heads(), heads);
  EXPECT_EQ(U.gravity, field);

  SimulationState empty;
  phase1_prepare(empty);
  for(auto h : empty.index.heads()) EXPECT_EQ(h, SpatialIndex::end);
  for(const auto& c : empty.gravity.cells) EXPECT_EQ(c, Vec3{});
}

TEST(Phase2, IsolatedParticle) {
  SimulationState U;
  U.particles.resize(1);
  U.particles[0].mass = 0.5;
  phase1_prepare(U);
  const auto p = phase2_density_gravity(U, U.particles[0]);
  EXPECT_DOUBLE_EQ(p.density, 0.5 * 8.0 / (pi * 0.008));
  EXPECT_DOUBLE_EQ(p.pressure, U.params.k_eos * p.density);
}

TEST(Phase2, PairAtHalfH) {
  SimulationState U;
  U.particles.resize(2);
  const double m = 0.25, h = U.params.h;
  U.particles[0] = {.id = 0, .position = {0, 0, 0}, .mass = m};
  U.particles[1] = {.id = 1, .position = {h / 2, 0, 0}, .mass = m};
  phase1_prepare(U);
  for(const auto& q : U.particles) {
    EXPECT_DOUBLE_EQ(phase2_density_gravity(U, q).density, m * (8.0 + 2.0) / (pi * h * h * h));
  }
}

TEST(Phase2, GravityIsNearestCellValue) {
  auto U = scenes::random_scene(100, 2.0, 3);
  phase1_prepare(U);
  for(const auto& q : U.particles) {
    const auto p = phase2_density_gravity(U, q);
    EXPECT_EQ(p.acceleration, U.gravity.cells[cell_of(q.position, U.gravity.grid)]);
  }
}

TEST(Phase2, MatchesBruteForce) {
  for(int s = 0; s < 5; ++s) {
    auto U = scenes::random_scene(400, 1.0, 70 + s);
    phase1_prepare(U);
    for(std::size_t i = 0; i < U.particles.size(); ++i) {
      const double want = oracle::density(U.particles, i, U.params.h);
      EXPECT_LE(oracle::relative_error(phase2_density_gravity(U, U.particles[i]).density, want, want), 1e-12);
    }
  }
}

TEST(Phase3, IsolatedParticleUnchanged) {
  SimulationState U;
  U.particles.resize(1);
  U.particles[0].mass = 1.0;
  U.particles[0].acceleration = {1, 2, 3};
  scenes::with_densities(U);
  U.particles[0].acceleration = {1, 2, 3};
  EXPECT_EQ(phase3_pressure(U, U.particles[0]).acceleration, (Vec3{1, 2, 3}));
}

TEST(Phase3, EqualPairRepelsSymmetrically) {
  SimulationState U;
  U.particles.resize(2);
  U.particles[0] = {.id = 0, .position = {0.0, 0.0, 0.0}, .mass = 1.0};
  U.particles[1] = {.id = 1, .position = {0.05, 0.0, 0.0}, .mass = 1.0};
  U.params.G = 0.0;
  scenes::with_densities(U);
  const auto a = phase3_pressure(U, U.particles[0]).acceleration;
  const auto b = phase3_pressure(U, U.particles[1]).acceleration;
  EXPECT_LT(a.x, 0.0);
  EXPECT_GT(b.x, 0.0);
  EXPECT_EQ(a.x, -b.x);
  EXPECT_EQ(a.y, 0.0);
  EXPECT_EQ(a.z, 0.0);
}

TEST(Phase3, PairForceAntisymmetricExactly) {
  auto U = scenes::random_scene(300, 0.8, 17);
  scenes::with_densities(U);
  for(std::size_t i = 0; i < U.particles.size(); ++i) {
    for(std::size_t j = i + 1; j < U.particles.size(); ++j) {
      const auto f = pressure_pair_force(U.particles[i], U.particles[j], U.params.h);
      const auto g = pressure_pair_force(U.particles[j], U.particles[i], U.params.h);
      ASSERT_EQ(f.x, -g.x);
      ASSERT_EQ(f.y, -g.y);
      ASSERT_EQ(f.z, -g.z);
    }
  }
}

TEST(Phase3, CoincidentPairContributesNothing) {
  Particle a{.id = 0, .position = {0.1, 0.1, 0.1}, .mass = 1.0, .density = 2.0, .pressure = 1.0};
  Particle b = a;
  b.id = 1;
  EXPECT_EQ(pressure_pair_force(a, b, 0.2), Vec3{});
}

TEST(Phase3, MatchesBruteForce) {
  for(int s = 0; s < 5; ++s) {
    auto U = scenes::random_scene(400, 1.0, 90 + s);
    scenes::with_densities(U);
    for(std::size_t i = 0; i < U.particles.size(); ++i) {
      auto p = U.particles[i];
      p.acceleration = {};
      const auto want = oracle::pressure(U.particles, i, U.params.h);
      const auto got = phase3_pressure(U, p).acceleration;
      EXPECT_LE(oracle::relative_error(got, want.acceleration, want.scale), 1e-12);
    }
  }
}

TEST(Phase4, FreeStreaming) {
  Particle p{.position = {1, 2, 3}, .velocity = {0.5, -0.25, 2}};
  const auto q = phase4_integrate(p, 0.1);
  EXPECT_EQ(q.position, p.position + p.velocity * 0.1);
}

TEST(Phase4, ConstantAccelerationFromRest) {
  Particle p{.position = {1, 2, 3}, .acceleration = {2, 0, -4}};
  const auto q = phase4_integrate(p, 0.5);
  // v' = a dt, x' = x + a dt^2
  EXPECT_EQ(q.velocity, (Vec3{1, 0, -2}));
  EXPECT_EQ(q.position, (Vec3{1.5, 2, 2}));
  EXPECT_EQ(q.acceleration, Vec3{});
}

TEST(Phase4, ZeroStepOnlyResetsAcceleration) {
  Particle p{.position = {1, 2, 3}, .velocity = {4, 5, 6}, .acceleration = {7, 8, 9}};
  auto q = phase4_integrate(p, 0.0);
  EXPECT_EQ(q.position, p.position);
  EXPECT_EQ(q.velocity, p.velocity);
  EXPECT_EQ(q.acceleration, Vec3{});
}

// ---- whole step ---------------------------------------------------------------

TEST(Step, PurityUnderPermutedEvaluationOrder) {
  auto U = scenes::random_scene(300, 1.0, 12);
  scenes::with_densities(U);
  std::vector<std::size_t> order(U.particles.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<Particle> forward(order.size()), shuffled(order.size());
  for(auto i : order) forward[i] = phase3_pressure(U, U.particles[i]);
  std::shuffle(order.begin(), order.end(), std::mt19937_64(5));
  for(auto i : order) shuffled[i] = phase3_pressure(U, U.particles[i]);
  EXPECT_TRUE(scenes::same_bits(forward, shuffled));
}

TEST(Step, TwoParticleHandTrace) {
  SimulationState U;
  U.params.G = 0.0;
  const double h = U.params.h, m = 0.5, dt = U.params.dt, k = U.params.k_eos;
  U.particles.resize(2);
  U.particles[0] = {.id = 0, .position = {-h / 4, 0, 0}, .mass = m};
  U.particles[1] = {.id = 1, .position = {h / 4, 0, 0}, .mass = m};
  simulation_step(U);
  // density = m (W(0) + W(h/2)), pressure = k density
  const double W0 = 8.0 / (pi * h * h * h);
  const double d = m * (W0 + 2.0 / (pi * h * h * h));
  const double P = k * d;
  // dW/dr at h/2 = -12 / (pi h^4); acceleration on particle 1 along +x:
  // a = -m (2 P / d^2) dW/dr
  const double a = -m * (2.0 * P / (d * d)) * (-12.0 / (pi * h * h * h * h));
  EXPECT_NEAR(U.particles[1].velocity.x, a * dt, 1e-12 * a * dt);
  EXPECT_NEAR(U.particles[1].position.x, h / 4 + a * dt * dt, 1e-12);
  EXPECT_NEAR(U.particles[0].velocity.x, -a * dt, 1e-12 * a * dt);
  EXPECT_DOUBLE_EQ(U.particles[0].density, d);
}

TEST(Step, BallisticWithoutForces) {
  auto U = scenes::random_scene(200, 1.0, 31);
  U.params.G = 0.0;
  U.params.k_eos = 0.0;
  const auto before = U.particles;
  simulation_step(U);
  for(std::size_t i = 0; i < before.size(); ++i) {
    EXPECT_EQ(U.particles[i].velocity, before[i].velocity);
    EXPECT_EQ(U.particles[i].position, before[i].position + before[i].velocity * U.params.dt);
    EXPECT_GT(U.particles[i].density, 0.0);
  }
}

TEST(Step, DevicesGiveIdenticalResults) {
  SceneConfig cfg;
  cfg.particles = 1500;
  std::vector<Particle> results[3];
  for(int variant = 0; variant < 3; ++variant) {
    auto U = make_nebula(cfg);
    hyb::DeviceSpec d;
    d.workers = 4;
    std::vector<hyb::DeviceSpec> devices(static_cast<std::size_t>(variant), d);
    StepOptions o;
    o.hybrid.host_workers = 2;
    for(int s = 0; s < 2; ++s) simulation_step(U, devices, o);
    results[variant] = U.particles;
  }
  EXPECT_TRUE(scenes::same_bits(results[0], results[1]));
  EXPECT_TRUE(scenes::same_bits(results[0], results[2]));
}

TEST(Step, StatisticsCoverBothOffloadedPhases) {
  SceneConfig cfg;
  cfg.particles = 800;
  auto U = make_nebula(cfg);
  hyb::DeviceSpec d;
  const std::vector<hyb::DeviceSpec> devices {d};
  const auto st = simulation_step(U, devices);
  EXPECT_EQ(st.density.total_items(), 800u);
  EXPECT_EQ(st.pressure.total_items(), 800u);
  const double want = static_cast<double>(st.density.device_items() + st.pressure.device_items()) / 1600.0;
  EXPECT_DOUBLE_EQ(st.coproc_fraction(), want);
}

// ---- scene ------------------------------------------------------------------

TEST(Scene, NebulaIsSeededAndBanded) {
  SceneConfig cfg;
  cfg.particles = 3000;
  cfg.seed = 4;
  const auto a = make_nebula(cfg);
  const auto b = make_nebula(cfg);
  EXPECT_TRUE(scenes::same_bits(a.particles, b.particles));
  cfg.seed = 5;
  EXPECT_FALSE(scenes::same_bits(a.particles, make_nebula(cfg).particles));
  double total = 0.0;
  for(const auto& p : a.particles) {
    const double r = norm(p.position);
    EXPECT_LE(r, cfg.radius);
    EXPECT_EQ(p.material, r * 3.0 < cfg.radius ? 0u : (r * 3.0 < 2.0 * cfg.radius ? 1u : 2u));
    EXPECT_EQ(p.velocity, Vec3{});
    total += p.mass;
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(Scene, KeyValueConfig) {
  std::istringstream in("# nebula\nparticles = 42\nh=0.3\nworld_box = -1,-1,-1, 1,1,1\ngravity_dims = 2,3,4\n");
  SceneConfig cfg;
  for(const auto& [k, v] : read_key_values(in)) ASSERT_TRUE(apply_scene_key(cfg, k, v)) << k;
  EXPECT_EQ(cfg.particles, 42u);
  EXPECT_EQ(cfg.params.h, 0.3);
  EXPECT_EQ(cfg.params.world_box.lo, (Vec3{-1, -1, -1}));
  EXPECT_EQ(cfg.params.gravity_dims, (Dims{2, 3, 4}));
  EXPECT_THROW(apply_scene_key(cfg, "h", "abc"), hyb::Error);
  EXPECT_FALSE(apply_scene_key(cfg, "nonsense", "1"));
}

TEST(Scene, StateSerializationRoundTrip) {
  SceneConfig cfg;
  cfg.particles = 200;
  auto U = make_nebula(cfg);
  phase1_prepare(U);
  const auto bytes = hyb::to_bytes(U);
  EXPECT_EQ(bytes.size(), hyb::serialized_size(U));
  hyb::ByteReader r(bytes);
  const auto V = hyb::deserialize<SimulationState>(r);
  EXPECT_TRUE(scenes::same_bits(U.particles, V.particles));
  EXPECT_EQ(U.gravity, V.gravity);
  EXPECT_EQ(U.params, V.params);
  EXPECT_EQ(U.index.heads(), V.index.heads());
  EXPECT_EQ(U.index.next(), V.index.next());
}
