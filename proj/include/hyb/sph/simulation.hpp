#pragma once

#include <oneapi/tbb/parallel_for.h>

#include <array>
#include <memory>
#include <span>
#include <string_view>

#include "../hybrid.hpp"
#include "../synthetic_load.hpp"
#include "phases.hpp"

// Offloadable phase functors and the full simulation step.
//
// Each functor carries the whole state snapshot U. A device receives it once
// per phase in FUNCTOR_STATE and rebuilds the spatial index locally.

namespace hyb::sph {

// DensityGravity
struct DensityGravity {
  static constexpr std::string_view kernel_name = "hyb.sph.density_gravity";

  std::shared_ptr<const SimulationState> state;
  SyntheticLoad load;

  void operator()(Particle& p) const {
    std::uint64_t interactions = 0;
    p = phase2_density_gravity(*state, p, &interactions);
    load.charge(interactions);
  }
};

// Pressure
struct Pressure {
  static constexpr std::string_view kernel_name = "hyb.sph.pressure";

  std::shared_ptr<const SimulationState> state;
  SyntheticLoad load;

  void operator()(Particle& p) const {
    std::uint64_t interactions = 0;
    p = phase3_pressure(*state, p, &interactions);
    load.charge(interactions);
  }
};

namespace detail {

template <typename F>
struct phase_functor_serializer {

  template <typename Writer>
  static void serialize(Writer& w, const F& f) {
    serializer<SyntheticLoad>::serialize(w, f.load);
    serializer<SimulationState>::serialize(w, *f.state);
  }

  template <typename Reader>
  static void deserialize(Reader& r, F& f) {
    serializer<SyntheticLoad>::deserialize(r, f.load);
    auto s = std::make_shared<SimulationState>();
    serializer<SimulationState>::deserialize(r, *s);
    f.state = std::move(s);
  }

  static std::size_t size(const F& f) {
    return serializer<SyntheticLoad>::size(f.load) + serializer<SimulationState>::size(*f.state);
  }
};

}  // end of namespace detail ------------------------------------------------

}  // end of namespace hyb::sph ----------------------------------------------

template <>
struct hyb::serializer<hyb::sph::DensityGravity> : hyb::sph::detail::phase_functor_serializer<hyb::sph::DensityGravity> {};

template <>
struct hyb::serializer<hyb::sph::Pressure> : hyb::sph::detail::phase_functor_serializer<hyb::sph::Pressure> {};

namespace hyb::sph {

// Procedure: register_sph_kernels
inline void register_sph_kernels(KernelRegistry& registry = KernelRegistry::global()) {
  registry.add<DensityGravity, Particle>();
  registry.add<Pressure, Particle>();
}

struct StepOptions {
  HybridOptions hybrid {};
  SyntheticLoad load {};
};

// StepStatistics
struct StepStatistics {
  std::array<double, 4> phase_seconds {};
  RunStatistics density;   // phase 2
  RunStatistics pressure;  // phase 3

  // device share of the items of phases 2 and 3 together
  double coproc_fraction() const {
    const auto total = density.total_items() + pressure.total_items();
    const auto dev = density.device_items() + pressure.device_items();
    return total == 0 ? 0.0 : static_cast<double>(dev) / static_cast<double>(total);
  }
};

// Procedure: simulation_step
//
// Phase 1 serially, phases 2 and 3 through hybrid_for_each against a frozen
// copy of the state, phase 4 on the local pool.
inline StepStatistics simulation_step(
  SimulationState& U,
  std::span<const DeviceSpec> devices = {},
  const StepOptions& options = {}
) {
  StepStatistics stats;
  auto lap = [t = Clock::now()]() mutable {
    const auto now = Clock::now();
    const double s = Seconds(now - t).count();
    t = now;
    return s;
  };

  phase1_prepare(U);
  stats.phase_seconds[0] = lap();

  stats.density = hybrid_for_each(
    U.particles,
    DensityGravity{std::make_shared<const SimulationState>(U), options.load},
    devices, options.hybrid
  );
  stats.phase_seconds[1] = lap();

  stats.pressure = hybrid_for_each(
    U.particles,
    Pressure{std::make_shared<const SimulationState>(U), options.load},
    devices, options.hybrid
  );
  stats.phase_seconds[2] = lap();

  const double dt = U.params.dt;
  tbb::parallel_for(std::size_t{0}, U.particles.size(), [&](std::size_t i) {
    U.particles[i] = phase4_integrate(U.particles[i], dt);
  });
  stats.phase_seconds[3] = lap();
  return stats;
}

}  // end of namespace hyb::sph ----------------------------------------------
