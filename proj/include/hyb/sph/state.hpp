#pragma once

#include <vector>

#include "gravity.hpp"
#include "particle.hpp"
#include "spatial_index.hpp"

namespace hyb::sph {

// SimParams
//
// None of these constants carries physical calibration; they only need to
// keep the nebula numerically well behaved at desk scale.
struct SimParams {
  double h {0.2};          // smoothing radius
  double dt {0.005};
  double k_eos {0.1};      // isothermal stiffness, p = k * rho
  double G {1.0};
  double epsilon {0.05};   // gravity softening length
  Box world_box {};
  Dims gravity_dims {8, 8, 8};
  GravitySampling gravity_sampling {GravitySampling::nearest};

  void validate() const {
    if(!(h > 0.0) || !(dt > 0.0) || !(epsilon > 0.0)) {
      throw Error("h, dt and epsilon must be positive");
    }
    if(!(k_eos >= 0.0) || !(G >= 0.0)) {
      throw Error("k_eos and G must be non-negative");
    }
    if(world_box.degenerate()) {
      throw Error("world_box must have positive extent on every axis");
    }
    if(gravity_dims[0] == 0 || gravity_dims[1] == 0 || gravity_dims[2] == 0) {
      throw Error("gravity_dims must be at least 1 on every axis");
    }
  }

  GridSpec index_grid() const { return grid_over(world_box, h); }
  GridSpec gravity_grid() const { return grid_with_dims(world_box, gravity_dims); }

  friend bool operator==(const SimParams&, const SimParams&) = default;
};

// SimulationState
struct SimulationState {
  std::vector<Particle> particles;
  GravityField gravity;
  SpatialIndex index;
  SimParams params;

  // Rebuilds only the neighbor index over the current positions.
  void rebuild_index() {
    index.build(particles, params.index_grid());
  }
};

}  // end of namespace hyb::sph ----------------------------------------------

template <>
struct hyb::serializer<hyb::sph::SimParams> {

  template <typename Writer>
  static void serialize(Writer& w, const sph::SimParams& p) {
    w.write(p.h);
    w.write(p.dt);
    w.write(p.k_eos);
    w.write(p.G);
    w.write(p.epsilon);
    serializer<sph::Vec3>::serialize(w, p.world_box.lo);
    serializer<sph::Vec3>::serialize(w, p.world_box.hi);
    for(auto d : p.gravity_dims) {
      w.write(static_cast<std::uint64_t>(d));
    }
    w.write(static_cast<std::uint32_t>(p.gravity_sampling));
  }

  template <typename Reader>
  static void deserialize(Reader& r, sph::SimParams& p) {
    p.h = r.template read<double>();
    p.dt = r.template read<double>();
    p.k_eos = r.template read<double>();
    p.G = r.template read<double>();
    p.epsilon = r.template read<double>();
    serializer<sph::Vec3>::deserialize(r, p.world_box.lo);
    serializer<sph::Vec3>::deserialize(r, p.world_box.hi);
    for(auto& d : p.gravity_dims) {
      d = static_cast<std::size_t>(r.template read<std::uint64_t>());
    }
    p.gravity_sampling = static_cast<sph::GravitySampling>(r.template read<std::uint32_t>());
  }

  static constexpr std::size_t size(const sph::SimParams&) { return 5 * 8 + 48 + 24 + 4; }
};

// State payload: params, particle count u64, particles, gravity field. The
// spatial index is rebuilt by the receiver from the particles it got.
template <>
struct hyb::serializer<hyb::sph::SimulationState> {

  template <typename Writer>
  static void serialize(Writer& w, const sph::SimulationState& s) {
    serializer<sph::SimParams>::serialize(w, s.params);
    serializer<std::vector<sph::Particle>>::serialize(w, s.particles);
    serializer<sph::GravityField>::serialize(w, s.gravity);
  }

  template <typename Reader>
  static void deserialize(Reader& r, sph::SimulationState& s) {
    serializer<sph::SimParams>::deserialize(r, s.params);
    s.params.validate();
    serializer<std::vector<sph::Particle>>::deserialize(r, s.particles);
    serializer<sph::GravityField>::deserialize(r, s.gravity);
    const auto grid = s.params.gravity_grid();
    if(s.gravity.grid.dims != grid.dims && !s.gravity.cells.empty()) {
      throw MalformedBlock("gravity field dimensions disagree with parameters");
    }
    s.gravity.grid = grid;
    s.rebuild_index();
  }

  static std::size_t size(const sph::SimulationState& s) {
    return serializer<sph::SimParams>::size(s.params) +
           serializer<std::vector<sph::Particle>>::size(s.particles) +
           serializer<sph::GravityField>::size(s.gravity);
  }
};
