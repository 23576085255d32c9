#pragma once

#include <cstdint>

#include "kernel.hpp"
#include "state.hpp"

// The four phases of one nebula step.
//
// Phases 2 and 3 are pure per-particle maps f(U, p): they read only the
// snapshot U and the particle p, and return the updated particle. Neighbor
// sums run in spatial-index order, so any two evaluations over identical
// snapshots agree bit for bit.

namespace hyb::sph {

// Procedure: field_property
//
// A(x) = sum_j m_j (A_j / d_j) W(|x - pos_j|, h) over particles closer than h.
// `accessor` maps a particle to A_j (double or Vec3).
template <typename Accessor>
auto field_property(const Vec3& x, const SimulationState& U, Accessor&& accessor) {
  using Value = std::decay_t<decltype(accessor(U.particles.front()))>;
  Value sum{};
  const double h = U.params.h;
  U.index.for_each_candidate(x, h, [&](std::size_t j) {
    const auto& pj = U.particles[j];
    const double r = norm(x - pj.position);
    if(r < h) {
      sum += accessor(pj) * (pj.mass / pj.density * kernel_w(r, h));
    }
  });
  return sum;
}

// Procedure: phase1_prepare
//
// Rebuilds the neighbor index and the gravity field from current positions.
inline void phase1_prepare(SimulationState& U) {
  U.params.validate();
  U.rebuild_index();
  U.gravity = build_gravity_field(U.particles, U.params.gravity_grid(), U.params.G, U.params.epsilon);
}

// Procedure: phase2_density_gravity
//
// Density from the kernel sum including the particle itself, isothermal
// pressure, and acceleration set to the gravity field at the particle.
// `interactions`, when given, is increased by the number of neighbors summed.
inline Particle phase2_density_gravity(const SimulationState& U, Particle p, std::uint64_t* interactions = nullptr) {
  const double h = U.params.h;
  double density = 0.0;
  std::uint64_t count = 0;
  U.index.for_each_candidate(p.position, h, [&](std::size_t j) {
    const auto& pj = U.particles[j];
    const double r = norm(p.position - pj.position);
    if(r < h) {
      density += pj.mass * kernel_w(r, h);
      ++count;
    }
  });
  if(interactions) {
    *interactions += count;
  }
  p.density = density;
  p.pressure = U.params.k_eos * density;
  p.acceleration = U.gravity.sample(p.position, U.params.gravity_sampling);
  return p;
}

// Procedure: pressure_pair_force
//
// Symmetric SPH pressure force on particle i from particle j:
//   F_ij = -m_i m_j (P_i/d_i^2 + P_j/d_j^2) W'(r) r_ij / r,  r_ij = pos_i - pos_j
// Every factor is symmetric in (i, j) except r_ij, so F_ij == -F_ji exactly.
// Coincident pairs and pairs beyond h contribute nothing.
inline Vec3 pressure_pair_force(const Particle& pi, const Particle& pj, double h) {
  const Vec3 rij = pi.position - pj.position;
  const double r = norm(rij);
  if(r == 0.0 || !(r < h)) {
    return {};
  }
  const double s = pi.pressure / (pi.density * pi.density) + pj.pressure / (pj.density * pj.density);
  const double coefficient = -(pi.mass * pj.mass) * s * (kernel_dw(r, h) / r);
  return rij * coefficient;
}

// Procedure: phase3_pressure
//
// Adds the pressure acceleration sum_j F_ij / m_i (j != i) to the particle's
// acceleration. The particle is identified in U by its id.
inline Particle phase3_pressure(const SimulationState& U, Particle p, std::uint64_t* interactions = nullptr) {
  const double h = U.params.h;
  const auto& self = U.particles[static_cast<std::size_t>(p.id)];
  Vec3 force;
  std::uint64_t count = 0;
  U.index.for_each_candidate(self.position, h, [&](std::size_t j) {
    const auto& pj = U.particles[j];
    if(j == p.id || !(norm(self.position - pj.position) < h)) {
      return;
    }
    force += pressure_pair_force(self, pj, h);
    ++count;
  });
  if(interactions) {
    *interactions += count;
  }
  p.acceleration += force * (1.0 / self.mass);
  return p;
}

// Procedure: phase4_integrate
//
// Semi-implicit Euler: velocity first, then position with the new velocity.
inline Particle phase4_integrate(Particle p, double dt) {
  p.velocity += p.acceleration * dt;
  p.position += p.velocity * dt;
  p.acceleration = {};
  return p;
}

}  // end of namespace hyb::sph ----------------------------------------------
