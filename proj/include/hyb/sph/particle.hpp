#pragma once

#include <cstdint>

#include "vec3.hpp"

namespace hyb::sph {

// Particle
struct Particle {
  std::uint64_t id {0};
  Vec3 position;
  double mass {0.0};
  std::uint32_t material {0};
  double density {0.0};
  double pressure {0.0};
  Vec3 velocity;
  Vec3 acceleration;

  friend bool operator==(const Particle&, const Particle&) = default;
};

inline constexpr std::size_t particle_wire_size = 108;

}  // end of namespace hyb::sph ----------------------------------------------

// Wire layout (108 bytes, little-endian, no padding):
//   id u64 | material u32 | pos.x pos.y pos.z mass density pressure
//   vel.x vel.y vel.z acc.x acc.y acc.z (f64 each)
template <>
struct hyb::serializer<hyb::sph::Particle> {

  template <typename Writer>
  static void serialize(Writer& w, const sph::Particle& p) {
    w.write(p.id);
    w.write(p.material);
    w.write(p.position.x);
    w.write(p.position.y);
    w.write(p.position.z);
    w.write(p.mass);
    w.write(p.density);
    w.write(p.pressure);
    w.write(p.velocity.x);
    w.write(p.velocity.y);
    w.write(p.velocity.z);
    w.write(p.acceleration.x);
    w.write(p.acceleration.y);
    w.write(p.acceleration.z);
  }

  template <typename Reader>
  static void deserialize(Reader& r, sph::Particle& p) {
    p.id = r.template read<std::uint64_t>();
    p.material = r.template read<std::uint32_t>();
    p.position.x = r.template read<double>();
    p.position.y = r.template read<double>();
    p.position.z = r.template read<double>();
    p.mass = r.template read<double>();
    p.density = r.template read<double>();
    p.pressure = r.template read<double>();
    p.velocity.x = r.template read<double>();
    p.velocity.y = r.template read<double>();
    p.velocity.z = r.template read<double>();
    p.acceleration.x = r.template read<double>();
    p.acceleration.y = r.template read<double>();
    p.acceleration.z = r.template read<double>();
  }

  static constexpr std::size_t size(const sph::Particle&) { return sph::particle_wire_size; }
};
