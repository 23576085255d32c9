#pragma once

#include <cmath>

#include "../serialization.hpp"

namespace hyb::sph {

struct Vec3 {
  double x {0.0};
  double y {0.0};
  double z {0.0};

  constexpr Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
  constexpr Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
  constexpr Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }

  friend constexpr Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
  friend constexpr Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
  friend constexpr Vec3 operator*(Vec3 a, double s) { return a *= s; }
  friend constexpr Vec3 operator*(double s, Vec3 a) { return a *= s; }
  friend constexpr Vec3 operator-(const Vec3& a) { return {-a.x, -a.y, -a.z}; }
  friend constexpr bool operator==(const Vec3&, const Vec3&) = default;
};

constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

constexpr Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

inline Vec3 normalized(const Vec3& a) {
  const double n = norm(a);
  return {a.x / n, a.y / n, a.z / n};
}

}  // end of namespace hyb::sph ----------------------------------------------

template <>
struct hyb::serializer<hyb::sph::Vec3> {

  template <typename Writer>
  static void serialize(Writer& w, const sph::Vec3& v) {
    w.write(v.x);
    w.write(v.y);
    w.write(v.z);
  }

  template <typename Reader>
  static void deserialize(Reader& r, sph::Vec3& v) {
    v.x = r.template read<double>();
    v.y = r.template read<double>();
    v.z = r.template read<double>();
  }

  static constexpr std::size_t size(const sph::Vec3&) { return 24; }
};
