#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>

#include "../error.hpp"
#include "../sph/vec3.hpp"

namespace hyb::render {

using sph::Vec3;

struct Ray {
  Vec3 origin;
  Vec3 direction;  // unit length
};

// Camera
//
// Pinhole camera; `fov` is the vertical field of view in radians.
struct Camera {
  Vec3 origin {0.0, 0.0, -3.0};
  Vec3 direction {0.0, 0.0, 1.0};
  Vec3 up {0.0, 1.0, 0.0};
  double fov {std::numbers::pi / 3.0};
  std::size_t width {100};
  std::size_t height {100};

  void validate() const {
    if(width == 0 || height == 0) {
      throw Error("camera resolution must be positive");
    }
    if(!(fov > 0.0 && fov < std::numbers::pi)) {
      throw Error("camera fov must lie in (0, pi)");
    }
    if(!(norm(cross(direction, up)) > 0.0)) {
      throw Error("camera up must not be parallel to the view direction");
    }
  }
};

// Procedure: generate_ray
//
// Ray through the center of pixel (px, py); py = 0 is the top row.
inline Ray generate_ray(const Camera& c, std::size_t px, std::size_t py) {
  const Vec3 f = normalized(c.direction);
  const Vec3 right = normalized(cross(f, c.up));
  const Vec3 u = cross(right, f);
  const double half = std::tan(c.fov * 0.5);
  const double aspect = static_cast<double>(c.width) / static_cast<double>(c.height);
  const double sx = ((static_cast<double>(px) + 0.5) / static_cast<double>(c.width) * 2.0 - 1.0) * half * aspect;
  const double sy = (1.0 - (static_cast<double>(py) + 0.5) / static_cast<double>(c.height) * 2.0) * half;
  return {c.origin, normalized(f + right * sx + u * sy)};
}

}  // end of namespace hyb::render -------------------------------------------
