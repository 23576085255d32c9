#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>

#include "../error.hpp"
#include "vec3.hpp"

namespace hyb::sph {

// Axis-aligned box.
struct Box {
  Vec3 lo {-2.0, -2.0, -2.0};
  Vec3 hi {2.0, 2.0, 2.0};

  Vec3 extent() const { return hi - lo; }

  bool degenerate() const {
    return !(hi.x > lo.x && hi.y > lo.y && hi.z > lo.z);
  }

  friend bool operator==(const Box&, const Box&) = default;
};

using Dims = std::array<std::size_t, 3>;

// GridSpec
//
// Uniform grid of cubic cells anchored at `origin`. Cell (ix, iy, iz) has
// linear index ix + nx * (iy + ny * iz).
struct GridSpec {
  Vec3 origin;
  double cell_size {1.0};
  Dims dims {1, 1, 1};

  std::size_t cell_count() const { return dims[0] * dims[1] * dims[2]; }

  void validate() const {
    if(!(cell_size > 0.0)) {
      throw Error("grid cell size must be positive");
    }
    if(dims[0] == 0 || dims[1] == 0 || dims[2] == 0) {
      throw Error("grid dimensions must be at least 1");
    }
  }

  // Clamped cell coordinate along one axis.
  std::size_t axis_cell(double coordinate, double axis_origin, std::size_t n) const {
    const double f = std::floor((coordinate - axis_origin) / cell_size);
    if(!(f > 0.0)) {
      return 0;  // also catches NaN
    }
    const double top = static_cast<double>(n - 1);
    return f >= top ? n - 1 : static_cast<std::size_t>(f);
  }

  std::size_t linear(std::size_t ix, std::size_t iy, std::size_t iz) const {
    return ix + dims[0] * (iy + dims[1] * iz);
  }

  Vec3 cell_center(std::size_t ix, std::size_t iy, std::size_t iz) const {
    return {
      origin.x + (static_cast<double>(ix) + 0.5) * cell_size,
      origin.y + (static_cast<double>(iy) + 0.5) * cell_size,
      origin.z + (static_cast<double>(iz) + 0.5) * cell_size,
    };
  }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

// Procedure: cell_of
//
// Positions outside the grid clamp to the nearest boundary cell.
inline std::size_t cell_of(const Vec3& p, const GridSpec& g) {
  return g.linear(
    g.axis_cell(p.x, g.origin.x, g.dims[0]),
    g.axis_cell(p.y, g.origin.y, g.dims[1]),
    g.axis_cell(p.z, g.origin.z, g.dims[2])
  );
}

// Grid of cubic cells of size `cell` covering `box`.
inline GridSpec grid_over(const Box& box, double cell) {
  const auto e = box.extent();
  auto count = [&](double len) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(len / cell)));
  };
  GridSpec g{box.lo, cell, {count(e.x), count(e.y), count(e.z)}};
  g.validate();
  return g;
}

// Grid with the given dimensions whose cubic cells cover `box`.
inline GridSpec grid_with_dims(const Box& box, const Dims& dims) {
  const auto e = box.extent();
  const double cell = std::max({
    e.x / static_cast<double>(dims[0]),
    e.y / static_cast<double>(dims[1]),
    e.z / static_cast<double>(dims[2]),
  });
  GridSpec g{box.lo, cell, dims};
  g.validate();
  return g;
}

}  // end of namespace hyb::sph ----------------------------------------------
