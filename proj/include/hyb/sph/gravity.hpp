#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "grid.hpp"
#include "particle.hpp"

namespace hyb::sph {

enum class GravitySampling : std::uint32_t { nearest = 0, trilinear = 1 };

// GravityField
//
// Acceleration vectors at the centers of a coarse grid, x-fastest.
struct GravityField {
  GridSpec grid;
  std::vector<Vec3> cells;

  Vec3 sample(const Vec3& p, GravitySampling mode = GravitySampling::nearest) const {
    if(cells.empty()) {
      return {};
    }
    if(mode == GravitySampling::nearest) {
      return cells[cell_of(p, grid)];
    }
    return _trilinear(p);
  }

  friend bool operator==(const GravityField&, const GravityField&) = default;

  private:

    Vec3 _trilinear(const Vec3& p) const {
      // coordinates relative to the first cell center, clamped to the grid
      auto axis = [&](double c, double o, std::size_t n, std::size_t& i0, double& t) {
        const double u = (c - o) / grid.cell_size - 0.5;
        const double top = static_cast<double>(n - 1);
        const double clamped = u < 0.0 ? 0.0 : (u > top ? top : u);
        const double f = std::floor(clamped);
        i0 = static_cast<std::size_t>(f);
        if(i0 + 1 >= n) {
          i0 = n >= 2 ? n - 2 : 0;
        }
        t = n >= 2 ? clamped - static_cast<double>(i0) : 0.0;
      };
      std::size_t ix, iy, iz;
      double tx, ty, tz;
      axis(p.x, grid.origin.x, grid.dims[0], ix, tx);
      axis(p.y, grid.origin.y, grid.dims[1], iy, ty);
      axis(p.z, grid.origin.z, grid.dims[2], iz, tz);
      auto at = [&](std::size_t dx, std::size_t dy, std::size_t dz) {
        const auto x = std::min(ix + dx, grid.dims[0] - 1);
        const auto y = std::min(iy + dy, grid.dims[1] - 1);
        const auto z = std::min(iz + dz, grid.dims[2] - 1);
        return cells[grid.linear(x, y, z)];
      };
      Vec3 out;
      for(std::size_t dz = 0; dz < 2; ++dz) {
        for(std::size_t dy = 0; dy < 2; ++dy) {
          for(std::size_t dx = 0; dx < 2; ++dx) {
            const double w = (dx ? tx : 1.0 - tx) * (dy ? ty : 1.0 - ty) * (dz ? tz : 1.0 - tz);
            out += at(dx, dy, dz) * w;
          }
        }
      }
      return out;
    }
};

// Procedure: build_gravity_field
//
// Softened point-mass field at every cell center:
//   g(c) = sum_j G m_j (pos_j - c) / (|pos_j - c|^2 + eps^2)^(3/2)
inline GravityField build_gravity_field(
  std::span<const Particle> particles,
  const GridSpec& grid,
  double G,
  double epsilon
) {
  grid.validate();
  GravityField field{grid, std::vector<Vec3>(grid.cell_count())};
  const double eps2 = epsilon * epsilon;
  for(std::size_t iz = 0; iz < grid.dims[2]; ++iz) {
    for(std::size_t iy = 0; iy < grid.dims[1]; ++iy) {
      for(std::size_t ix = 0; ix < grid.dims[0]; ++ix) {
        const Vec3 c = grid.cell_center(ix, iy, iz);
        Vec3 g;
        for(const auto& p : particles) {
          const Vec3 d = p.position - c;
          const double s = dot(d, d) + eps2;
          g += d * (G * p.mass / (s * std::sqrt(s)));
        }
        field.cells[grid.linear(ix, iy, iz)] = g;
      }
    }
  }
  return field;
}

}  // end of namespace hyb::sph ----------------------------------------------

// Wire layout: nx ny nz (u64 each), then cells x-fastest as 3 x f64. The
// grid origin and cell size are not carried; receivers derive them from the
// simulation parameters.
template <>
struct hyb::serializer<hyb::sph::GravityField> {

  template <typename Writer>
  static void serialize(Writer& w, const sph::GravityField& f) {
    for(auto d : f.grid.dims) {
      w.write(static_cast<std::uint64_t>(d));
    }
    for(const auto& c : f.cells) {
      serializer<sph::Vec3>::serialize(w, c);
    }
  }

  template <typename Reader>
  static void deserialize(Reader& r, sph::GravityField& f) {
    std::size_t count = 1;
    for(auto& d : f.grid.dims) {
      d = static_cast<std::size_t>(r.template read<std::uint64_t>());
      count *= d;
    }
    if(count > r.remaining() / 24) {
      throw TruncatedInput("gravity field larger than remaining input");
    }
    f.cells.resize(count);
    for(auto& c : f.cells) {
      serializer<sph::Vec3>::deserialize(r, c);
    }
  }

  static std::size_t size(const sph::GravityField& f) {
    return 24 + 24 * f.cells.size();
  }
};
