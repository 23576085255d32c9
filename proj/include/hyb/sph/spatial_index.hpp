#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "grid.hpp"
#include "particle.hpp"

namespace hyb::sph {

// SpatialIndex
//
// Per-cell singly linked lists stored in two flat arrays: heads[cell] is the
// first particle in the cell, next[particle] the following one. Rebuilding
// over the same particle count and grid touches no allocator.
class SpatialIndex {

  public:

    using Link = std::uint32_t;
    static constexpr Link end = std::numeric_limits<Link>::max();

    SpatialIndex() = default;
    explicit SpatialIndex(const GridSpec& grid) : _grid{grid} {}

    // Procedure: build
    //
    // Inserts particles in ascending order, each prepended to its cell's list,
    // so a cell holding 0, 1, 2 chains as 2 -> 1 -> 0.
    void build(std::span<const Particle> particles, const GridSpec& grid) {
      grid.validate();
      _grid = grid;
      if(_heads.size() != grid.cell_count()) {
        _heads.resize(grid.cell_count());
      }
      if(_next.size() != particles.size()) {
        _next.resize(particles.size());
      }
      std::fill(_heads.begin(), _heads.end(), end);
      for(std::size_t i = 0; i < particles.size(); ++i) {
        const auto c = cell_of(particles[i].position, _grid);
        _next[i] = _heads[c];
        _heads[c] = static_cast<Link>(i);
      }
    }

    // Procedure: for_each_candidate
    //
    // Visits every particle in the cells overlapping the cube of half-width
    // `radius` around `point` (clamped to the grid), cell by cell in z, y, x
    // order and along each chain. Every particle within `radius` is visited;
    // others may be.
    template <typename Visitor>
    void for_each_candidate(const Vec3& point, double radius, Visitor&& visit) const {
      if(_heads.empty()) {
        return;
      }
      const auto& g = _grid;
      const std::size_t x0 = g.axis_cell(point.x - radius, g.origin.x, g.dims[0]);
      const std::size_t x1 = g.axis_cell(point.x + radius, g.origin.x, g.dims[0]);
      const std::size_t y0 = g.axis_cell(point.y - radius, g.origin.y, g.dims[1]);
      const std::size_t y1 = g.axis_cell(point.y + radius, g.origin.y, g.dims[1]);
      const std::size_t z0 = g.axis_cell(point.z - radius, g.origin.z, g.dims[2]);
      const std::size_t z1 = g.axis_cell(point.z + radius, g.origin.z, g.dims[2]);
      for(std::size_t iz = z0; iz <= z1; ++iz) {
        for(std::size_t iy = y0; iy <= y1; ++iy) {
          for(std::size_t ix = x0; ix <= x1; ++ix) {
            for(Link j = _heads[g.linear(ix, iy, iz)]; j != end; j = _next[j]) {
              visit(static_cast<std::size_t>(j));
            }
          }
        }
      }
    }

    std::vector<std::size_t> neighbor_candidates(const Vec3& point, double radius) const {
      std::vector<std::size_t> out;
      for_each_candidate(point, radius, [&](std::size_t j) { out.push_back(j); });
      return out;
    }

    const GridSpec& grid() const { return _grid; }
    const std::vector<Link>& heads() const { return _heads; }
    const std::vector<Link>& next() const { return _next; }

  private:

    GridSpec _grid;
    std::vector<Link> _heads;
    std::vector<Link> _next;
};

}  // end of namespace hyb::sph ----------------------------------------------
