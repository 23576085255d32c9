#pragma once

#include <oneapi/tbb/blocked_range.h>
#include <oneapi/tbb/parallel_for.h>

#include <atomic>
#include <cmath>
#include <vector>

#include "../sph/kernel.hpp"
#include "../sph/state.hpp"
#include "camera.hpp"
#include "image.hpp"

// Volume ray casting of the nebula: midpoint samples at fixed spacing along
// each pixel ray, front-to-back emission-absorption compositing.

namespace hyb::render {

// RenderParams
struct RenderParams {
  double step {0.05};
  double absorption {5.0};      // sigma
  double max_distance {6.0};
  double early_exit_alpha {0.99};
  Vec3 background {0.0, 0.0, 0.0};
  std::vector<Vec3> palette {
    {1.0, 0.6, 0.2},  // core
    {0.9, 0.25, 0.5},
    {0.3, 0.5, 1.0},  // outer shell
  };

  void validate() const {
    if(!(step > 0.0) || !(absorption >= 0.0) || !(max_distance >= 0.0)) {
      throw Error("render step must be positive, absorption and distance non-negative");
    }
    if(!(early_exit_alpha > 0.0 && early_exit_alpha <= 1.0)) {
      throw Error("early_exit_alpha must lie in (0, 1]");
    }
    if(palette.empty()) {
      throw Error("palette must not be empty");
    }
  }

  const Vec3& color_of(std::uint32_t material) const {
    return palette[material % palette.size()];
  }
};

struct MediumSample {
  double density {0.0};
  Vec3 color;
};

// Procedure: sample_medium
//
// Density is the field property of the particle densities, which reduces to
// sum_j m_j W. Color is the palette color of each contributing particle,
// weighted by its share of that sum.
inline MediumSample sample_medium(const sph::SimulationState& U, const Vec3& x, const RenderParams& params) {
  MediumSample s;
  const double h = U.params.h;
  U.index.for_each_candidate(x, h, [&](std::size_t j) {
    const auto& pj = U.particles[j];
    const double r = norm(x - pj.position);
    if(r < h) {
      const double term = pj.density * (pj.mass / pj.density * sph::kernel_w(r, h));
      s.density += term;
      s.color += params.color_of(pj.material) * term;
    }
  });
  s.color = s.density > 0.0 ? s.color * (1.0 / s.density) : params.background;
  return s;
}

// Procedure: composite_ray
//
// `medium(point)` returns a MediumSample. `observe(k, alpha)` is called after
// each sample with the accumulated opacity.
template <typename Medium, typename Observer>
Vec3 composite_ray(const Ray& ray, const RenderParams& params, Medium&& medium, Observer&& observe, std::size_t* samples = nullptr) {
  Vec3 C;
  double A = 0.0;
  std::size_t k = 0;
  for(;; ++k) {
    const double t = (static_cast<double>(k) + 0.5) * params.step;
    if(t > params.max_distance || A >= params.early_exit_alpha) {
      break;
    }
    const MediumSample m = medium(ray.origin + ray.direction * t);
    const double a = 1.0 - std::exp(-params.absorption * m.density * params.step);
    C += m.color * ((1.0 - A) * a);
    A += (1.0 - A) * a;
    observe(k, A);
  }
  if(samples) {
    *samples += k;
  }
  return C + params.background * (1.0 - A);
}

inline Vec3 composite_ray(const sph::SimulationState& U, const Ray& ray, const RenderParams& params, std::size_t* samples = nullptr) {
  return composite_ray(
    ray, params,
    [&](const Vec3& x) { return sample_medium(U, x, params); },
    [](std::size_t, double) {},
    samples
  );
}

struct RenderStats {
  std::size_t rays {0};
  std::size_t samples {0};
};

// Procedure: make_render_snapshot
//
// Copy of a finished step with the neighbor index rebuilt over the final
// positions (densities are those of the step's phase 2).
inline sph::SimulationState make_render_snapshot(const sph::SimulationState& U) {
  sph::SimulationState s;
  s.particles = U.particles;
  s.params = U.params;
  s.rebuild_index();
  return s;
}

// Procedure: render_frame
//
// Pixels are independent; rows are spread over the current task arena.
inline Image render_frame(const sph::SimulationState& U, const Camera& camera, const RenderParams& params, RenderStats* stats = nullptr) {
  camera.validate();
  params.validate();
  Image img(camera.width, camera.height);
  std::atomic<std::size_t> samples {0};
  tbb::parallel_for(tbb::blocked_range<std::size_t>(0, camera.height), [&](const tbb::blocked_range<std::size_t>& rows) {
    std::size_t local = 0;
    for(std::size_t y = rows.begin(); y < rows.end(); ++y) {
      for(std::size_t x = 0; x < camera.width; ++x) {
        const Vec3 c = composite_ray(U, generate_ray(camera, x, y), params, &local);
        img.set(x, y, to_byte(c.x), to_byte(c.y), to_byte(c.z));
      }
    }
    samples += local;
  });
  if(stats) {
    stats->rays = camera.width * camera.height;
    stats->samples = samples.load();
  }
  return img;
}

}  // end of namespace hyb::render -------------------------------------------
