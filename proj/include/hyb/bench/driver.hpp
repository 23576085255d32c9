#pragma once

#include <oneapi/tbb/global_control.h>
#include <oneapi/tbb/task_arena.h>
#include <oneapi/tbb/task_group.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <unistd.h>
#include <vector>

#include "../render/volume.hpp"
#include "../sph/scene.hpp"
#include "../sph/simulation.hpp"
#include "run_config.hpp"

namespace hyb::bench {

// Per-step row of the timing report.
struct StepTiming {
  std::size_t step {0};
  std::array<double, 4> phase_seconds {};
  double render_seconds {0.0};
  double coproc_fraction {0.0};
};

// TimingReport
struct TimingReport {
  std::vector<StepTiming> steps;
  RunStatistics units;    // phases 2 and 3 of all steps
  double total_seconds {0.0};

  double coproc_fraction() const { return units.device_fraction(); }

  void write_csv(std::ostream& os) const {
    os << "step,phase1_s,phase2_s,phase3_s,phase4_s,render_s,coproc_fraction\n";
    for(const auto& s : steps) {
      os << s.step;
      for(double p : s.phase_seconds) {
        os << ',' << p;
      }
      os << ',' << s.render_seconds << ',' << s.coproc_fraction << '\n';
    }
  }
};

struct RunResult {
  TimingReport report;
  std::vector<render::Image> frames;
  std::vector<sph::Particle> final_particles;
};

// Directory of the running executable (empty if unknown).
inline std::filesystem::path executable_dir() {
  std::error_code ec;
  auto p = std::filesystem::read_symlink("/proc/self/exe", ec);
  return ec ? std::filesystem::path{} : p.parent_path();
}

// Procedure: resolve_device_exe
//
// --device-exe, else $HYB_DEVICE_EXE, else hyb_device next to this binary.
inline std::string resolve_device_exe(const RunConfig& c) {
  if(!c.device_exe.empty()) {
    return c.device_exe;
  }
  if(const char* env = std::getenv("HYB_DEVICE_EXE"); env && *env) {
    return env;
  }
  return (executable_dir() / "hyb_device").string();
}

inline std::vector<DeviceSpec> make_devices(const RunConfig& c) {
  std::vector<DeviceSpec> devices(c.devices);
  const auto exe = c.transport == TransportKind::subprocess ? resolve_device_exe(c) : std::string{};
  for(std::size_t d = 0; d < c.devices; ++d) {
    devices[d].workers = c.workers_of(d);
    devices[d].link = c.link();
    devices[d].executable = exe;
  }
  return devices;
}

inline sph::StepOptions make_step_options(const RunConfig& c) {
  sph::StepOptions o;
  o.hybrid.host_workers = c.host_workers;
  o.hybrid.buffer_capacity = c.buffer_capacity;
  o.load = {c.item_delay_us * 1e-6, c.interaction_delay_us * 1e-6};
  return o;
}

inline render::Camera make_camera(const RunConfig& c) {
  render::Camera cam;
  cam.width = c.width;
  cam.height = c.height;
  return cam;
}

// Procedure: pipeline_driver
//
// Runs `steps` steps and renders one frame after each. Pipelined, frame N is
// rendered on its own snapshot while step N+1 runs; both use the pool of the
// current task arena. Returns the frames in step order.
inline std::vector<render::Image> pipeline_driver(
  sph::SimulationState& U,
  std::size_t steps,
  const RunConfig& c,
  std::span<const DeviceSpec> devices,
  TimingReport& report
) {
  const auto step_options = make_step_options(c);
  const auto camera = make_camera(c);
  const render::RenderParams render_params;
  std::vector<render::Image> frames(steps);
  report.steps.assign(steps, {});

  auto simulate = [&](std::size_t s) {
    auto st = sph::simulation_step(U, devices, step_options);
    auto& row = report.steps[s];
    row.step = s;
    row.phase_seconds = st.phase_seconds;
    row.coproc_fraction = st.coproc_fraction();
    report.units.merge(st.density);
    report.units.merge(st.pressure);
  };
  auto render = [&](std::size_t s, std::shared_ptr<const sph::SimulationState> snapshot) {
    const auto t0 = Clock::now();
    frames[s] = render::render_frame(*snapshot, camera, render_params);
    report.steps[s].render_seconds = Seconds(Clock::now() - t0).count();
  };

  if(!c.pipeline) {
    for(std::size_t s = 0; s < steps; ++s) {
      simulate(s);
      render(s, std::make_shared<const sph::SimulationState>(render::make_render_snapshot(U)));
    }
    return frames;
  }

  tbb::task_group renderer;
  for(std::size_t s = 0; s < steps; ++s) {
    simulate(s);
    renderer.wait();
    auto snapshot = std::make_shared<const sph::SimulationState>(render::make_render_snapshot(U));
    renderer.run([&render, s, snapshot]{ render(s, snapshot); });
  }
  renderer.wait();
  return frames;
}

// Procedure: run
//
// One full run. The stopwatch starts after scene setup and stops once the
// last frame is rendered; writing files happens outside it.
inline RunResult run(const RunConfig& c) {
  c.validate();
  const auto devices = make_devices(c);

  const std::size_t arena_size = std::max<std::size_t>(1, c.host_workers);
  // simulated units sleep rather than compute, so allow more threads than cores
  tbb::global_control threads(
    tbb::global_control::max_allowed_parallelism,
    std::max<std::size_t>(arena_size + 1, std::thread::hardware_concurrency())
  );
  tbb::task_arena arena(static_cast<int>(arena_size));

  RunResult result;
  auto U = sph::make_nebula(c.scene);
  const auto t0 = Clock::now();
  arena.execute([&]{
    result.frames = pipeline_driver(U, c.steps, c, devices, result.report);
  });
  result.report.total_seconds = Seconds(Clock::now() - t0).count();
  result.final_particles = std::move(U.particles);

  if(!c.out_dir.empty()) {
    std::filesystem::create_directories(c.out_dir);
    for(std::size_t s = 0; s < result.frames.size(); ++s) {
      char name[32];
      std::snprintf(name, sizeof(name), "frame_%05zu.ppm", s);
      render::write_ppm((std::filesystem::path(c.out_dir) / name).string(), result.frames[s]);
    }
    std::ofstream timing(std::filesystem::path(c.out_dir) / "timing.csv");
    result.report.write_csv(timing);
    std::ofstream units(std::filesystem::path(c.out_dir) / "units.csv");
    result.report.units.write_csv(units);
  }
  return result;
}

struct SweepRow {
  std::size_t particles {0};
  std::size_t devices {0};
  double total_seconds {0.0};
  double speedup {1.0};
};

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "particles,devices,total_s,speedup_vs_host_only\n";
  for(const auto& r : rows) {
    os << r.particles << ',' << r.devices << ',' << r.total_seconds << ',' << r.speedup << '\n';
  }
}

// Procedure: bench
//
// For every sweep size, a host-only run and, if devices are configured, a run
// with them. Speedups are relative to the host-only run of the same size.
inline std::vector<SweepRow> bench(const RunConfig& c) {
  if(c.sweep.empty()) {
    throw UsageError("the sweep list is empty");
  }
  std::vector<std::size_t> device_counts {0};
  if(c.devices > 0) {
    device_counts.push_back(c.devices);
  }
  std::vector<SweepRow> rows;
  for(auto n : c.sweep) {
    double host_only = 0.0;
    for(auto d : device_counts) {
      RunConfig cell = c;
      cell.scene.particles = n;
      cell.devices = d;
      cell.out_dir.clear();
      const auto r = run(cell);
      SweepRow row{n, d, r.report.total_seconds, 1.0};
      if(d == 0) {
        host_only = row.total_seconds;
      }
      else {
        row.speedup = host_only / row.total_seconds;
      }
      rows.push_back(row);
    }
  }
  if(!c.out_dir.empty()) {
    std::filesystem::create_directories(c.out_dir);
    std::ofstream os(std::filesystem::path(c.out_dir) / "sweep.csv");
    write_sweep_csv(os, rows);
  }
  return rows;
}

}  // end of namespace hyb::bench --------------------------------------------
