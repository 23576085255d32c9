#pragma once

#include <CLI11.hpp>

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "../error.hpp"
#include "../sph/scene.hpp"
#include "../transport.hpp"

namespace hyb::bench {

// Bad command line or config file; the CLI exits with status 2.
struct UsageError : Error {
  using Error::Error;
};

// --help was given; `text` is the help screen.
struct HelpRequested {
  std::string text;
};

// RunConfig
struct RunConfig {
  sph::SceneConfig scene {};
  std::size_t steps {3};
  std::size_t devices {0};
  std::vector<std::uint32_t> device_workers {8};  // cycled over the devices
  std::size_t host_workers {4};
  double bandwidth_mib {1024.0};                  // MiB/s
  double latency_ms {0.01};
  TransportKind transport {TransportKind::in_process};
  bool pipeline {false};
  std::size_t width {100};
  std::size_t height {100};
  std::string out_dir {"out"};
  std::size_t buffer_capacity {1u << 20};
  bool bench {false};
  std::vector<std::size_t> sweep {};
  double item_delay_us {0.0};
  double interaction_delay_us {0.0};
  std::string device_exe {};

  LinkConfig link() const {
    return {bandwidth_mib * 1024.0 * 1024.0, latency_ms * 1e-3, transport};
  }

  std::uint32_t workers_of(std::size_t device) const {
    return device_workers[device % device_workers.size()];
  }

  void validate() const {
    if(!(bandwidth_mib > 0.0)) throw UsageError("--bandwidth must be positive");
    if(!(latency_ms >= 0.0)) throw UsageError("--latency must be non-negative");
    if(width == 0 || height == 0) throw UsageError("--resolution must be at least 1x1");
    if(pipeline && steps < 1) throw UsageError("--pipeline needs at least one step");
    if(device_workers.empty()) throw UsageError("--device-workers needs at least one value");
    for(auto w : device_workers) {
      if(w == 0) throw UsageError("--device-workers values must be positive");
    }
    if(buffer_capacity == 0) throw UsageError("--buffer-capacity must be positive");
    if(!(item_delay_us >= 0.0) || !(interaction_delay_us >= 0.0)) {
      throw UsageError("synthetic delays must be non-negative");
    }
    if(bench && sweep.empty()) throw UsageError("--bench needs a non-empty --sweep");
    try {
      scene.params.validate();
    }
    catch(const Error& e) {
      throw UsageError(e.what());
    }
  }
};

// Particle counts of the full-scale sweep; truncate for desk runs.
inline const std::vector<std::size_t>& sweep_ladder() {
  static const std::vector<std::size_t> ladder {
    1000, 8000, 27000, 64000, 125000, 216000, 343000, 512000, 729000, 1000000
  };
  return ladder;
}

namespace detail {

inline std::pair<std::size_t, std::size_t> parse_resolution(const std::string& s) {
  const auto x = s.find('x');
  if(x == std::string::npos) {
    throw UsageError("resolution must look like WxH");
  }
  try {
    std::size_t used = 0;
    const auto w = std::stoul(s.substr(0, x), &used);
    if(used != x) throw UsageError("");
    const auto rest = s.substr(x + 1);
    const auto h = std::stoul(rest, &used);
    if(used != rest.size()) throw UsageError("");
    return {w, h};
  }
  catch(const std::exception&) {
    throw UsageError("resolution must look like WxH, got '" + s + "'");
  }
}

template <typename T>
std::vector<T> parse_csv_list(const std::string& key, const std::string& s) {
  std::vector<T> out;
  std::istringstream is(s);
  std::string item;
  while(std::getline(is, item, ',')) {
    out.push_back(sph::detail::parse_number<T>(key, sph::detail::trim(item)));
  }
  return out;
}

inline TransportKind parse_transport(const std::string& s) {
  if(s == "in-process" || s == "in_process") return TransportKind::in_process;
  if(s == "subprocess") return TransportKind::subprocess;
  throw UsageError("transport must be in-process or subprocess");
}

// Applies one key of the run config file; false for unknown keys.
inline bool apply_run_key(RunConfig& c, const std::string& key, const std::string& value) {
  using sph::detail::parse_number;
  if(sph::apply_scene_key(c.scene, key, value)) return true;
  if(key == "steps") c.steps = parse_number<std::size_t>(key, value);
  else if(key == "devices") c.devices = parse_number<std::size_t>(key, value);
  else if(key == "device_workers") c.device_workers = parse_csv_list<std::uint32_t>(key, value);
  else if(key == "host_workers") c.host_workers = parse_number<std::size_t>(key, value);
  else if(key == "bandwidth") c.bandwidth_mib = parse_number<double>(key, value);
  else if(key == "latency") c.latency_ms = parse_number<double>(key, value);
  else if(key == "transport") c.transport = parse_transport(value);
  else if(key == "pipeline") c.pipeline = value == "1" || value == "true";
  else if(key == "resolution") std::tie(c.width, c.height) = parse_resolution(value);
  else if(key == "out") c.out_dir = value;
  else if(key == "buffer_capacity") c.buffer_capacity = parse_number<std::size_t>(key, value);
  else if(key == "sweep") c.sweep = parse_csv_list<std::size_t>(key, value);
  else if(key == "item_delay_us") c.item_delay_us = parse_number<double>(key, value);
  else if(key == "interaction_delay_us") c.interaction_delay_us = parse_number<double>(key, value);
  else if(key == "device_exe") c.device_exe = value;
  else return false;
  return true;
}

}  // end of namespace detail ------------------------------------------------

// Procedure: parse_config
//
// Defaults, then the --config file, then flags; later sources win.
// Throws UsageError on anything malformed and HelpRequested for --help.
inline RunConfig parse_config(int argc, const char* const* argv) {
  const RunConfig defaults;
  CLI::App app{"hybsph: SPH nebula simulation on host workers and simulated coprocessors"};
  app.option_defaults()->always_capture_default();

  // every flag is captured as text, then applied through the file-key path
  std::map<std::string, std::string> given;
  std::vector<std::pair<std::string, std::string>> keyed;  // flag -> key
  auto text_option = [&](const std::string& flag, const std::string& key, const std::string& help, const std::string& def) {
    app.add_option(flag, given[key], help)->default_str(def);
    keyed.emplace_back(flag, key);
  };

  text_option("--particles", "particles", "number of particles", std::to_string(defaults.scene.particles));
  text_option("--steps", "steps", "simulation steps (one frame each)", std::to_string(defaults.steps));
  text_option("--devices", "devices", "number of simulated coprocessors", "0");
  text_option("--device-workers", "device_workers", "workers per device, comma list cycled over devices", "8");
  text_option("--host-workers", "host_workers", "host worker count", std::to_string(defaults.host_workers));
  text_option("--bandwidth", "bandwidth", "link bandwidth in MiB/s (> 0)", "1024");
  text_option("--latency", "latency", "link latency in ms", "0.01");
  text_option("--transport", "transport", "in-process or subprocess", "in-process");
  text_option("--resolution", "resolution", "frame size WxH", "100x100");
  text_option("--seed", "seed", "scene seed", "1");
  text_option("--out", "out", "output directory (empty: write nothing)", defaults.out_dir);
  text_option("--buffer-capacity", "buffer_capacity", "transfer buffer size in bytes", std::to_string(defaults.buffer_capacity));
  text_option("--sweep", "sweep", "particle counts for --bench, comma list", "");
  text_option("--item-delay-us", "item_delay_us", "synthetic delay per item (benchmark mode)", "0");
  text_option("--interaction-delay-us", "interaction_delay_us", "synthetic delay per neighbor interaction (benchmark mode)", "0");
  text_option("--device-exe", "device_exe", "device binary for the subprocess transport", "next to hybsph");
  bool pipeline = false;
  bool bench = false;
  std::string config_file;
  auto* pipeline_flag = app.add_flag("--pipeline", pipeline, "render frame N while simulating step N+1");
  auto* bench_flag = app.add_flag("--bench", bench, "run the particle-count sweep instead of one run");
  app.add_option("--config", config_file, "key=value file; flags override it");

  std::vector<std::string> args;
  for(int i = argc - 1; i > 0; --i) {
    args.emplace_back(argv[i]);
  }
  try {
    app.parse(args);
  }
  catch(const CLI::CallForHelp&) {
    throw HelpRequested{app.help()};
  }
  catch(const CLI::ParseError& e) {
    throw UsageError(e.what());
  }

  RunConfig c = defaults;
  try {
    if(!config_file.empty()) {
      for(const auto& [key, value] : sph::read_key_values(config_file)) {
        if(!detail::apply_run_key(c, key, value)) {
          throw UsageError("unknown key in " + config_file + ": " + key);
        }
      }
    }
    for(const auto& [flag, key] : keyed) {
      if(app.count(flag) > 0) {
        detail::apply_run_key(c, key, given[key]);
      }
    }
  }
  catch(const UsageError&) {
    throw;
  }
  catch(const Error& e) {
    throw UsageError(e.what());
  }
  if(pipeline_flag->count() > 0) c.pipeline = pipeline;
  if(bench_flag->count() > 0) c.bench = bench;
  c.validate();
  return c;
}

}  // end of namespace hyb::bench --------------------------------------------
