#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include "state.hpp"

namespace hyb::sph {

// SceneConfig
struct SceneConfig {
  std::size_t particles {5000};
  std::uint64_t seed {1};
  double radius {1.0};      // nebula radius
  double total_mass {1.0};
  SimParams params {};
};

// Procedure: make_nebula
//
// Equal masses uniformly distributed in a ball, at rest. Material 0, 1 or 2
// by radius band (inner, middle, outer third).
inline SimulationState make_nebula(const SceneConfig& cfg) {
  cfg.params.validate();
  if(!(cfg.radius > 0.0) || !(cfg.total_mass > 0.0)) {
    throw Error("radius and total_mass must be positive");
  }
  SimulationState U;
  U.params = cfg.params;
  U.particles.resize(cfg.particles);
  std::mt19937_64 rng(cfg.seed);
  // raw 53-bit draws keep the scene identical across standard libraries
  auto uniform = [&]{ return static_cast<double>(rng() >> 11) * 0x1.0p-53 * 2.0 - 1.0; };
  const double m = cfg.total_mass / static_cast<double>(std::max<std::size_t>(cfg.particles, 1));
  for(std::size_t i = 0; i < cfg.particles; ++i) {
    Vec3 u;
    do {
      u = {uniform(), uniform(), uniform()};
    } while(dot(u, u) > 1.0);
    auto& p = U.particles[i];
    p.id = i;
    p.position = u * cfg.radius;
    p.mass = m;
    const double band = norm(u) * 3.0;
    p.material = band < 1.0 ? 0u : (band < 2.0 ? 1u : 2u);
  }
  return U;
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if(b == std::string::npos) {
    return {};
  }
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  std::istringstream is(text);
  T v{};
  if(!(is >> v) || !(is >> std::ws).eof()) {
    throw Error("bad value for " + key + ": '" + text + "'");
  }
  return v;
}

inline std::vector<double> parse_list(const std::string& key, const std::string& text, std::size_t n) {
  std::vector<double> out;
  std::istringstream is(text);
  std::string item;
  while(std::getline(is, item, ',')) {
    out.push_back(parse_number<double>(key, trim(item)));
  }
  if(out.size() != n) {
    throw Error(key + " expects " + std::to_string(n) + " comma-separated values");
  }
  return out;
}

}  // end of namespace detail ------------------------------------------------

// Procedure: read_key_values
//
// Flat "key = value" text; '#' starts a comment. Later keys win.
inline std::map<std::string, std::string> read_key_values(std::istream& is) {
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t lineno = 0;
  while(std::getline(is, line)) {
    ++lineno;
    if(auto hash = line.find('#'); hash != std::string::npos) {
      line.erase(hash);
    }
    line = detail::trim(line);
    if(line.empty()) {
      continue;
    }
    const auto eq = line.find('=');
    if(eq == std::string::npos) {
      throw Error("line " + std::to_string(lineno) + ": expected key=value");
    }
    kv[detail::trim(line.substr(0, eq))] = detail::trim(line.substr(eq + 1));
  }
  return kv;
}

inline std::map<std::string, std::string> read_key_values(const std::string& path) {
  std::ifstream in(path);
  if(!in) {
    throw Error("cannot open config file " + path);
  }
  return read_key_values(in);
}

// Procedure: apply_scene_key
//
// Returns false if the key is not a scene key.
inline bool apply_scene_key(SceneConfig& cfg, const std::string& key, const std::string& value) {
  using detail::parse_number;
  if(key == "particles") cfg.particles = parse_number<std::size_t>(key, value);
  else if(key == "seed") cfg.seed = parse_number<std::uint64_t>(key, value);
  else if(key == "radius") cfg.radius = parse_number<double>(key, value);
  else if(key == "h") cfg.params.h = parse_number<double>(key, value);
  else if(key == "dt") cfg.params.dt = parse_number<double>(key, value);
  else if(key == "k_eos") cfg.params.k_eos = parse_number<double>(key, value);
  else if(key == "G") cfg.params.G = parse_number<double>(key, value);
  else if(key == "epsilon") cfg.params.epsilon = parse_number<double>(key, value);
  else if(key == "world_box") {
    const auto v = detail::parse_list(key, value, 6);
    cfg.params.world_box = {{v[0], v[1], v[2]}, {v[3], v[4], v[5]}};
  }
  else if(key == "gravity_dims") {
    const auto v = detail::parse_list(key, value, 3);
    for(std::size_t i = 0; i < 3; ++i) {
      if(!(v[i] >= 1.0) || v[i] != std::floor(v[i])) {
        throw Error("gravity_dims must be positive integers");
      }
      cfg.params.gravity_dims[i] = static_cast<std::size_t>(v[i]);
    }
  }
  else if(key == "gravity_sampling") {
    if(value == "nearest") cfg.params.gravity_sampling = GravitySampling::nearest;
    else if(value == "trilinear") cfg.params.gravity_sampling = GravitySampling::trilinear;
    else throw Error("gravity_sampling must be nearest or trilinear");
  }
  else {
    return false;
  }
  return true;
}

}  // end of namespace hyb::sph ----------------------------------------------
