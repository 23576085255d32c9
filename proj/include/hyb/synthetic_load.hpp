#pragma once

#include <chrono>
#include <cstdint>
#include <thread>

#include "serialization.hpp"

namespace hyb {

// SyntheticLoad
//
// Calibrated artificial cost for benchmark runs: a fixed delay per item plus a
// delay per counted interaction. Delays are sleeps, so a worker costs no CPU
// while "busy" and many simulated units can share a small machine.
//
// Short delays are not slept one by one; each thread keeps a debt and sleeps
// it off once it crosses `granularity`, charging the time actually slept. The
// total delay a thread serves therefore tracks the requested total closely.
struct SyntheticLoad {

  double item_seconds {0.0};
  double interaction_seconds {0.0};

  static constexpr double granularity = 150e-6;

  bool enabled() const { return item_seconds > 0.0 || interaction_seconds > 0.0; }

  void charge(std::uint64_t interactions = 0) const {
    if(!enabled()) {
      return;
    }
    debt() += item_seconds + interaction_seconds * static_cast<double>(interactions);
    if(debt() >= granularity) {
      settle();
    }
  }

  static void settle() {
    using namespace std::chrono;
    const auto t0 = steady_clock::now();
    std::this_thread::sleep_for(duration<double>(debt()));
    debt() -= duration<double>(steady_clock::now() - t0).count();
  }

  static double& debt() {
    thread_local double d = 0.0;
    return d;
  }

  friend bool operator==(const SyntheticLoad&, const SyntheticLoad&) = default;
};

}  // end of namespace hyb ----------------------------------------------------

template <>
struct hyb::serializer<hyb::SyntheticLoad> {

  template <typename Writer>
  static void serialize(Writer& w, const SyntheticLoad& s) {
    w.write(s.item_seconds);
    w.write(s.interaction_seconds);
  }

  template <typename Reader>
  static void deserialize(Reader& r, SyntheticLoad& s) {
    s.item_seconds = r.template read<double>();
    s.interaction_seconds = r.template read<double>();
  }

  static constexpr std::size_t size(const SyntheticLoad&) { return 16; }
};
