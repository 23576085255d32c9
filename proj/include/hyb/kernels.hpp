#pragma once

#include <cstdint>
#include <string_view>

#include "device.hpp"
#include "synthetic_load.hpp"

// Small functors over 64-bit integers, registered in every device binary.
// They exercise the runtime without any application code.

namespace hyb {

// ScaleAdd: x -> x * factor + 2
struct ScaleAdd {
  static constexpr std::string_view kernel_name = "hyb.scale_add";

  std::int32_t factor {1};

  void operator()(std::int64_t& x) const { x = x * factor + 2; }
};

// Mix: a fixed integer hash of x, optionally slowed down by a delay that
// varies from item to item.
struct Mix {
  static constexpr std::string_view kernel_name = "hyb.mix";

  std::uint64_t salt {0};
  double max_delay_seconds {0.0};

  static std::uint64_t hash(std::uint64_t x) {
    x ^= x >> 33;
    x *= 0xff51afd7ed558ccdull;
    x ^= x >> 33;
    x *= 0xc4ceb9fe1a85ec53ull;
    x ^= x >> 33;
    return x;
  }

  void operator()(std::int64_t& x) const {
    const auto h = hash(static_cast<std::uint64_t>(x) ^ salt);
    if(max_delay_seconds > 0.0) {
      SyntheticLoad{max_delay_seconds * static_cast<double>(h % 1024) / 1024.0, 0.0}.charge();
    }
    x = static_cast<std::int64_t>(h >> 1);
  }
};

}  // end of namespace hyb ----------------------------------------------------

template <>
struct hyb::serializer<hyb::ScaleAdd> {
  template <typename Writer>
  static void serialize(Writer& w, const ScaleAdd& f) { w.write(f.factor); }
  template <typename Reader>
  static void deserialize(Reader& r, ScaleAdd& f) { f.factor = r.template read<std::int32_t>(); }
  static constexpr std::size_t size(const ScaleAdd&) { return 4; }
};

template <>
struct hyb::serializer<hyb::Mix> {
  template <typename Writer>
  static void serialize(Writer& w, const Mix& f) {
    w.write(f.salt);
    w.write(f.max_delay_seconds);
  }
  template <typename Reader>
  static void deserialize(Reader& r, Mix& f) {
    f.salt = r.template read<std::uint64_t>();
    f.max_delay_seconds = r.template read<double>();
  }
  static constexpr std::size_t size(const Mix&) { return 16; }
};

namespace hyb {

// Procedure: register_builtin_kernels
inline void register_builtin_kernels(KernelRegistry& registry = KernelRegistry::global()) {
  registry.add<ScaleAdd, std::int64_t>();
  registry.add<Mix, std::int64_t>();
}

}  // end of namespace hyb ----------------------------------------------------
