// Multiplies and offsets a million integers using two host workers and two
// simulated coprocessors, then reports who did what.

#include <iostream>
#include <numeric>
#include <vector>

#include <hyb/hybrid.hpp>
#include <hyb/kernels.hpp>

int main() {
  std::vector<std::int64_t> items(1'000'000);
  std::iota(items.begin(), items.end(), 0);

  hyb::DeviceSpec device;
  device.workers = 4;
  device.link.bandwidth = 256.0 * 1024 * 1024;
  device.link.latency = 50e-6;
  const std::vector<hyb::DeviceSpec> devices {device, device};

  hyb::HybridOptions options;
  options.host_workers = 2;

  const auto stats = hyb::hybrid_for_each(items, hyb::ScaleAdd{3}, devices, options);

  for(std::size_t i = 0; i < items.size(); ++i) {
    if(items[i] != static_cast<std::int64_t>(i) * 3 + 2) {
      std::cerr << "wrong result at " << i << '\n';
      return 1;
    }
  }
  stats.write_csv(std::cout);
  std::cout << "device fraction " << stats.device_fraction() << '\n';
  return 0;
}
