// Device process for the subprocess transport. Launched by the host as
//   hyb_device --connect 127.0.0.1:PORT --workers N

#include <CLI11.hpp>

#include <iostream>

#include <hyb/device.hpp>
#include <hyb/kernels.hpp>
#include <hyb/sph/simulation.hpp>
#include <hyb/subprocess.hpp>

int main(int argc, char** argv) {
  CLI::App app{"hyb_device: coprocessor worker process"};
  std::string target;
  std::uint32_t workers = 8;
  app.add_option("--connect", target, "host:port to connect to")->required();
  app.add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  hyb::register_builtin_kernels();
  hyb::sph::register_sph_kernels();

  try {
    auto endpoint = hyb::connect_to_host(target);
    hyb::serve_device(*endpoint, workers);
  }
  catch(const std::exception& e) {
    std::cerr << "hyb_device: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
