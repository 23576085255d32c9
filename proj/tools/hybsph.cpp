// hybsph: simulate and render the SPH nebula, optionally with simulated
// coprocessors. Exit status 0 ok, 1 runtime failure, 2 usage error.

#include <iostream>

#include <hyb/bench/driver.hpp>

int main(int argc, char** argv) {
  hyb::bench::RunConfig config;
  try {
    config = hyb::bench::parse_config(argc, argv);
  }
  catch(const hyb::bench::HelpRequested& h) {
    std::cout << h.text;
    return 0;
  }
  catch(const hyb::bench::UsageError& e) {
    std::cerr << "hybsph: " << e.what() << "\nrun with --help for usage\n";
    return 2;
  }

  try {
    if(config.bench) {
      const auto rows = hyb::bench::bench(config);
      hyb::bench::write_sweep_csv(std::cout, rows);
    }
    else {
      const auto result = hyb::bench::run(config);
      std::cout << "steps " << result.frames.size()
                << "  total_s " << result.report.total_seconds
                << "  coproc_fraction " << result.report.coproc_fraction() << '\n';
      result.report.write_csv(std::cout);
    }
  }
  catch(const std::exception& e) {
    std::cerr << "hybsph: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
