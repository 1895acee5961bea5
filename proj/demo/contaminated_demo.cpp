// Runs a short contaminated-BO comparison of the plain GP and the
// denoising GP and prints the best clean value after each iteration.

#include <iomanip>
#include <iostream>

#include "versabo/versabo.hpp"

int main(int argc, char** argv) {
  using namespace versabo;
  const std::size_t iterations = argc > 1 ? std::stoul(argv[1]) : 15;
  const double p = argc > 2 ? std::stod(argv[2]) : 0.33;

  ContaminatedSystem system(2, p);
  MhConfig mh;
  mh.steps = 2000;
  const ModelContext ctx{system.box(), mh, {}};
  GpModel gp(ctx);
  DenoisingGpModel denoising(ctx);

  RunConfig cfg;
  cfg.iterations = iterations;
  cfg.acquisition.type = AcqType::ei;
  cfg.acquisition.fidelity = 100;
  cfg.seed = Seed{2024};

  try {
    const auto a = probo_run(cfg, system, gp);
    const auto b = probo_run(cfg, system, denoising);
    std::cout << "iter  gp_best   denoising_best\n" << std::fixed << std::setprecision(4);
    for (std::size_t n = 1; n <= iterations; ++n) {
      std::cout << std::setw(4) << n << "  " << std::setw(8) << best_so_far(a.trace, n) << "  " << std::setw(8)
                << best_so_far(b.trace, n) << "\n";
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
