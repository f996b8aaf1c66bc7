// Trains a cache on a few historical scenarios and prints the placement next
// to the popularity baseline.

#include "cachesec/harness.hpp"

#include <iomanip>
#include <iostream>

int main() {
  using namespace cachesec;
  SystemConfig cfg = SystemConfig::desk();
  cfg.cache_capacity_bits = 1.5 * cfg.file_size_bits;
  const auto pop = zipf_popularity(cfg.num_files, cfg.zipf_exponent);
  const TrainingSet ts = generate_training_set(cfg, pop, 8, 1);
  const auto trained = train_cache_q1(ts);
  if (!trained.optimal()) {
    std::cerr << "training failed: " << trained.message << '\n';
    return 1;
  }
  const auto pref = preference_caching(pop, cfg);
  std::cout << std::fixed << std::setprecision(3);
  std::cout << "relaxed training power " << watts_to_dbm(trained.average_power_w) << " dBm\n";
  std::cout << "file  popularity  trained(BS0..)      preference\n";
  for (int f = 0; f < cfg.num_files; ++f) {
    std::cout << std::setw(4) << f << "  " << std::setw(10) << pop.theta[f] << " ";
    for (int m = 0; m < cfg.num_bs; ++m) std::cout << ' ' << trained.cache.c(f, m);
    std::cout << "   " << pref.c(f, 0) << '\n';
  }
}
