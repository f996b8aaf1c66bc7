// Draws one desk-sized scenario and delivers it with greedy cooperation,
// comparing against full cooperation and a preference cache.

#include "cachesec/delivery.hpp"
#include "cachesec/cache.hpp"

#include <iostream>

int main(int argc, char** argv) {
  using namespace cachesec;
  const std::uint64_t seed = argc > 1 ? std::stoull(argv[1]) : 1;
  const SystemConfig cfg = SystemConfig::desk();
  const auto pop = zipf_popularity(cfg.num_files, cfg.zipf_exponent);
  const Scenario s = generate_scenario(cfg, pop, seed);
  const auto ctx = DeliveryContext::from_config(cfg);

  const auto cache = preference_caching(pop, cfg);
  const auto greedy = greedy_delivery(s, cache, ctx);
  const auto full = full_coop_baseline(s, ctx);

  auto show = [](const char* name, const DeliveryOutcome& o) {
    std::cout << name << ": ";
    if (o.outage) std::cout << "outage\n";
    else std::cout << o.total_power_dbm() << " dBm, " << o.plan.cooperating_bs() << " BSs, " << o.solve_count
                   << " solves\n";
  };
  show("greedy + preference cache", greedy);
  show("full cooperation", full);
  if (!greedy.outage) {
    const auto check = verify_solution(s, greedy.plan.q, greedy.beams.w, ctx.thresholds);
    std::cout << "largest relative constraint violation " << check.max_violation() << '\n';
    for (std::size_t k = 0; k < check.rate.size(); ++k)
      std::cout << "request " << k << ": " << check.rate[k] << " bit/s/Hz to the user, " << check.er_rate[k]
                << " to the ER\n";
  }
}
