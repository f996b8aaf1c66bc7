#include "cachesec/harness.hpp"
#include "cachesec/oracles.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

using namespace cachesec;

namespace {

SystemConfig tiny() {
  SystemConfig c = SystemConfig::desk();
  c.num_bs = 2;
  c.num_files = 2;
  c.cache_capacity_bits = 0.5 * c.file_size_bits;
  return c;
}

// Brute force over every combination of per-scenario plans, with the cache
// from the same greedy fill the DP uses.
double brute_force(const TrainingSet& ts) {
  const int W = ts.size();
  std::vector<std::vector<std::pair<Cooperation, double>>> opts(W);
  for (int w = 0; w < W; ++w) {
    const auto& s = ts.scenarios[w];
    Cooperation q = Cooperation::full(s);
    for (std::uint64_t mask = 0; mask < (1ull << q.size()); ++mask) {
      q.set_mask(mask);
      const auto sol = solve_r1(build_r1(s, q, ts.thresholds), R1Options::fast());
      if (sol.optimal()) opts[w].push_back({q, sol.objective_w});
    }
  }
  const auto avg_b = ts.average_backhaul();
  double best = kInf;
  std::vector<std::size_t> pick(W, 0);
  while (true) {
    double total = 0.0;
    bool ok = true;
    for (int w = 0; w < W; ++w) total += opts[w][pick[w]].second;
    for (int m = 0; m < ts.num_bs() && ok; ++m) {
      std::vector<double> counts(ts.num_files(), 0.0);
      for (int w = 0; w < W; ++w) {
        const auto& q = opts[w][pick[w]].first;
        for (int r = 0; r < q.num_files(); ++r) counts[q.files()[r]] += q.get(r, m);
      }
      ok = oracle::detail::min_backhaul_load(counts, ts, m) / W <= avg_b[m] + 1e-9 * std::max(1.0, avg_b[m]);
    }
    if (ok) best = std::min(best, total / W);
    int w = 0;
    while (w < W && ++pick[w] == opts[w].size()) pick[w++] = 0;
    if (w == W) break;
  }
  return best;
}

}  // namespace

TEST(Mrt, PowerAndBeam) {
  CVec h(2);
  h << cd(3.0, 0.0), cd(0.0, 4.0);
  EXPECT_DOUBLE_EQ(oracle::mrt_power(h, 2.0, 0.5), 2.0 * 0.5 / 25.0);
  const CVec w = oracle::mrt_beamformer(h, 2.0, 0.5);
  EXPECT_NEAR(std::norm(h.dot(w)) / 0.5, 2.0, 1e-12);
}

TEST(UplinkDownlink, SingleUserIsMrt) {
  const CMat h = cachesec::testing::gaussian(3, 1, 4);
  const auto d = oracle::uplink_downlink(h, {1.5}, 0.2);
  ASSERT_TRUE(d.converged);
  EXPECT_NEAR(d.power_w, oracle::mrt_power(h.col(0), 1.5, 0.2), 1e-12);
}

TEST(UplinkDownlink, MeetsTargetsWithEquality) {
  const CMat h = cachesec::testing::gaussian(4, 3, 8);
  const std::vector<double> g{0.5, 1.0, 2.0};
  const auto d = oracle::uplink_downlink(h, g, 1.0);
  ASSERT_TRUE(d.converged);
  for (int k = 0; k < 3; ++k) {
    double interference = 1.0;
    for (int j = 0; j < 3; ++j)
      if (j != k) interference += std::norm(h.col(k).dot(d.w[j]));
    EXPECT_NEAR(std::norm(h.col(k).dot(d.w[k])) / interference, g[k], 1e-8);
  }
  double total = 0.0;
  for (const auto& w : d.w) total += w.squaredNorm();
  EXPECT_NEAR(total, d.power_w, 1e-9 * d.power_w);
}

TEST(Q0, DynamicProgramMatchesBruteForce) {
  const auto cfg = tiny();
  const auto pop = zipf_popularity(cfg.num_files, cfg.zipf_exponent);
  int compared = 0;
  for (std::uint64_t seed : {1, 2, 3, 4}) {
    const auto ts = generate_training_set(cfg, pop, 2, seed);
    const auto dp = oracle::q0_enumerate(ts);
    const double bf = brute_force(ts);
    EXPECT_EQ(dp.feasible, std::isfinite(bf));
    if (!dp.feasible) continue;
    ++compared;
    EXPECT_NEAR(dp.average_power_w / bf, 1.0, 1e-9);
    EXPECT_EQ(dp.plans.size(), 2u);
    EXPECT_TRUE(cache_feasibility(dp.cache, cfg).feasible);
  }
  EXPECT_GT(compared, 0);
}

TEST(Q0, NeverBelowRelaxation) {
  const auto cfg = tiny();
  const auto pop = zipf_popularity(cfg.num_files, cfg.zipf_exponent);
  for (std::uint64_t seed : {5, 6}) {
    const auto ts = generate_training_set(cfg, pop, 3, seed);
    const auto q0 = oracle::q0_enumerate(ts);
    if (!q0.feasible) continue;
    TrainOptions o;
    o.backhaul_tiebreak = 0.0;
    const auto q1 = train_cache_q1(ts, o);
    ASSERT_TRUE(q1.optimal()) << q1.message;
    EXPECT_GE(q0.average_power_w, q1.average_power_w * (1.0 - 1e-6));
  }
}

TEST(Q0, GuardRejectsLargeCountSpace) {
  auto cfg = tiny();
  cfg.num_files = 4;
  cfg.num_bs = 3;
  const auto ts = generate_training_set(cfg, zipf_popularity(4, cfg.zipf_exponent), 20, 1);
  EXPECT_THROW(oracle::q0_enumerate(ts, R1Options::fast(), 1000), InstanceTooLarge);
}
