#include "cachesec/cache.hpp"
#include "cachesec/delivery.hpp"
#include "cachesec/harness.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace cachesec;

namespace {

SystemConfig with_capacity(double files_worth) {
  SystemConfig c = SystemConfig::desk();
  c.cache_capacity_bits = files_worth * c.file_size_bits;
  return c;
}

TrainingSet training(const SystemConfig& cfg, int count, std::uint64_t seed) {
  return generate_training_set(cfg, zipf_popularity(cfg.num_files, cfg.zipf_exponent), count, seed);
}

}  // namespace

TEST(Preference, FillsMostPopularFirst) {
  const auto cfg = with_capacity(2.5);
  const auto c = preference_caching(zipf_popularity(cfg.num_files, cfg.zipf_exponent), cfg);
  for (int m = 0; m < cfg.num_bs; ++m) {
    EXPECT_DOUBLE_EQ(c.c(0, m), 1.0);
    EXPECT_DOUBLE_EQ(c.c(1, m), 1.0);
    EXPECT_DOUBLE_EQ(c.c(2, m), 0.5);
    EXPECT_DOUBLE_EQ(c.c(3, m), 0.0);
  }
}

TEST(Preference, EmptyAndAmpleCapacity) {
  auto cfg = with_capacity(0.0);
  const auto pop = zipf_popularity(cfg.num_files, cfg.zipf_exponent);
  EXPECT_EQ(preference_caching(pop, cfg).c.maxCoeff(), 0.0);
  cfg = with_capacity(10.0);
  EXPECT_EQ(preference_caching(pop, cfg).c.minCoeff(), 1.0);
}

TEST(Uniform, SplitsCapacityEvenly) {
  EXPECT_DOUBLE_EQ(uniform_caching(with_capacity(2.0)).c(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(uniform_caching(with_capacity(6.0)).c(3, 2), 1.0);
  EXPECT_DOUBLE_EQ(uniform_caching(with_capacity(1.6)).c(1, 1), 0.4);
}

TEST(CacheFeasibility, ChecksRangeAndCapacity) {
  const auto cfg = with_capacity(2.0);
  EXPECT_TRUE(cache_feasibility(uniform_caching(cfg), cfg).feasible);
  EXPECT_NEAR(cache_feasibility(uniform_caching(cfg), cfg).slack_bits[0], 0.0, 1e-3);
  EXPECT_FALSE(cache_feasibility(CacheState::filled(4, 3, 0.6), cfg).feasible);
  auto bad = CacheState::filled(4, 3, 0.0);
  bad.c(0, 0) = -0.1;
  EXPECT_FALSE(cache_feasibility(bad, cfg).feasible);
  EXPECT_THROW(cache_feasibility(CacheState::filled(2, 3, 0.0), cfg), InvalidProblem);
}

TEST(CacheFile, RoundTrip) {
  CacheState c = CacheState::filled(3, 2, 0.0);
  c.c << 1.0, 0.25, 1.0 / 3.0, 0.0, 0.5, 0.123456789012345;
  std::stringstream ss;
  write_cache(ss, c, 0xdeadbeef12345678ull);
  const auto back = read_cache(ss);
  EXPECT_EQ(back.config_hash, 0xdeadbeef12345678ull);
  EXPECT_TRUE(back.cache.c == c.c);
}

TEST(CacheFile, RejectsMalformedInput) {
  std::stringstream no_header("1 0\n");
  EXPECT_THROW(read_cache(no_header), ConfigError);
  std::stringstream short_body("# cachesec cache config_hash=00 files=2 bs=2\n1 0 1\n");
  EXPECT_THROW(read_cache(short_body), ConfigError);
  std::stringstream out_of_range("# cachesec cache config_hash=00 files=1 bs=1\n1.5\n");
  EXPECT_THROW(read_cache(out_of_range), ConfigError);
  EXPECT_THROW(load_cache("/nonexistent/cache.txt"), ConfigError);
}

TEST(Training, SingleFileFillsToCapacity) {
  auto cfg = with_capacity(0.6);
  cfg.num_files = 1;
  cfg.num_users = 1;
  const auto res = train_cache_q1(training(cfg, 4, 3));
  ASSERT_TRUE(res.optimal()) << res.message;
  for (int m = 0; m < cfg.num_bs; ++m) EXPECT_NEAR(res.cache.c(0, m), 0.6, 1e-6);
}

TEST(Training, RespectsCapacityAndRange) {
  const auto cfg = with_capacity(1.5);
  const auto res = train_cache_q1(training(cfg, 6, 5));
  ASSERT_TRUE(res.optimal()) << res.message;
  EXPECT_TRUE(cache_feasibility(res.cache, cfg).feasible);
  for (double c : res.cache.c.reshaped()) EXPECT_TRUE(c == 0.0 || c == 1.0 || (c >= 1e-4 && c <= 1.0 - 1e-4)) << c;
  EXPECT_EQ(res.q.size(), 6u);
  EXPECT_EQ(res.W.size(), 6u);
}

TEST(Training, AmpleCacheMatchesFullCooperation) {
  // With every file cached the backhaul never binds, and each scenario's
  // relaxed optimum is full cooperation.
  const auto cfg = with_capacity(4.0);
  const auto ts = training(cfg, 5, 7);
  const auto res = train_cache_q1(ts);
  ASSERT_TRUE(res.optimal()) << res.message;
  // Whole files are stored exactly, so no BS needs backhaul for them.
  EXPECT_EQ(res.cache.c.minCoeff(), 1.0);
  const auto ctx = DeliveryContext::from_config(cfg, R1Options{});
  double mean = 0.0;
  for (const auto& s : ts.scenarios) {
    const auto f = full_coop_baseline(s, ctx);
    ASSERT_FALSE(f.outage);
    mean += f.total_power_w / ts.size();
  }
  EXPECT_NEAR(res.average_power_w / mean, 1.0, 1e-4);
}

TEST(Training, FixedCacheIsDominated) {
  const auto cfg = with_capacity(1.0);
  const auto ts = training(cfg, 5, 9);
  TrainOptions plain;
  plain.backhaul_tiebreak = 0.0;
  const auto free = train_cache_q1(ts, plain);
  ASSERT_TRUE(free.optimal()) << free.message;
  for (const auto& fixed : {CacheState::filled(4, 3, 0.0), uniform_caching(cfg)}) {
    TrainOptions o = plain;
    o.fixed_cache = fixed;
    const auto r = train_cache_q1(ts, o);
    if (!r.optimal()) continue;
    EXPECT_TRUE(r.cache.c == fixed.c);
    EXPECT_LE(free.average_power_w, r.average_power_w * (1.0 + 1e-6));
  }
  TrainOptions wrong = plain;
  wrong.fixed_cache = CacheState::filled(2, 3, 0.0);
  EXPECT_THROW(train_cache_q1(ts, wrong), InvalidProblem);
}

TEST(Training, FullCacheDecouplesScenarios) {
  // c = 1 everywhere removes the backhaul rows; the joint optimum is then the
  // mean of the per-scenario relaxations with q = 1.
  const auto cfg = with_capacity(4.0);
  const auto ts = training(cfg, 4, 11);
  TrainOptions o;
  o.fixed_cache = CacheState::filled(4, 3, 1.0);
  o.backhaul_tiebreak = 0.0;
  const auto res = train_cache_q1(ts, o);
  ASSERT_TRUE(res.optimal()) << res.message;
  double mean = 0.0;
  for (const auto& s : ts.scenarios) {
    const auto sol = solve_r1(build_r1(s, Cooperation::full(s), ts.thresholds));
    ASSERT_TRUE(sol.optimal());
    mean += sol.objective_w / ts.size();
  }
  EXPECT_NEAR(res.average_power_w / mean, 1.0, 1e-6);
}

TEST(Training, TopFilesStoredWhole) {
  // Room for two of four files: the placement is integral per BS.
  const auto cfg = with_capacity(2.0);
  const auto res = train_cache_q1(training(cfg, 8, 13));
  ASSERT_TRUE(res.optimal()) << res.message;
  for (int m = 0; m < cfg.num_bs; ++m) EXPECT_NEAR(res.cache.c.col(m).sum(), 2.0, 1e-6);
  EXPECT_EQ(detail::snap_fraction(0.99999), 1.0);
  EXPECT_EQ(detail::snap_fraction(2e-5), 0.0);
  EXPECT_EQ(detail::snap_fraction(0.6), 0.6);
}

TEST(Training, RejectsEmptySet) {
  TrainingSet ts = TrainingSet::from_config(SystemConfig::desk());
  EXPECT_THROW(train_cache_q1(ts), InvalidProblem);
}
