#include "cachesec/harness.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace cachesec;

namespace {

ExperimentSpec small_spec() {
  ExperimentSpec spec;
  spec.sweep_values = {0.0, 2000.0};
  spec.schemes = {Scheme::proposed, Scheme::preference, Scheme::full_coop};
  spec.eval_scenarios = 6;
  spec.training_scenarios = 3;
  spec.seed = 5;
  return spec;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Sweep, ApplyAxes) {
  const auto base = SystemConfig::desk();
  EXPECT_DOUBLE_EQ(apply_sweep(base, "cache_capacity_mb", 250).cache_capacity_bits, 2e9);
  EXPECT_EQ(apply_sweep(base, "tx_antennas", 4).tx_antennas, 4);
  EXPECT_EQ(apply_sweep(base, "er_antennas", 3).er_antennas, 3);
  EXPECT_EQ(config_to_json(apply_sweep(base, "none", 17)), config_to_json(base));
  EXPECT_THROW(apply_sweep(base, "tx_antennas", 2.5), ConfigError);
  EXPECT_THROW(apply_sweep(base, "bandwidth", 1), ConfigError);
}

TEST(Sweep, ValidateGuardsExhaustive) {
  ExperimentSpec spec;
  spec.base = SystemConfig::table1();
  spec.sweep_values = {1000};
  EXPECT_THROW(validate(spec), ConfigError);
  spec.schemes = {Scheme::proposed};
  EXPECT_NO_THROW(validate(spec));
  spec.eval_scenarios = 0;
  EXPECT_THROW(validate(spec), ConfigError);
}

TEST(Schemes, NamesRoundTrip) {
  for (Scheme s : {Scheme::proposed, Scheme::preference, Scheme::uniform, Scheme::coordinated, Scheme::full_coop,
                   Scheme::exhaustive})
    EXPECT_EQ(parse_scheme(to_string(s)), s);
  EXPECT_THROW(parse_scheme("greedy"), ConfigError);
}

TEST(TrainingSet, SeedsAreOffsetAndFeasible) {
  const auto cfg = SystemConfig::desk();
  const auto pop = zipf_popularity(cfg.num_files, cfg.zipf_exponent);
  const auto ts = generate_training_set(cfg, pop, 4, 2);
  ASSERT_EQ(ts.size(), 4);
  const auto first = generate_scenario(cfg, pop, 2 + kTrainingSeedOffset);
  const auto ctx = DeliveryContext::from_config(cfg);
  if (!full_coop_baseline(first, ctx).outage) {
    EXPECT_TRUE(ts.scenarios[0].channels == first.channels);
  }
  for (const auto& s : ts.scenarios) EXPECT_FALSE(full_coop_baseline(s, ctx).outage);
}

TEST(Experiment, RecordsAndDeterminism) {
  const auto spec = small_spec();
  const auto a = run_experiment(spec);
  ASSERT_EQ(a.size(), 6u);
  for (const auto& r : a) {
    EXPECT_EQ(r.n_total, 6);
    EXPECT_EQ(r.powers_w.size(), 6u);
    EXPECT_NEAR(r.p_out, 1.0 - r.n_feasible / 6.0, 1e-12);
    if (r.has_power()) {
      EXPECT_NEAR(r.mean_power_dbm, watts_to_dbm(r.mean_power_w), 1e-12);
    }
  }
  EXPECT_EQ(a[0].sweep_value, 0.0);
  EXPECT_EQ(a[3].sweep_value, 2000.0);
  EXPECT_EQ(a[1].scheme, "preference");

  const auto b = run_experiment(spec);
  std::ostringstream sa, sb;
  write_csv(sa, a);
  write_csv(sb, b);
  EXPECT_EQ(sa.str(), sb.str());
}

TEST(Experiment, FullCooperationIgnoresCache) {
  auto spec = small_spec();
  spec.schemes = {Scheme::full_coop};
  const auto r = run_experiment(spec);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0].n_feasible, r[1].n_feasible);
  if (r[0].has_power()) {
    EXPECT_DOUBLE_EQ(r[0].mean_power_w, r[1].mean_power_w);
  }
}

TEST(Csv, RoundTrip) {
  const auto recs = run_experiment(small_spec());
  std::stringstream ss;
  write_csv(ss, recs);
  const std::string text = ss.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 7);
  const auto back = parse_csv(ss);
  ASSERT_EQ(back.size(), recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    EXPECT_EQ(back[i].scheme, recs[i].scheme);
    EXPECT_EQ(back[i].sweep_value, recs[i].sweep_value);
    EXPECT_EQ(back[i].n_feasible, recs[i].n_feasible);
    EXPECT_EQ(back[i].seed, recs[i].seed);
    if (recs[i].has_power()) {
      EXPECT_NEAR(back[i].mean_power_dbm, recs[i].mean_power_dbm, 1e-6);
    } else {
      EXPECT_TRUE(std::isnan(back[i].mean_power_dbm));
    }
  }
}

TEST(Csv, RejectsMalformed) {
  std::stringstream bad_header("scheme,power\n");
  EXPECT_THROW(parse_csv(bad_header), ConfigError);
  std::stringstream short_row(std::string(kCsvHeader) + "\nproposed,none,1\n");
  EXPECT_THROW(parse_csv(short_row), ConfigError);
  std::stringstream bad_number(std::string(kCsvHeader) + "\nproposed,none,x,1,0,1,1,1,1,1\n");
  EXPECT_THROW(parse_csv(bad_number), ConfigError);
}

TEST(Export, WritesCsvAndMetadata) {
  auto spec = small_spec();
  spec.schemes = {Scheme::full_coop};
  const auto recs = run_experiment(spec);
  const auto path = std::filesystem::temp_directory_path() / "cachesec_export.csv";
  export_results(recs, path.string(), spec);
  const std::string csv = slurp(path);
  EXPECT_EQ(csv.rfind(kCsvHeader, 0), 0u);
  const auto meta = Json::parse(slurp(path.string() + ".meta.json"));
  EXPECT_EQ(meta.at("config_hash").get<std::string>(), hash_hex(config_hash(spec.base)));
  EXPECT_EQ(meta.at("experiment").at("seed").get<std::uint64_t>(), 5u);
  EXPECT_EQ(meta.at("wall_time").size(), 2u);
  std::filesystem::remove(path);
  std::filesystem::remove(path.string() + ".meta.json");
  EXPECT_THROW(export_results({}, path.string(), spec), std::invalid_argument);
}
