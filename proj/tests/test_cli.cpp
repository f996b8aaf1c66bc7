#include "cachesec/cli.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace cachesec;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "cachesec");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string config_path(const char* name) { return std::string(CACHESEC_SOURCE_DIR) + "/configs/" + name; }

std::filesystem::path temp(const char* name) { return std::filesystem::temp_directory_path() / name; }

}  // namespace

TEST(Cli, VerifyPasses) {
  const auto r = cli({"verify", "--seed", "7", "--scenarios", "12"});
  EXPECT_EQ(r.code, cli_exit::ok) << r.out;
  EXPECT_EQ(r.out.find("FAIL"), std::string::npos) << r.out;
}

TEST(Cli, MissingConfigNamesThePath) {
  const auto r = cli({"sweep", "--config", "/no/such/config.json"});
  EXPECT_EQ(r.code, cli_exit::config);
  EXPECT_NE(r.err.find("/no/such/config.json"), std::string::npos) << r.err;
}

TEST(Cli, ExhaustiveOnLargeConfigHitsGuard) {
  auto r = cli({"deliver", "--config", config_path("table1.json"), "--scheme", "exhaustive"});
  EXPECT_EQ(r.code, cli_exit::config);
  EXPECT_NE(r.err.find("2^(F(S)*M)"), std::string::npos) << r.err;
  r = cli({"sweep", "--config", config_path("table1.json"), "--scheme", "exhaustive", "--out",
           temp("cachesec_never.csv").string()});
  EXPECT_EQ(r.code, cli_exit::config);
  EXPECT_FALSE(std::filesystem::exists(temp("cachesec_never.csv")));
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(cli({"bogus"}).code, cli_exit::config);
  EXPECT_EQ(cli({}).code, cli_exit::config);
  EXPECT_EQ(cli({"sweep", "--frobnicate"}).code, cli_exit::config);
  EXPECT_EQ(cli({"deliver", "--scheme", "best"}).code, cli_exit::config);
  EXPECT_EQ(cli({"sweep", "--seed", "abc"}).code, cli_exit::config);
  const auto help = cli({"--help"});
  EXPECT_EQ(help.code, cli_exit::ok);
  EXPECT_NE(help.out.find("sweep"), std::string::npos);
}

TEST(Cli, TrainThenDeliver) {
  const auto cache = temp("cachesec_cli_cache.txt");
  auto r = cli({"train", "--seed", "3", "--scenarios", "4", "--out", cache.string()});
  ASSERT_EQ(r.code, cli_exit::ok) << r.err;
  const auto loaded = load_cache(cache.string());
  EXPECT_EQ(loaded.config_hash, config_hash(SystemConfig::desk()));

  r = cli({"deliver", "--seed", "3", "--cache", cache.string()});
  EXPECT_EQ(r.code, cli_exit::ok) << r.err;
  EXPECT_NE(r.out.find("status"), std::string::npos);

  // A cache trained for another config is refused.
  r = cli({"deliver", "--config", config_path("antennas.json"), "--cache", cache.string()});
  EXPECT_EQ(r.code, cli_exit::config);
  std::filesystem::remove(cache);
}

TEST(Cli, TrainToStdout) {
  const auto r = cli({"train", "--seed", "2", "--scenarios", "3"});
  ASSERT_EQ(r.code, cli_exit::ok) << r.err;
  std::istringstream is(r.out);
  EXPECT_EQ(read_cache(is).cache.num_files(), SystemConfig::desk().num_files);
}

TEST(Cli, DeliverEveryScheme) {
  for (const char* s : {"proposed", "preference", "uniform", "coordinated", "full-coop", "exhaustive"}) {
    const auto r = cli({"deliver", "--seed", "4", "--scheme", s});
    EXPECT_EQ(r.code, cli_exit::ok) << s << ": " << r.err;
    EXPECT_NE(r.out.find(std::string("scheme ") + s), std::string::npos);
  }
}

TEST(Cli, SweepWritesCsv) {
  const auto out = temp("cachesec_cli_sweep.csv");
  const auto r = cli({"sweep", "--config", config_path("smoke.json"), "--scheme", "proposed", "--scenarios", "4",
                      "--out", out.string()});
  ASSERT_EQ(r.code, cli_exit::ok) << r.err;
  std::ifstream is(out);
  const auto recs = parse_csv(is);
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[0].scheme, "proposed");
  EXPECT_EQ(recs[0].n_total, 4);
  EXPECT_TRUE(std::filesystem::exists(out.string() + ".meta.json"));
  std::filesystem::remove(out);
  std::filesystem::remove(out.string() + ".meta.json");
}
