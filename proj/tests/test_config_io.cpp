#include "cachesec/config_io.hpp"
#include "cachesec/harness.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

using namespace cachesec;

TEST(ConfigJson, RoundTrip) {
  for (const auto& cfg : {SystemConfig::desk(), SystemConfig::table1()}) {
    const auto back = config_from_json(config_to_json(cfg));
    EXPECT_EQ(config_to_json(back), config_to_json(cfg));
    EXPECT_EQ(config_hash(back), config_hash(cfg));
  }
}

TEST(ConfigJson, OverridesOnTopOfProfile) {
  const auto doc = Json::parse(R"({"profile": "table1", "system": {"cache_capacity_mb": 1000, "tx_antennas": 2}})");
  const auto cfg = system_config_from_document(doc);
  EXPECT_EQ(cfg.num_bs, 7);
  EXPECT_EQ(cfg.tx_antennas, 2);
  EXPECT_DOUBLE_EQ(cfg.cache_capacity_bits, 8e9);
  EXPECT_NE(config_hash(cfg), config_hash(SystemConfig::table1()));
}

TEST(ConfigJson, RejectsUnknownAndMistypedKeys) {
  EXPECT_THROW(config_from_json(Json::parse(R"({"cache_capacity": 5})")), ConfigError);
  EXPECT_THROW(config_from_json(Json::parse(R"({"num_bs": 2.5})")), ConfigError);
  EXPECT_THROW(config_from_json(Json::parse(R"({"num_bs": "3"})")), ConfigError);
  EXPECT_THROW(system_config_from_document(Json::parse(R"({"sytem": {}})")), ConfigError);
  EXPECT_THROW(system_config_from_document(Json::parse(R"({"profile": "huge"})")), ConfigError);
  EXPECT_THROW(config_from_json(Json::parse(R"({"backhaul_pmf": [{"capacity_bps": 1}]})")), ConfigError);
  EXPECT_THROW(config_from_json(Json::parse(R"({"backhaul_pmf": [{"capacity_bps": 1, "probability": 0.5}]})")),
               ConfigError);
}

TEST(ConfigFile, MissingFileNamesThePath) {
  try {
    load_config("/nonexistent/dir/cfg.json");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/dir/cfg.json"), std::string::npos);
  }
}

TEST(ConfigFile, MalformedJson) {
  const auto path = std::filesystem::temp_directory_path() / "cachesec_bad.json";
  std::ofstream(path) << "{ \"system\": ";
  EXPECT_THROW(load_config(path.string()), ConfigError);
  std::filesystem::remove(path);
}

TEST(ConfigFile, ShippedConfigsLoad) {
  for (const char* name : {"desk.json", "table1.json", "antennas.json", "smoke.json"}) {
    const std::string path = std::string(CACHESEC_SOURCE_DIR) + "/configs/" + name;
    EXPECT_NO_THROW(experiment_from_json(read_json_file(path))) << path;
  }
}

TEST(Experiment, ParsesAndRoundTrips) {
  const auto doc = Json::parse(R"({
    "experiment": {"sweep": {"name": "tx_antennas", "values": [2, 3]},
                   "schemes": ["proposed", "full-coop"], "eval_scenarios": 7, "seed": 9}})");
  const auto spec = experiment_from_json(doc);
  EXPECT_EQ(spec.sweep_name, "tx_antennas");
  EXPECT_EQ(spec.schemes.size(), 2u);
  EXPECT_EQ(spec.eval_scenarios, 7);
  EXPECT_EQ(spec.seed, 9u);
  EXPECT_EQ(experiment_to_json(experiment_from_json(Json{{"experiment", experiment_to_json(spec)}})),
            experiment_to_json(spec));
  EXPECT_THROW(experiment_from_json(Json::parse(R"({"experiment": {"schemes": ["best"]}})")), ConfigError);
  EXPECT_THROW(experiment_from_json(Json::parse(R"({"experiment": {"seeds": 1}})")), ConfigError);
}
