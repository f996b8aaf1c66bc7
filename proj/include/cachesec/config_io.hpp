#pragma once

// JSON configuration files. Keys carry their unit; anything missing keeps
// the value of the base profile ("desk" unless "profile" says otherwise).
//
//   {
//     "profile": "table1",
//     "system": { "num_bs": 7, "max_tx_power_dbm": 46, "cache_capacity_mb": 2000, ... },
//     "experiment": { "sweep": { "name": "cache_capacity_mb", "values": [1000, 2000] }, ... }
//   }

#include "cachesec/errors.hpp"
#include "cachesec/linalg.hpp"
#include "cachesec/model.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

namespace cachesec {

using Json = nlohmann::json;

inline SystemConfig profile_config(const std::string& name) {
  if (name == "desk") return SystemConfig::desk();
  if (name == "table1") return SystemConfig::table1();
  throw ConfigError("unknown profile '" + name + "' (expected desk or table1)");
}

inline Json config_to_json(const SystemConfig& c) {
  Json pmf = Json::array();
  for (const auto& lvl : c.backhaul_pmf) pmf.push_back({{"capacity_bps", lvl.capacity_bps}, {"probability", lvl.probability}});
  return Json{
      {"num_bs", c.num_bs},
      {"num_users", c.num_users},
      {"num_files", c.num_files},
      {"tx_antennas", c.tx_antennas},
      {"er_antennas", c.er_antennas},
      {"bandwidth_hz", c.bandwidth_hz},
      {"slot_duration_s", c.slot_duration_s},
      {"file_size_mb", c.file_size_bits / kBitsPerMegabyte},
      {"subfiles_per_file", c.subfiles_per_file},
      {"max_tx_power_dbm", watts_to_dbm(c.max_tx_power_w)},
      {"noise_density_dbm_per_hz", watts_to_dbm(c.noise_density_w_per_hz)},
      {"qos_rate_bps", c.qos_rate_bps},
      {"secrecy_tolerance_bps", c.secrecy_tolerance_bps},
      {"zipf_exponent", c.zipf_exponent},
      {"inter_bs_distance_m", c.inter_bs_distance_m},
      {"min_rx_distance_m", c.min_rx_distance_m},
      {"cache_capacity_mb", c.cache_capacity_bits / kBitsPerMegabyte},
      {"backhaul_pmf", pmf},
  };
}

namespace detail {

template <typename T>
T json_number(const Json& j, const std::string& key) {
  if (!j.is_number()) throw ConfigError("config key '" + key + "' must be a number");
  if constexpr (std::is_integral_v<T>) {
    if (!j.is_number_integer()) throw ConfigError("config key '" + key + "' must be an integer");
  }
  return j.get<T>();
}

}  // namespace detail

/// Overrides fields of `base` from a "system" object. Unknown keys are
/// rejected so that misspelled units do not pass silently.
inline SystemConfig config_from_json(const Json& j, SystemConfig base = SystemConfig::desk()) {
  if (!j.is_object()) throw ConfigError("system config must be a JSON object");
  for (const auto& [key, v] : j.items()) {
    using detail::json_number;
    if (key == "num_bs") base.num_bs = json_number<int>(v, key);
    else if (key == "num_users") base.num_users = json_number<int>(v, key);
    else if (key == "num_files") base.num_files = json_number<int>(v, key);
    else if (key == "tx_antennas") base.tx_antennas = json_number<int>(v, key);
    else if (key == "er_antennas") base.er_antennas = json_number<int>(v, key);
    else if (key == "bandwidth_hz") base.bandwidth_hz = json_number<double>(v, key);
    else if (key == "slot_duration_s") base.slot_duration_s = json_number<double>(v, key);
    else if (key == "file_size_mb") base.file_size_bits = json_number<double>(v, key) * kBitsPerMegabyte;
    else if (key == "file_size_bits") base.file_size_bits = json_number<double>(v, key);
    else if (key == "subfiles_per_file") base.subfiles_per_file = json_number<double>(v, key);
    else if (key == "max_tx_power_dbm") base.max_tx_power_w = dbm_to_watts(json_number<double>(v, key));
    else if (key == "max_tx_power_w") base.max_tx_power_w = json_number<double>(v, key);
    else if (key == "noise_density_dbm_per_hz") base.noise_density_w_per_hz = dbm_to_watts(json_number<double>(v, key));
    else if (key == "qos_rate_bps") base.qos_rate_bps = json_number<double>(v, key);
    else if (key == "secrecy_tolerance_bps") base.secrecy_tolerance_bps = json_number<double>(v, key);
    else if (key == "zipf_exponent") base.zipf_exponent = json_number<double>(v, key);
    else if (key == "inter_bs_distance_m") base.inter_bs_distance_m = json_number<double>(v, key);
    else if (key == "min_rx_distance_m") base.min_rx_distance_m = json_number<double>(v, key);
    else if (key == "cache_capacity_mb") base.cache_capacity_bits = json_number<double>(v, key) * kBitsPerMegabyte;
    else if (key == "cache_capacity_bits") base.cache_capacity_bits = json_number<double>(v, key);
    else if (key == "backhaul_pmf") {
      if (!v.is_array()) throw ConfigError("config key 'backhaul_pmf' must be an array");
      base.backhaul_pmf.clear();
      for (const auto& lvl : v) {
        if (!lvl.is_object() || !lvl.contains("capacity_bps") || !lvl.contains("probability"))
          throw ConfigError("backhaul_pmf entries need capacity_bps and probability");
        base.backhaul_pmf.push_back({detail::json_number<double>(lvl.at("capacity_bps"), "capacity_bps"),
                                     detail::json_number<double>(lvl.at("probability"), "probability")});
      }
    } else {
      throw ConfigError("unknown system config key '" + key + "'");
    }
  }
  base.validate();
  return base;
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : data) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Hash of the resolved configuration, stable across key order and formatting.
inline std::uint64_t config_hash(const SystemConfig& c) { return fnv1a(config_to_json(c).dump()); }

inline std::string hash_hex(std::uint64_t h) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

inline Json read_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file: " + path);
  try {
    return Json::parse(is);
  } catch (const Json::parse_error& e) {
    throw ConfigError("malformed JSON in " + path + ": " + e.what());
  }
}

/// Resolves the "profile" and "system" parts of a config document.
inline SystemConfig system_config_from_document(const Json& doc) {
  if (!doc.is_object()) throw ConfigError("config document must be a JSON object");
  static const std::set<std::string> known{"profile", "system", "experiment"};
  for (const auto& [key, v] : doc.items())
    if (!known.count(key)) throw ConfigError("unknown top-level config key '" + key + "'");
  SystemConfig base = SystemConfig::desk();
  if (doc.contains("profile")) {
    if (!doc["profile"].is_string()) throw ConfigError("'profile' must be a string");
    base = profile_config(doc["profile"].get<std::string>());
  }
  if (doc.contains("system")) return config_from_json(doc["system"], base);
  base.validate();
  return base;
}

inline SystemConfig load_config(const std::string& path) { return system_config_from_document(read_json_file(path)); }

}  // namespace cachesec
