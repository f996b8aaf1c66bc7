#pragma once

// Monte-Carlo experiments: sweep a parameter, train caches on historical
// scenarios, run every delivery scheme on fresh scenarios, aggregate.

#include "cachesec/cache.hpp"
#include "cachesec/config_io.hpp"
#include "cachesec/delivery.hpp"
#include "cachesec/errors.hpp"
#include "cachesec/model.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace cachesec {

enum class Scheme { proposed, preference, uniform, coordinated, full_coop, exhaustive };

inline const char* to_string(Scheme s) {
  switch (s) {
    case Scheme::proposed: return "proposed";
    case Scheme::preference: return "preference";
    case Scheme::uniform: return "uniform";
    case Scheme::coordinated: return "coordinated";
    case Scheme::full_coop: return "full-coop";
    case Scheme::exhaustive: return "exhaustive";
  }
  return "unknown";
}

inline Scheme parse_scheme(const std::string& name) {
  for (Scheme s : {Scheme::proposed, Scheme::preference, Scheme::uniform, Scheme::coordinated, Scheme::full_coop,
                   Scheme::exhaustive})
    if (name == to_string(s)) return s;
  throw ConfigError("unknown scheme '" + name +
                    "' (expected proposed, preference, uniform, coordinated, full-coop or exhaustive)");
}

/// Training seeds start this far above the evaluation seeds.
constexpr std::uint64_t kTrainingSeedOffset = 1'000'000;

struct ExperimentSpec {
  SystemConfig base = SystemConfig::desk();
  std::string sweep_name = "cache_capacity_mb";  // or tx_antennas, er_antennas, none
  std::vector<double> sweep_values{0.0, 500.0, 1000.0, 2000.0};
  std::vector<Scheme> schemes{Scheme::proposed,    Scheme::preference, Scheme::uniform,
                              Scheme::coordinated, Scheme::full_coop,  Scheme::exhaustive};
  int eval_scenarios = 200;
  int training_scenarios = 10;
  std::uint64_t seed = 1;
  bool extended_precision = false;

  R1Options r1_options() const { return extended_precision ? R1Options{} : R1Options::fast(); }
  bool has(Scheme s) const { return std::find(schemes.begin(), schemes.end(), s) != schemes.end(); }
  bool needs_training() const { return has(Scheme::proposed) || has(Scheme::coordinated) || has(Scheme::exhaustive); }
};

/// Config for one point of the sweep.
inline SystemConfig apply_sweep(SystemConfig cfg, const std::string& name, double value) {
  auto as_count = [&](double v) {
    if (v != std::floor(v) || v < 1.0) throw ConfigError("sweep value for " + name + " must be a positive integer");
    return static_cast<int>(v);
  };
  if (name == "cache_capacity_mb") cfg.cache_capacity_bits = value * kBitsPerMegabyte;
  else if (name == "tx_antennas") cfg.tx_antennas = as_count(value);
  else if (name == "er_antennas") cfg.er_antennas = as_count(value);
  else if (name != "none") throw ConfigError("unknown sweep axis '" + name + "'");
  cfg.validate();
  return cfg;
}

inline void validate(const ExperimentSpec& spec) {
  if (spec.schemes.empty()) throw ConfigError("experiment needs at least one scheme");
  if (spec.sweep_values.empty()) throw ConfigError("experiment needs at least one sweep value");
  if (spec.eval_scenarios < 1) throw ConfigError("eval_scenarios must be >= 1");
  if (spec.needs_training() && spec.training_scenarios < 1) throw ConfigError("training_scenarios must be >= 1");
  for (double v : spec.sweep_values) {
    const SystemConfig cfg = apply_sweep(spec.base, spec.sweep_name, v);
    const int pairs = std::min(cfg.num_users, cfg.num_files) * cfg.num_bs;
    if (spec.has(Scheme::exhaustive) && pairs > 16)
      throw ConfigError("exhaustive scheme needs F(S)*M <= 16 (2^(F(S)*M) plans); this config allows " +
                        std::to_string(pairs));
  }
}

inline ExperimentSpec experiment_from_json(const Json& doc) {
  ExperimentSpec spec;
  spec.base = system_config_from_document(doc);
  if (!doc.contains("experiment")) return spec;
  const Json& e = doc["experiment"];
  if (!e.is_object()) throw ConfigError("'experiment' must be an object");
  try {
    for (const auto& [key, v] : e.items()) {
      if (key == "sweep") {
        spec.sweep_name = v.at("name").get<std::string>();
        spec.sweep_values = v.at("values").get<std::vector<double>>();
      } else if (key == "schemes") {
        spec.schemes.clear();
        for (const auto& n : v) spec.schemes.push_back(parse_scheme(n.get<std::string>()));
      } else if (key == "eval_scenarios") {
        spec.eval_scenarios = v.get<int>();
      } else if (key == "training_scenarios") {
        spec.training_scenarios = v.get<int>();
      } else if (key == "seed") {
        spec.seed = v.get<std::uint64_t>();
      } else if (key == "extended_precision") {
        spec.extended_precision = v.get<bool>();
      } else {
        throw ConfigError("unknown experiment key '" + key + "'");
      }
    }
  } catch (const Json::exception& ex) {
    throw ConfigError(std::string("malformed experiment section: ") + ex.what());
  }
  return spec;
}

inline Json experiment_to_json(const ExperimentSpec& spec) {
  Json schemes = Json::array();
  for (Scheme s : spec.schemes) schemes.push_back(to_string(s));
  return Json{{"sweep", {{"name", spec.sweep_name}, {"values", spec.sweep_values}}},
              {"schemes", schemes},
              {"eval_scenarios", spec.eval_scenarios},
              {"training_scenarios", spec.training_scenarios},
              {"seed", spec.seed},
              {"extended_precision", spec.extended_precision}};
}

/// Draws training scenarios from seeds seed + 10^6 + i. Scenarios that
/// cannot be served even with full cooperation are skipped, since a single
/// one makes the joint training program infeasible for every cache.
inline TrainingSet generate_training_set(const SystemConfig& cfg, const PopularityProfile& pop, int count,
                                         std::uint64_t seed, const R1Options& r1 = R1Options::fast()) {
  TrainingSet ts = TrainingSet::from_config(cfg);
  const DeliveryContext ctx = DeliveryContext::from_config(cfg, r1);
  const int max_draws = 50 * count + 100;
  for (int i = 0; static_cast<int>(ts.scenarios.size()) < count; ++i) {
    if (i >= max_draws)
      throw ConfigError("could not draw " + std::to_string(count) +
                        " feasible training scenarios; the QoS and secrecy targets are too strict for this config");
    Scenario s = generate_scenario(cfg, pop, seed + kTrainingSeedOffset + static_cast<std::uint64_t>(i));
    if (!full_coop_baseline(s, ctx).outage) ts.scenarios.push_back(std::move(s));
  }
  return ts;
}

struct MetricsRecord {
  std::string scheme;
  std::string sweep_name;
  double sweep_value = 0.0;
  double mean_power_w = std::numeric_limits<double>::quiet_NaN();  // NaN when no scenario is feasible
  double mean_power_dbm = std::numeric_limits<double>::quiet_NaN();
  double power_stderr_w = std::numeric_limits<double>::quiet_NaN();
  double p_out = 0.0;
  double mean_coop_bs = std::numeric_limits<double>::quiet_NaN();
  int n_feasible = 0;
  int n_total = 0;
  double mean_solves = 0.0;
  std::uint64_t seed = 0;
  double wall_time_s = 0.0;
  std::vector<double> powers_w;  // per scenario, NaN on outage

  bool has_power() const { return n_feasible > 0; }
};

/// Per-scheme cache for one sweep point.
struct SchemeCaches {
  CacheState trained, preference, uniform;
};

inline SchemeCaches build_caches(const ExperimentSpec& spec, const SystemConfig& cfg, const PopularityProfile& pop,
                                 std::optional<CacheTrainingResult>* training_out = nullptr) {
  SchemeCaches caches;
  caches.preference = preference_caching(pop, cfg);
  caches.uniform = uniform_caching(cfg);
  caches.trained = CacheState::filled(cfg.num_files, cfg.num_bs, 0.0);
  if (spec.needs_training()) {
    const TrainingSet ts = generate_training_set(cfg, pop, spec.training_scenarios, spec.seed, spec.r1_options());
    auto res = train_cache_q1(ts);
    if (!res.optimal()) throw std::runtime_error("cache training failed: " + res.message);
    caches.trained = res.cache;
    if (training_out) *training_out = std::move(res);
  }
  return caches;
}

inline DeliveryOutcome run_scheme(Scheme scheme, const Scenario& s, const SchemeCaches& caches,
                                  const DeliveryContext& ctx) {
  switch (scheme) {
    case Scheme::proposed: return greedy_delivery(s, caches.trained, ctx);
    case Scheme::preference: return greedy_delivery(s, caches.preference, ctx);
    case Scheme::uniform: return greedy_delivery(s, caches.uniform, ctx);
    case Scheme::coordinated: return coordinated_baseline(s, caches.trained, ctx);
    case Scheme::full_coop: return full_coop_baseline(s, ctx);
    case Scheme::exhaustive: return exhaustive_delivery(s, caches.trained, ctx);
  }
  throw std::logic_error("run_scheme: unknown scheme");
}

using ProgressFn = std::function<void(const std::string&)>;

/// Runs the sweep. Records come out in (sweep value, scheme) order and are
/// a deterministic function of the spec.
inline std::vector<MetricsRecord> run_experiment(const ExperimentSpec& spec, const ProgressFn& progress = {}) {
  validate(spec);
  using clock = std::chrono::steady_clock;
  std::vector<MetricsRecord> out;
  for (double value : spec.sweep_values) {
    const SystemConfig cfg = apply_sweep(spec.base, spec.sweep_name, value);
    const PopularityProfile pop = zipf_popularity(cfg.num_files, cfg.zipf_exponent);
    const DeliveryContext ctx = DeliveryContext::from_config(cfg, spec.r1_options());
    const auto t0 = clock::now();
    const SchemeCaches caches = build_caches(spec, cfg, pop);
    const double train_time = std::chrono::duration<double>(clock::now() - t0).count();

    const std::size_t ns = spec.schemes.size();
    std::vector<MetricsRecord> recs(ns);
    std::vector<double> seconds(ns, 0.0), coop_sum(ns, 0.0), solve_sum(ns, 0.0);
    for (std::size_t k = 0; k < ns; ++k) {
      recs[k].scheme = to_string(spec.schemes[k]);
      recs[k].sweep_name = spec.sweep_name;
      recs[k].sweep_value = value;
      recs[k].seed = spec.seed;
      recs[k].n_total = spec.eval_scenarios;
    }
    for (int i = 0; i < spec.eval_scenarios; ++i) {
      const Scenario s = generate_scenario(cfg, pop, spec.seed + static_cast<std::uint64_t>(i));
      for (std::size_t k = 0; k < ns; ++k) {
        const auto t1 = clock::now();
        const DeliveryOutcome o = run_scheme(spec.schemes[k], s, caches, ctx);
        seconds[k] += std::chrono::duration<double>(clock::now() - t1).count();
        if (o.solver_failure)
          log_warning(std::string(to_string(spec.schemes[k])) + ": solver failure on scenario " + std::to_string(i) +
                      ", counted as outage");
        solve_sum[k] += o.solve_count;
        if (o.outage) {
          recs[k].powers_w.push_back(std::numeric_limits<double>::quiet_NaN());
        } else {
          recs[k].powers_w.push_back(o.total_power_w);
          coop_sum[k] += o.plan.cooperating_bs();
          ++recs[k].n_feasible;
        }
      }
    }
    for (std::size_t k = 0; k < ns; ++k) {
      auto& r = recs[k];
      r.p_out = 1.0 - static_cast<double>(r.n_feasible) / r.n_total;
      r.mean_solves = solve_sum[k] / r.n_total;
      r.wall_time_s = seconds[k] + (spec.schemes[k] == Scheme::full_coop ? 0.0 : train_time);
      if (r.n_feasible > 0) {
        double sum = 0.0;
        for (double p : r.powers_w)
          if (!std::isnan(p)) sum += p;
        r.mean_power_w = sum / r.n_feasible;
        r.mean_power_dbm = watts_to_dbm(r.mean_power_w);
        r.mean_coop_bs = coop_sum[k] / r.n_feasible;
        double ss = 0.0;
        for (double p : r.powers_w)
          if (!std::isnan(p)) ss += (p - r.mean_power_w) * (p - r.mean_power_w);
        r.power_stderr_w = r.n_feasible > 1 ? std::sqrt(ss / (r.n_feasible - 1) / r.n_feasible) : 0.0;
      }
      out.push_back(std::move(r));
    }
    if (progress) {
      std::ostringstream msg;
      msg << spec.sweep_name << " = " << value << " done";
      progress(msg.str());
    }
  }
  return out;
}

// CSV export

inline const char* kCsvHeader =
    "scheme,sweep_name,sweep_value,mean_power_dbm,p_out,mean_coop_bs,n_feasible,n_total,mean_solves,seed";

namespace detail {

inline std::string fmt9(double v) {
  if (std::isnan(v)) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace detail

inline void write_csv(std::ostream& os, const std::vector<MetricsRecord>& records) {
  os << kCsvHeader << '\n';
  for (const auto& r : records) {
    os << r.scheme << ',' << r.sweep_name << ',' << detail::fmt9(r.sweep_value) << ','
       << detail::fmt9(r.mean_power_dbm) << ',' << detail::fmt9(r.p_out) << ',' << detail::fmt9(r.mean_coop_bs) << ','
       << r.n_feasible << ',' << r.n_total << ',' << detail::fmt9(r.mean_solves) << ',' << r.seed << '\n';
  }
}

/// Writes `path` (CSV) and `path`.meta.json (resolved config, experiment and
/// wall times).
inline void export_results(const std::vector<MetricsRecord>& records, const std::string& path,
                           const ExperimentSpec& spec) {
  if (records.empty()) throw std::invalid_argument("export_results: no records");
  {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot write results file: " + path);
    write_csv(os, records);
    if (!os) throw ConfigError("failed writing results file: " + path);
  }
  Json wall = Json::array();
  for (const auto& r : records)
    wall.push_back({{"scheme", r.scheme}, {"sweep_value", r.sweep_value}, {"wall_time_s", r.wall_time_s}});
  const Json meta{{"config", config_to_json(spec.base)},
                  {"config_hash", hash_hex(config_hash(spec.base))},
                  {"experiment", experiment_to_json(spec)},
                  {"wall_time", wall}};
  std::ofstream ms(path + ".meta.json");
  if (!ms) throw ConfigError("cannot write metadata file: " + path + ".meta.json");
  ms << meta.dump(2) << '\n';
}

/// Parses a results CSV back into records (numeric fields only; per-scenario
/// samples and wall times are not stored there).
inline std::vector<MetricsRecord> parse_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kCsvHeader) throw ConfigError("results CSV: unexpected header");
  std::vector<MetricsRecord> out;
  auto num = [](const std::string& f) {
    return f.empty() ? std::numeric_limits<double>::quiet_NaN() : std::stod(f);
  };
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    if (f.size() != 10) throw ConfigError("results CSV: expected 10 columns in '" + line + "'");
    MetricsRecord r;
    try {
      r.scheme = f[0];
      r.sweep_name = f[1];
      r.sweep_value = num(f[2]);
      r.mean_power_dbm = num(f[3]);
      r.mean_power_w = std::isnan(r.mean_power_dbm) ? r.mean_power_dbm : dbm_to_watts(r.mean_power_dbm);
      r.p_out = num(f[4]);
      r.mean_coop_bs = num(f[5]);
      r.n_feasible = std::stoi(f[6]);
      r.n_total = std::stoi(f[7]);
      r.mean_solves = num(f[8]);
      r.seed = std::stoull(f[9]);
    } catch (const std::exception&) {
      throw ConfigError("results CSV: malformed number in '" + line + "'");
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace cachesec
