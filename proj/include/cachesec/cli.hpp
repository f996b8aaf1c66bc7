#pragma once

// Command-line front end: train, deliver, sweep, verify.
//
// Exit codes: 0 success, 1 configuration or usage error, 2 solver failure,
// 3 verification failure.

#include "cachesec/cache.hpp"
#include "cachesec/checks.hpp"
#include "cachesec/config_io.hpp"
#include "cachesec/delivery.hpp"
#include "cachesec/errors.hpp"
#include "cachesec/harness.hpp"
#include "cachesec/model.hpp"

#include <CLI11.hpp>

#include <iomanip>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace cachesec {

namespace cli_exit {
constexpr int ok = 0;
constexpr int config = 1;
constexpr int solver = 2;
constexpr int verification = 3;
}  // namespace cli_exit

namespace detail {

struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CliOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string scheme;
  std::string out;
  std::optional<int> scenarios;
  std::string cache;
};

inline ExperimentSpec resolve_spec(const CliOptions& o) {
  ExperimentSpec spec;
  if (!o.config.empty()) spec = experiment_from_json(read_json_file(o.config));
  if (o.seed) spec.seed = *o.seed;
  return spec;
}

inline void print_cache(std::ostream& out, const CacheState& c) {
  out << "cache (files x BSs):\n";
  for (int f = 0; f < c.num_files(); ++f) {
    out << "  f" << f << ":";
    for (int m = 0; m < c.num_bs(); ++m) out << ' ' << std::fixed << std::setprecision(4) << c.c(f, m);
    out << '\n';
  }
  out << std::defaultfloat << std::setprecision(6);
}

inline int cmd_train(const CliOptions& o, std::ostream& out, std::ostream& err) {
  ExperimentSpec spec = resolve_spec(o);
  if (o.scenarios) spec.training_scenarios = *o.scenarios;
  if (spec.training_scenarios < 1) throw ConfigError("--scenarios must be >= 1");
  const SystemConfig& cfg = spec.base;
  const auto pop = zipf_popularity(cfg.num_files, cfg.zipf_exponent);
  err << "training on " << spec.training_scenarios << " scenarios (seed " << spec.seed << ")\n";
  const TrainingSet ts = generate_training_set(cfg, pop, spec.training_scenarios, spec.seed, spec.r1_options());
  const auto res = train_cache_q1(ts);
  if (!res.optimal()) throw SolverError("cache training failed: " + res.message);
  if (o.out.empty()) {
    write_cache(out, res.cache, config_hash(cfg));
  } else {
    save_cache(o.out, res.cache, config_hash(cfg));
    out << "average relaxed power " << watts_to_dbm(res.average_power_w) << " dBm over " << ts.size()
        << " scenarios, " << res.iterations << " iterations\n";
    print_cache(out, res.cache);
    out << "wrote " << o.out << '\n';
  }
  return cli_exit::ok;
}

inline int cmd_deliver(const CliOptions& o, std::ostream& out, std::ostream& err) {
  ExperimentSpec spec = resolve_spec(o);
  const Scheme scheme = parse_scheme(o.scheme.empty() ? "proposed" : o.scheme);
  spec.schemes = {scheme};
  const SystemConfig& cfg = spec.base;
  const auto pop = zipf_popularity(cfg.num_files, cfg.zipf_exponent);
  const DeliveryContext ctx = DeliveryContext::from_config(cfg, spec.r1_options());
  const Scenario s = generate_scenario(cfg, pop, spec.seed);
  const int pairs = static_cast<int>(s.requested_files().size()) * s.num_bs;
  if (scheme == Scheme::exhaustive && pairs > ctx.exhaustive_guard)
    throw ConfigError("exhaustive search over 2^(F(S)*M) = 2^" + std::to_string(pairs) +
                      " plans exceeds the guard F(S)*M <= " + std::to_string(ctx.exhaustive_guard));

  SchemeCaches caches;
  if (!o.cache.empty()) {
    const auto loaded = load_cache(o.cache);
    if (loaded.config_hash != config_hash(cfg))
      throw ConfigError("cache file " + o.cache + " was trained for a different config");
    if (loaded.cache.num_files() != cfg.num_files || loaded.cache.num_bs() != cfg.num_bs)
      throw ConfigError("cache file " + o.cache + " has the wrong shape");
    caches.trained = caches.preference = caches.uniform = loaded.cache;
  } else {
    if (spec.needs_training()) err << "training cache on " << spec.training_scenarios << " scenarios\n";
    try {
      caches = build_caches(spec, cfg, pop);
    } catch (const std::runtime_error& e) {
      if (dynamic_cast<const ConfigError*>(&e)) throw;
      throw SolverError(e.what());
    }
  }
  const DeliveryOutcome res = run_scheme(scheme, s, caches, ctx);

  out << "scheme " << to_string(scheme) << ", seed " << spec.seed << '\n';
  out << "requests (user: file):";
  for (std::size_t k = 0; k < s.requests.size(); ++k) out << ' ' << k << ':' << s.requests[k].file;
  out << "\nbackhaul (Mbit/s):";
  for (double b : s.backhaul_bps) out << ' ' << b / 1e6;
  out << '\n';
  if (res.outage) {
    out << "status outage" << (res.solver_failure ? " (solver failure)" : "") << '\n';
  } else {
    out << "status feasible\n";
    out << "total power " << res.total_power_w << " W (" << res.total_power_dbm() << " dBm)\n";
    out << "cooperating BSs " << res.plan.cooperating_bs() << '\n';
  }
  out << "cooperation (file x BS):\n";
  for (int r = 0; r < res.plan.q.num_files(); ++r) {
    out << "  f" << res.plan.q.files()[r] << ":";
    for (int m = 0; m < res.plan.q.num_bs(); ++m) out << ' ' << (res.plan.q.get(r, m) ? 1 : 0);
    out << '\n';
  }
  if (res.plan.effective_rate.size() > 0) {
    const auto load = res.plan.backhaul_load();
    out << "backhaul load (Mbit/s):";
    for (double l : load) out << ' ' << l / 1e6;
    out << '\n';
  }
  out << "greedy steps " << res.iterations << ", conic solves " << res.solve_count << '\n';
  return res.solver_failure ? cli_exit::solver : cli_exit::ok;
}

inline int cmd_sweep(const CliOptions& o, std::ostream& out, std::ostream& err) {
  ExperimentSpec spec = resolve_spec(o);
  if (o.scenarios) spec.eval_scenarios = *o.scenarios;
  if (!o.scheme.empty()) spec.schemes = {parse_scheme(o.scheme)};
  const std::string path = o.out.empty() ? "results.csv" : o.out;
  validate(spec);
  std::vector<MetricsRecord> records;
  try {
    records = run_experiment(spec, [&](const std::string& msg) { err << msg << '\n'; });
  } catch (const InstanceTooLarge& e) {
    throw ConfigError(e.what());
  } catch (const std::runtime_error& e) {
    if (dynamic_cast<const ConfigError*>(&e)) throw;
    throw SolverError(e.what());
  }
  export_results(records, path, spec);
  for (const auto& r : records) {
    out << std::left << std::setw(12) << r.scheme << ' ' << r.sweep_name << '=' << r.sweep_value << "  power ";
    if (r.has_power()) out << std::fixed << std::setprecision(2) << r.mean_power_dbm << " dBm";
    else out << "n/a";
    out << "  p_out " << std::setprecision(3) << r.p_out << std::defaultfloat << std::setprecision(6) << '\n';
  }
  out << "wrote " << path << " and " << path << ".meta.json\n";
  return cli_exit::ok;
}

inline int cmd_verify(const CliOptions& o, std::ostream& out, std::ostream&) {
  const std::uint64_t seed = o.seed.value_or(1);
  const int n = o.scenarios.value_or(30);
  if (n < 1) throw ConfigError("--scenarios must be >= 1");
  std::vector<checks::CheckResult> results;
  auto rel = checks::rank1_and_kkt(n, seed);
  results.push_back(rel.rank1);
  results.push_back(rel.kkt);
  results.push_back(checks::oracle_equivalence(std::max(1, n / 3), std::max(1, n / 6), seed));
  results.push_back(checks::nested_monotonicity(3 * n, seed));
  results.push_back(checks::scheme_ordering(n, seed));
  results.push_back(checks::det_trace_numerics(30 * n, 3 * n, seed));
  bool ok = true;
  for (const auto& r : results) {
    out << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
    ok = ok && r.passed;
  }
  return ok ? cli_exit::ok : cli_exit::verification;
}

}  // namespace detail

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Secure cooperative delivery with edge caching: cache training, delivery and Monte-Carlo sweeps"};
  app.name("cachesec");
  app.require_subcommand(1, 1);
  detail::CliOptions o;
  std::uint64_t seed = 0;
  int scenarios = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON config file (default: built-in desk profile)");
    sub->add_option("--seed", seed, "base seed");
  };
  auto* train = app.add_subcommand("train", "train a cache placement and write it out");
  add_common(train);
  train->add_option("--scenarios", scenarios, "number of training scenarios");
  train->add_option("--out", o.out, "cache file to write (default: stdout)");

  auto* deliver = app.add_subcommand("deliver", "deliver one scenario with one scheme");
  add_common(deliver);
  deliver->add_option("--scheme", o.scheme, "proposed, preference, uniform, coordinated, full-coop or exhaustive");
  deliver->add_option("--cache", o.cache, "cache file from `train` (otherwise the scheme's own cache)");

  auto* sweep = app.add_subcommand("sweep", "run the configured experiment and export CSV");
  add_common(sweep);
  sweep->add_option("--scheme", o.scheme, "run only this scheme");
  sweep->add_option("--scenarios", scenarios, "evaluation scenarios per sweep value");
  sweep->add_option("--out", o.out, "results CSV (default: results.csv)");

  auto* verify = app.add_subcommand("verify", "run the invariant suite at smoke scale");
  verify->add_option("--seed", seed, "base seed");
  verify->add_option("--scenarios", scenarios, "sample size per check (default 30)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return cli_exit::ok;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return cli_exit::ok;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return cli_exit::config;
  }
  for (auto* sub : app.get_subcommands()) {
    if (sub->count("--seed")) o.seed = seed;
    if (sub->get_option_no_throw("--scenarios") && sub->count("--scenarios")) o.scenarios = scenarios;
  }

  try {
    if (train->parsed()) return detail::cmd_train(o, out, err);
    if (deliver->parsed()) return detail::cmd_deliver(o, out, err);
    if (sweep->parsed()) return detail::cmd_sweep(o, out, err);
    return detail::cmd_verify(o, out, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return cli_exit::config;
  } catch (const InstanceTooLarge& e) {
    err << "config error: " << e.what() << '\n';
    return cli_exit::config;
  } catch (const detail::SolverError& e) {
    err << "solver failure: " << e.what() << '\n';
    return cli_exit::solver;
  } catch (const InvalidProblem& e) {
    err << "invalid problem: " << e.what() << '\n';
    return cli_exit::config;
  }
}

}  // namespace cachesec
