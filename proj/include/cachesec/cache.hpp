#pragma once

// Offline cache placement: the relaxed joint training program over a set of
// historical scenarios, and the popularity / uniform baselines.

#include "cachesec/conic.hpp"
#include "cachesec/errors.hpp"
#include "cachesec/model.hpp"
#include "cachesec/sdp_core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace cachesec {

/// Historical scenarios plus the static data the training program needs.
struct TrainingSet {
  std::vector<Scenario> scenarios;
  std::vector<double> cache_capacity_bits;  // per BS
  std::vector<double> file_size_bits;       // per file
  std::vector<double> file_rate_bps;        // Q_f per file
  Thresholds thresholds;

  int num_files() const { return static_cast<int>(file_size_bits.size()); }
  int num_bs() const { return static_cast<int>(cache_capacity_bits.size()); }
  int size() const { return static_cast<int>(scenarios.size()); }

  /// Per-BS backhaul capacity averaged over the scenarios.
  std::vector<double> average_backhaul() const {
    std::vector<double> avg(num_bs(), 0.0);
    for (const auto& s : scenarios)
      for (int m = 0; m < num_bs(); ++m) avg[m] += s.backhaul_bps[m];
    for (double& a : avg) a /= std::max(1, size());
    return avg;
  }

  /// Static data from a config, with no scenarios yet.
  static TrainingSet from_config(const SystemConfig& cfg) {
    TrainingSet t;
    t.cache_capacity_bits.assign(cfg.num_bs, cfg.cache_capacity_bits);
    t.file_size_bits.assign(cfg.num_files, cfg.file_size_bits);
    for (int f = 0; f < cfg.num_files; ++f) t.file_rate_bps.push_back(backhaul_load_rate(cfg, f));
    t.thresholds = Thresholds::from_config(cfg);
    return t;
  }

  void validate() const {
    if (scenarios.empty()) throw InvalidProblem("training set is empty");
    if (num_bs() < 1 || num_files() < 1) throw InvalidProblem("training set: no BSs or files");
    if (file_rate_bps.size() != file_size_bits.size()) throw InvalidProblem("training set: rate table size");
    for (const auto& s : scenarios) {
      s.validate();
      if (s.num_bs != num_bs()) throw InvalidProblem("training set: scenarios disagree on the number of BSs");
      for (const auto& r : s.requests)
        if (r.file < 0 || r.file >= num_files()) throw InvalidProblem("training set: request for an unknown file");
    }
    for (double c : cache_capacity_bits)
      if (!(c >= 0.0)) throw InvalidProblem("training set: negative cache capacity");
    if (!std::isfinite(thresholds.max_tx_power_w))
      throw InvalidProblem("training set: cache training needs a finite per-BS power cap");
  }
};

struct CacheTrainingResult {
  CacheState cache;
  // Per scenario, over its requested files (rows) and BSs (columns).
  std::vector<Eigen::MatrixXd> q;
  std::vector<Eigen::MatrixXd> b;
  std::vector<std::vector<CMat>> W;  // physical units
  double average_power_w = kInf;
  SolveStatus status = SolveStatus::solver_failure;
  std::vector<int> infeasible_scenarios;  // scenarios infeasible on their own
  int iterations = 0;
  std::string message;

  bool optimal() const { return status == SolveStatus::optimal; }
};

struct TrainOptions {
  conic::Options solver = default_solver_options();
  // When set, c is held at this placement and only the delivery variables
  // are optimized.
  std::optional<CacheState> fixed_cache;
  // The program's optimum is usually flat in c: a continuous q only needs
  // tr(L_m W) / P, which is tiny next to 1. Among (nearly) optimal caches
  // this weight prefers the one that leaves the least backhaul traffic for
  // full cooperation on the training requests. 0 gives the plain program.
  double backhaul_tiebreak = 1e-4;

  static conic::Options default_solver_options() {
    conic::Options o;
    o.feasibility_tol = 1e-10;
    o.gap_tol = 1e-10;
    o.initial_primal_scale = 5.0;
    o.initial_dual_scale = 50.0;
    o.max_iterations = 150;
    return o;
  }
};

namespace detail {

// Interior-point values sit a barrier distance away from the bounds. A file
// stored at 0.999999 still needs backhaul, so near-bound values are rounded.
inline double snap_fraction(double c, double tol = 1e-4) {
  if (c < tol) return 0.0;
  if (c > 1.0 - tol) return 1.0;
  return c;
}

/// LP indices of the cache and backhaul variables; -1 where the value is fixed.
struct TrainingVars {
  std::vector<std::vector<int>> c;               // f x m
  Eigen::MatrixXd c_fixed;                       // value where c is not a variable
  std::vector<std::vector<std::vector<int>>> b;  // scenario x file row x m
};

}  // namespace detail

/// Solves the relaxed joint training program: average relaxed transmit
/// power over the scenarios, subject to the cache capacity, the average
/// backhaul budget, c + b >= q with continuous q in place of the binary
/// cooperation indicator, and every scenario's power, QoS and secrecy
/// constraints.
inline CacheTrainingResult train_cache_q1(const TrainingSet& ts, const TrainOptions& options = {}) {
  ts.validate();
  using S = cd;
  using Mat = conic::Matrix<S>;
  const int F = ts.num_files();
  const int M = ts.num_bs();
  const int W = ts.size();
  const auto avg_b = ts.average_backhaul();
  const double cap_w = ts.thresholds.max_tx_power_w;
  double total_size = 0.0;
  for (double v : ts.file_size_bits) total_size += v;

  if (options.fixed_cache) {
    const auto& fc = *options.fixed_cache;
    if (fc.num_files() != F || fc.num_bs() != M) throw InvalidProblem("train_cache_q1: fixed cache has the wrong shape");
  }

  // Training requests per file, for the tie-break weight.
  std::vector<double> demand(F, 0.0);
  double requests = 0.0, max_rate = 0.0;
  for (const auto& s : ts.scenarios) {
    for (int f : s.requested_files()) demand[f] += 1.0;
    requests += static_cast<double>(s.requests.size());
  }
  for (double q : ts.file_rate_bps) max_rate = std::max(max_rate, q);
  const double mean_requests = std::max(1.0, requests / W);

  conic::Program<S> prog;
  detail::TrainingVars vars;
  vars.c.assign(F, std::vector<int>(M, -1));
  vars.c_fixed = Eigen::MatrixXd::Zero(F, M);

  // Cache variables with c <= 1 and the capacity row.
  for (int m = 0; m < M; ++m) {
    const double cm = ts.cache_capacity_bits[m];
    if (options.fixed_cache) {
      for (int f = 0; f < F; ++f) vars.c_fixed(f, m) = std::clamp(options.fixed_cache->c(f, m), 0.0, 1.0);
      continue;
    }
    if (!(cm > 0.0)) continue;
    for (int f = 0; f < F; ++f) {
      if (!(ts.file_size_bits[f] > 0.0)) {
        vars.c_fixed(f, m) = 1.0;
        continue;
      }
      const double weight = max_rate > 0.0 ? ts.file_rate_bps[f] / max_rate : 0.0;
      vars.c[f][m] = prog.add_lp(-options.backhaul_tiebreak * demand[f] * weight / (M * mean_requests));
      const int row = prog.add_row(1.0);
      prog.add_lp_coef(row, vars.c[f][m], 1.0);
      prog.add_lp_coef(row, prog.add_lp(0.0), 1.0);
    }
    if (cm < total_size) {
      const int row = prog.add_row(1.0);
      for (int f = 0; f < F; ++f)
        if (vars.c[f][m] >= 0) prog.add_lp_coef(row, vars.c[f][m], ts.file_size_bits[f] / cm);
      prog.add_lp_coef(row, prog.add_lp(0.0), 1.0);
    }
  }

  auto servable = [&](int f, int m) {
    return vars.c[f][m] >= 0 || vars.c_fixed(f, m) > 0.0 || avg_b[m] > 0.0;
  };

  // Per-scenario delivery blocks.
  std::vector<BeamformingProblem> problems;
  std::vector<detail::R1Layout> layouts(W);
  double mean_unit = 0.0;
  for (int w = 0; w < W; ++w) {
    const auto& s = ts.scenarios[w];
    Cooperation q = Cooperation::full(s);
    for (int r = 0; r < q.num_files(); ++r)
      for (int m = 0; m < M; ++m) q.set(r, m, servable(q.files()[r], m));
    problems.push_back(build_r1(s, q, ts.thresholds));
    mean_unit += problems.back().power_unit / W;
  }
  for (int w = 0; w < W; ++w) detail::append_r1(prog, problems[w], layouts[w], problems[w].power_unit / mean_unit);

  // Backhaul loading variables and the average backhaul rows.
  vars.b.resize(W);
  std::vector<int> backhaul_row(M, -1);
  for (int m = 0; m < M; ++m) {
    if (!(avg_b[m] > 0.0)) continue;
    backhaul_row[m] = prog.add_row(1.0);
    prog.add_lp_coef(backhaul_row[m], prog.add_lp(0.0), 1.0);
  }
  for (int w = 0; w < W; ++w) {
    const auto& q = problems[w].cooperation;
    vars.b[w].assign(q.num_files(), std::vector<int>(M, -1));
    for (int r = 0; r < q.num_files(); ++r) {
      const int f = q.files()[r];
      for (int m = 0; m < M; ++m) {
        if (backhaul_row[m] < 0) continue;
        if (vars.c[f][m] < 0 && vars.c_fixed(f, m) >= 1.0) continue;
        vars.b[w][r][m] = prog.add_lp(0.0);
        prog.add_lp_coef(backhaul_row[m], vars.b[w][r][m], ts.file_rate_bps[f] / (W * avg_b[m]));
      }
    }
  }

  // c + b - tr(L_m W_rho) / P >= 0 for every request and serving BS.
  for (int w = 0; w < W; ++w) {
    const auto& p = problems[w];
    const auto& lay = layouts[w];
    for (int rho = 0; rho < p.num_requests(); ++rho) {
      const auto& blk = p.blocks[rho];
      const int row_f = blk.file_row;
      const int f = p.cooperation.files()[row_f];
      for (std::size_t pos = 0; pos < blk.active_bs.size(); ++pos) {
        const int m = blk.active_bs[pos];
        const double fixed = vars.c[f][m] < 0 ? vars.c_fixed(f, m) : 0.0;
        if (fixed >= 1.0) continue;
        const int row = prog.add_row(-fixed);
        if (vars.c[f][m] >= 0) prog.add_lp_coef(row, vars.c[f][m], 1.0);
        if (vars.b[w][row_f][m] >= 0) prog.add_lp_coef(row, vars.b[w][row_f][m], 1.0);
        prog.add_lp_coef(row, prog.add_lp(0.0), -1.0);
        std::vector<int> cols;
        for (int a = 0; a < p.tx_antennas; ++a) cols.push_back(static_cast<int>(pos) * p.tx_antennas + a);
        prog.add_block_term(row, lay.w_block[rho], cols,
                            Mat::Identity(p.tx_antennas, p.tx_antennas) * S(-p.power_unit / cap_w));
      }
    }
  }

  CacheTrainingResult out;
  const auto res = conic::solve(prog, options.solver);
  out.iterations = res.iterations;
  out.message = res.message;
  if (res.status != conic::Status::optimal) {
    out.status = res.status == conic::Status::primal_infeasible ? SolveStatus::infeasible : SolveStatus::solver_failure;
    if (out.status == SolveStatus::infeasible) {
      // Find the scenarios that cannot be served even on their own.
      const R1Options fast = R1Options::fast();
      for (int w = 0; w < W; ++w)
        if (solve_r1(problems[w], fast).status == SolveStatus::infeasible) out.infeasible_scenarios.push_back(w);
      std::ostringstream msg;
      msg << "joint training problem infeasible";
      if (!out.infeasible_scenarios.empty()) {
        msg << "; scenarios infeasible alone:";
        for (int w : out.infeasible_scenarios) msg << ' ' << w;
      } else {
        msg << " (every scenario is feasible alone; the cache and backhaul budgets bind jointly)";
      }
      out.message = msg.str();
    }
    return out;
  }

  out.status = SolveStatus::optimal;
  out.cache.c = vars.c_fixed;
  for (int f = 0; f < F; ++f)
    for (int m = 0; m < M; ++m)
      if (vars.c[f][m] >= 0) out.cache.c(f, m) = detail::snap_fraction(res.x.lp(vars.c[f][m]));
  // Snapping can overshoot the capacity at rounding level; take it back from
  // partially cached files first so whole files stay whole.
  for (int m = 0; m < M; ++m) {
    double used = 0.0;
    for (int f = 0; f < F; ++f) used += out.cache.c(f, m) * ts.file_size_bits[f];
    double excess = used - ts.cache_capacity_bits[m];
    for (int f = 0; f < F && excess > 0.0; ++f) {
      double& c = out.cache.c(f, m);
      if (c <= 0.0 || c >= 1.0 || vars.c[f][m] < 0) continue;
      const double cut = std::min(c, excess / ts.file_size_bits[f]);
      c -= cut;
      excess -= cut * ts.file_size_bits[f];
    }
    if (excess > 0.0) out.cache.c.col(m) *= ts.cache_capacity_bits[m] / (ts.cache_capacity_bits[m] + excess);
  }

  double total = 0.0;
  for (int w = 0; w < W; ++w) {
    const auto& p = problems[w];
    const auto& lay = layouts[w];
    const int n = p.antenna_dim();
    std::vector<CMat> Ws;
    Eigen::MatrixXd qm = Eigen::MatrixXd::Zero(p.cooperation.num_files(), M);
    Eigen::MatrixXd bm = Eigen::MatrixXd::Zero(p.cooperation.num_files(), M);
    for (int rho = 0; rho < p.num_requests(); ++rho) {
      const auto& blk = p.blocks[rho];
      CMat local = CMat::Zero(blk.coords.size(), blk.coords.size());
      if (lay.w_block[rho] >= 0) local = res.x.psd[lay.w_block[rho]] * p.power_unit;
      Ws.push_back(detail::embed(local, blk.coords, n));
      total += std::real(local.trace());
      for (int m = 0; m < M; ++m) {
        const double pm = std::real(Ws.back().block(m * p.tx_antennas, m * p.tx_antennas, p.tx_antennas, p.tx_antennas).trace());
        qm(blk.file_row, m) = std::max(qm(blk.file_row, m), std::clamp(pm / cap_w, 0.0, 1.0));
      }
    }
    for (int r = 0; r < p.cooperation.num_files(); ++r)
      for (int m = 0; m < M; ++m)
        if (vars.b[w][r][m] >= 0) bm(r, m) = std::clamp(res.x.lp(vars.b[w][r][m]), 0.0, 1.0);
    out.W.push_back(std::move(Ws));
    out.q.push_back(std::move(qm));
    out.b.push_back(std::move(bm));
  }
  out.average_power_w = total / W;
  return out;
}

/// Most popular files first at every BS, whole files until the capacity runs
/// out, then one fractional file. Ties in popularity keep file order.
inline CacheState preference_caching(const PopularityProfile& popularity, const SystemConfig& cfg) {
  const int F = cfg.num_files;
  if (static_cast<int>(popularity.theta.size()) != F) throw ConfigError("preference_caching: popularity size != F");
  std::vector<int> order(F);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return popularity.theta[a] * cfg.file_size_bits > popularity.theta[b] * cfg.file_size_bits;
  });
  CacheState out = CacheState::filled(F, cfg.num_bs, 0.0);
  for (int m = 0; m < cfg.num_bs; ++m) {
    double left = cfg.cache_capacity_bits;
    for (int f : order) {
      if (!(left > 0.0)) break;
      const double frac = cfg.file_size_bits > 0.0 ? std::min(1.0, left / cfg.file_size_bits) : 1.0;
      out.c(f, m) = frac;
      left -= frac * cfg.file_size_bits;
    }
  }
  return out;
}

/// The same amount of every file at every BS.
inline CacheState uniform_caching(const SystemConfig& cfg) {
  const double total = cfg.file_size_bits * cfg.num_files;
  const double per_file = std::min(cfg.cache_capacity_bits, total) / cfg.num_files;
  const double frac = cfg.file_size_bits > 0.0 ? std::min(1.0, per_file / cfg.file_size_bits) : 1.0;
  return CacheState::filled(cfg.num_files, cfg.num_bs, frac);
}

struct CacheFeasibility {
  bool feasible = true;
  std::vector<double> slack_bits;  // per BS: capacity minus stored bits
};

inline CacheFeasibility cache_feasibility(const CacheState& cache, const SystemConfig& cfg) {
  if (cache.num_files() != cfg.num_files || cache.num_bs() != cfg.num_bs)
    throw InvalidProblem("cache_feasibility: cache shape does not match the config");
  CacheFeasibility out;
  for (int m = 0; m < cfg.num_bs; ++m) {
    double used = 0.0;
    for (int f = 0; f < cfg.num_files; ++f) {
      const double c = cache.c(f, m);
      if (!(c >= 0.0 && c <= 1.0)) out.feasible = false;
      used += c * cfg.file_size_bits;
    }
    const double slack = cfg.cache_capacity_bits - used;
    out.slack_bits.push_back(slack);
    if (slack < -1e-9 * cfg.cache_capacity_bits) out.feasible = false;
  }
  return out;
}

// Cache files: a header line naming the config hash and the shape, then one
// row per file with one fraction per BS.

inline void write_cache(std::ostream& os, const CacheState& cache, std::uint64_t config_hash) {
  os << "# cachesec cache config_hash=" << std::hex << std::setw(16) << std::setfill('0') << config_hash << std::dec
     << std::setfill(' ') << " files=" << cache.num_files() << " bs=" << cache.num_bs() << '\n';
  os << std::setprecision(17);
  for (int f = 0; f < cache.num_files(); ++f) {
    for (int m = 0; m < cache.num_bs(); ++m) os << (m ? " " : "") << cache.c(f, m);
    os << '\n';
  }
}

struct LoadedCache {
  CacheState cache;
  std::uint64_t config_hash = 0;
};

inline LoadedCache read_cache(std::istream& is) {
  std::string header;
  if (!std::getline(is, header) || header.rfind("# cachesec cache", 0) != 0)
    throw ConfigError("cache file: missing '# cachesec cache' header");
  LoadedCache out;
  int files = -1, bs = -1;
  std::istringstream hs(header.substr(16));
  std::string tok;
  while (hs >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
    try {
      if (key == "config_hash") out.config_hash = std::stoull(val, nullptr, 16);
      else if (key == "files") files = std::stoi(val);
      else if (key == "bs") bs = std::stoi(val);
    } catch (const std::exception&) {
      throw ConfigError("cache file: malformed header field '" + tok + "'");
    }
  }
  if (files < 1 || bs < 1) throw ConfigError("cache file: header lacks files= or bs=");
  out.cache = CacheState::filled(files, bs, 0.0);
  for (int f = 0; f < files; ++f) {
    for (int m = 0; m < bs; ++m) {
      double v;
      if (!(is >> v)) throw ConfigError("cache file: expected " + std::to_string(files * bs) + " values");
      if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("cache file: fraction outside [0, 1]");
      out.cache.c(f, m) = v;
    }
  }
  return out;
}

inline void save_cache(const std::string& path, const CacheState& cache, std::uint64_t config_hash) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write cache file: " + path);
  write_cache(os, cache, config_hash);
  if (!os) throw ConfigError("failed writing cache file: " + path);
}

inline LoadedCache load_cache(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open cache file: " + path);
  return read_cache(is);
}

}  // namespace cachesec
