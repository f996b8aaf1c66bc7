#pragma once

// Online delivery: cooperation formation under backhaul limits, the
// exhaustive oracle, and the fixed-cooperation baselines.

#include "cachesec/errors.hpp"
#include "cachesec/model.hpp"
#include "cachesec/sdp_core.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

namespace cachesec {

/// Everything delivery needs besides the scenario and cache.
struct DeliveryContext {
  Thresholds thresholds;
  std::vector<double> file_rate_bps;  // Q_f per file id
  R1Options r1;
  int exhaustive_guard = 16;  // max F(S) * M for exhaustive search

  static DeliveryContext from_config(const SystemConfig& cfg, R1Options r1 = {}) {
    DeliveryContext ctx;
    ctx.thresholds = Thresholds::from_config(cfg);
    for (int f = 0; f < cfg.num_files; ++f) ctx.file_rate_bps.push_back(backhaul_load_rate(cfg, f));
    ctx.r1 = std::move(r1);
    return ctx;
  }
};

/// Binary cooperation q over requested files and BSs, with the backhaul
/// loading it implies under a cache placement.
struct CooperationPlan {
  Cooperation q;
  Eigen::MatrixXd effective_rate;  // rows of q x M: Q_f (1 - c(f, m)), bit/s
  std::vector<double> capacity_bps;

  /// Fraction fetched over the backhaul, b = (1 - c) q.
  double loading(int row, int m, const CacheState& cache) const {
    return q.get(row, m) ? 1.0 - cache.c(q.files()[row], m) : 0.0;
  }

  std::vector<double> backhaul_load() const {
    std::vector<double> load(q.num_bs(), 0.0);
    for (int r = 0; r < q.num_files(); ++r)
      for (int m = 0; m < q.num_bs(); ++m)
        if (q.get(r, m)) load[m] += effective_rate(r, m);
    return load;
  }

  /// Number of BSs serving at least one file.
  int cooperating_bs() const { return q.cooperating_bs(); }
};

inline CooperationPlan make_plan(const Scenario& s, const CacheState& cache, const DeliveryContext& ctx,
                                 Cooperation q) {
  if (cache.num_bs() != s.num_bs) throw InvalidProblem("make_plan: cache has the wrong number of BSs");
  CooperationPlan plan;
  plan.effective_rate.resize(q.num_files(), s.num_bs);
  for (int r = 0; r < q.num_files(); ++r) {
    const int f = q.files()[r];
    if (f >= cache.num_files() || f >= static_cast<int>(ctx.file_rate_bps.size()))
      throw InvalidProblem("make_plan: file id outside the cache or rate table");
    for (int m = 0; m < s.num_bs; ++m)
      plan.effective_rate(r, m) = ctx.file_rate_bps[f] * std::max(0.0, 1.0 - cache.c(f, m));
  }
  plan.capacity_bps = s.backhaul_bps;
  plan.q = std::move(q);
  return plan;
}

namespace detail {

inline bool exceeds(double load, double capacity) { return load > capacity + 1e-9 * std::max(1.0, capacity); }

}  // namespace detail

/// BSs whose backhaul load exceeds their capacity.
inline std::vector<int> violation_set(const CooperationPlan& plan) {
  std::vector<int> out;
  const auto load = plan.backhaul_load();
  for (int m = 0; m < plan.q.num_bs(); ++m)
    if (detail::exceeds(load[m], plan.capacity_bps[m])) out.push_back(m);
  return out;
}

struct DeliveryOutcome {
  CooperationPlan plan;
  BeamformingSolution beams;
  double total_power_w = kInf;
  bool outage = true;
  bool solver_failure = false;  // outage caused by numerical breakdown
  int iterations = 0;           // greedy removals, or plans examined by the oracle
  int solve_count = 0;

  double total_power_dbm() const { return watts_to_dbm(total_power_w); }
};

namespace detail {

struct Evaluation {
  BeamformingSolution sol;
  bool solved = false;  // an actual conic solve took place
};

inline Evaluation evaluate(const Scenario& s, const Cooperation& q, const DeliveryContext& ctx) {
  Evaluation e;
  const auto p = build_r1(s, q, ctx.thresholds);
  for (const auto& b : p.blocks) {
    if (b.coords.empty() && p.kappa_req[b.request] > 0.0) {
      e.sol.status = SolveStatus::infeasible;
      e.sol.message = "request has no cooperating BS";
      return e;
    }
  }
  e.sol = solve_r1(p, ctx.r1);
  e.solved = true;
  return e;
}

inline void finish(DeliveryOutcome& out, BeamformingSolution sol) {
  out.outage = !sol.optimal();
  out.solver_failure = sol.status == SolveStatus::solver_failure;
  out.total_power_w = sol.optimal() ? sol.objective_w : kInf;
  out.beams = std::move(sol);
}

}  // namespace detail

/// Greedy cooperation formation. Starting from full cooperation, while some
/// BS exceeds its backhaul, the (file, BS) pair whose removal costs the least
/// transmit power is dropped. Only pairs that actually load a violating BS
/// are candidates; ties go to the lexicographically first pair.
inline DeliveryOutcome greedy_delivery(const Scenario& s, const CacheState& cache, const DeliveryContext& ctx) {
  DeliveryOutcome out;
  out.plan = make_plan(s, cache, ctx, Cooperation::full(s));
  BeamformingSolution current;
  bool have_current = false;
  for (;;) {
    const auto vio = violation_set(out.plan);
    if (vio.empty()) break;
    const int rows = out.plan.q.num_files();
    double best = kInf;
    int best_row = -1;
    int best_bs = -1;
    BeamformingSolution best_sol;
    bool any_failure = false;
    for (int r = 0; r < rows; ++r) {
      for (int m : vio) {
        if (!out.plan.q.get(r, m) || !(out.plan.effective_rate(r, m) > 0.0)) continue;
        Cooperation cand = out.plan.q;
        cand.set(r, m, false);
        auto ev = detail::evaluate(s, cand, ctx);
        out.solve_count += ev.solved ? 1 : 0;
        if (ev.sol.status == SolveStatus::solver_failure) any_failure = true;
        const double power = ev.sol.optimal() ? ev.sol.objective_w : kInf;
        // Candidates are visited in (file, BS) order, so only a clearly
        // smaller power displaces an earlier candidate.
        if (power < best * (1.0 - 1e-9)) {
          best = power;
          best_row = r;
          best_bs = m;
          best_sol = std::move(ev.sol);
        }
      }
    }
    if (best_row < 0) {
      out.outage = true;
      out.solver_failure = any_failure;
      out.total_power_w = kInf;
      return out;
    }
    out.plan.q.set(best_row, best_bs, false);
    ++out.iterations;
    current = std::move(best_sol);
    have_current = true;
  }
  if (!have_current) {
    auto ev = detail::evaluate(s, out.plan.q, ctx);
    out.solve_count += ev.solved ? 1 : 0;
    current = std::move(ev.sol);
  }
  detail::finish(out, std::move(current));
  return out;
}

/// Minimum-power plan over every binary q meeting the backhaul limits.
/// Plans are visited by decreasing size; a plan is skipped when a solved
/// superset already proves it cannot beat the incumbent (removing BSs never
/// lowers the optimal power) or when a superset is infeasible.
inline DeliveryOutcome exhaustive_delivery(const Scenario& s, const CacheState& cache, const DeliveryContext& ctx) {
  const auto files = s.requested_files();
  const int n = static_cast<int>(files.size()) * s.num_bs;
  if (n > ctx.exhaustive_guard)
    throw InstanceTooLarge("exhaustive_delivery: F(S)*M = " + std::to_string(n) + " exceeds the guard of " +
                           std::to_string(ctx.exhaustive_guard) + " (2^(F(S)*M) plans)");
  DeliveryOutcome out;
  const CooperationPlan base = make_plan(s, cache, ctx, Cooperation::full(s));
  const std::uint64_t total = std::uint64_t{1} << n;
  // Lower bound on the optimal power of each plan; +inf marks a plan known
  // to be infeasible.
  std::vector<double> bound(total, 0.0);
  std::vector<std::uint64_t> order(total);
  std::iota(order.begin(), order.end(), std::uint64_t{0});
  std::stable_sort(order.begin(), order.end(), [](std::uint64_t a, std::uint64_t b) {
    return std::popcount(a) > std::popcount(b);
  });

  double best = kInf;
  std::uint64_t best_mask = 0;
  BeamformingSolution best_sol;
  bool any_failure = false;
  const std::uint64_t full = total - 1;
  for (std::uint64_t mask : order) {
    double lb = 0.0;
    for (int i = 0; i < n; ++i) {
      const std::uint64_t bit = std::uint64_t{1} << i;
      if (!(mask & bit)) lb = std::max(lb, bound[mask | bit]);
    }
    bound[mask] = lb;
    if (mask != full && lb >= best) continue;
    if (std::isinf(lb)) continue;
    CooperationPlan plan = base;
    plan.q.set_mask(mask);
    if (!violation_set(plan).empty()) continue;
    ++out.iterations;
    auto ev = detail::evaluate(s, plan.q, ctx);
    out.solve_count += ev.solved ? 1 : 0;
    if (ev.sol.status == SolveStatus::solver_failure) any_failure = true;
    if (ev.sol.optimal()) {
      bound[mask] = std::max(lb, ev.sol.objective_w);
      if (ev.sol.objective_w < best) {
        best = ev.sol.objective_w;
        best_mask = mask;
        best_sol = std::move(ev.sol);
      }
    } else if (ev.sol.status == SolveStatus::infeasible) {
      bound[mask] = kInf;
    }
  }
  out.plan = base;
  if (std::isinf(best)) {
    out.outage = true;
    out.solver_failure = any_failure;
    return out;
  }
  out.plan.q.set_mask(best_mask);
  detail::finish(out, std::move(best_sol));
  return out;
}

/// Each file is served by a single BS: the nearest one (to the first user
/// requesting it) whose remaining backhaul can carry the file's effective
/// rate. Backhaul is consumed in user order.
inline DeliveryOutcome coordinated_baseline(const Scenario& s, const CacheState& cache, const DeliveryContext& ctx) {
  DeliveryOutcome out;
  out.plan = make_plan(s, cache, ctx, Cooperation::empty(s));
  std::vector<double> residual = s.backhaul_bps;
  std::vector<bool> assigned(out.plan.q.num_files(), false);
  for (const auto& req : s.requests) {
    const int row = out.plan.q.row_of(req.file);
    if (assigned[row]) continue;
    std::vector<int> bs(s.num_bs);
    std::iota(bs.begin(), bs.end(), 0);
    const Position& at = s.user_positions.at(req.user);
    std::stable_sort(bs.begin(), bs.end(), [&](int a, int b) {
      return distance(at, s.bs_positions[a]) < distance(at, s.bs_positions[b]);
    });
    for (int m : bs) {
      const double load = out.plan.effective_rate(row, m);
      if (!detail::exceeds(load, residual[m])) {
        residual[m] -= load;
        out.plan.q.set(row, m, true);
        assigned[row] = true;
        break;
      }
    }
    if (!assigned[row]) {
      out.outage = true;
      return out;
    }
  }
  auto ev = detail::evaluate(s, out.plan.q, ctx);
  out.solve_count = ev.solved ? 1 : 0;
  detail::finish(out, std::move(ev.sol));
  return out;
}

/// All BSs serve all users; backhaul limits are ignored.
inline DeliveryOutcome full_coop_baseline(const Scenario& s, const DeliveryContext& ctx) {
  DeliveryOutcome out;
  out.plan = make_plan(s, CacheState::filled(static_cast<int>(ctx.file_rate_bps.size()), s.num_bs, 0.0), ctx,
                       Cooperation::full(s));
  auto ev = detail::evaluate(s, out.plan.q, ctx);
  out.solve_count = ev.solved ? 1 : 0;
  detail::finish(out, std::move(ev.sol));
  return out;
}

}  // namespace cachesec
