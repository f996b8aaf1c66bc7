#pragma once

// Invariant and trend checks shared by `cachesec verify` and the acceptance
// binary. Each check takes its sample sizes so the same code runs at smoke
// scale and at full scale.

#include "cachesec/cache.hpp"
#include "cachesec/delivery.hpp"
#include "cachesec/harness.hpp"
#include "cachesec/model.hpp"
#include "cachesec/oracles.hpp"
#include "cachesec/sdp_core.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace cachesec::checks {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

namespace detail {

class Stopwatch {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline std::string sci(double v) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << v;
  return os.str();
}

inline std::string fixed(double v, int digits = 3) {
  std::ostringstream os;
  os.precision(digits);
  os << std::fixed << v;
  return os.str();
}

/// P(X >= k) for X ~ Binomial(n, 1/2).
inline double binomial_upper_tail(int k, int n) {
  if (k <= 0) return 1.0;
  if (k > n) return 0.0;
  double tail = 0.0;
  for (int i = k; i <= n; ++i)
    tail += std::exp(std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) - n * std::log(2.0));
  return std::min(1.0, tail);
}

inline CacheState desk_trained_cache(const SystemConfig& cfg, int training, std::uint64_t seed) {
  const auto pop = zipf_popularity(cfg.num_files, cfg.zipf_exponent);
  const auto ts = generate_training_set(cfg, pop, training, seed);
  const auto res = train_cache_q1(ts);
  if (!res.optimal()) throw std::runtime_error("cache training failed: " + res.message);
  return res.cache;
}

}  // namespace detail

/// Outcome of the paired rank-1 / KKT run.
struct RelaxationChecks {
  CheckResult rank1;
  CheckResult kkt;
};

/// Solves `feasible` random desk instances with mixed cooperation (each
/// (file, BS) pair kept with probability 2/3) in extended precision. Checks
/// the eigenvalue ratio of every W, the exact constraints at the recovered
/// beamformers, and the dual certificate.
inline RelaxationChecks rank1_and_kkt(int feasible, std::uint64_t seed, double tol = 1e-6) {
  detail::Stopwatch clock;
  const SystemConfig cfg = SystemConfig::desk();
  const auto pop = zipf_popularity(cfg.num_files, cfg.zipf_exponent);
  const auto th = Thresholds::from_config(cfg);
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution keep(2.0 / 3.0);

  int solved = 0, infeasible = 0, failures = 0, rank_bad = 0, exact_bad = 0, kkt_bad = 0, b_bad = 0;
  double worst_ratio = 0.0, worst_exact = 0.0, worst_kkt = 0.0, min_b = kInf;
  std::string first_kkt_reason;
  for (std::uint64_t i = 0; solved < feasible && i < static_cast<std::uint64_t>(20 * feasible + 100); ++i) {
    const Scenario s = generate_scenario(cfg, pop, seed + i);
    Cooperation q = Cooperation::full(s);
    for (int r = 0; r < q.num_files(); ++r)
      for (int m = 0; m < q.num_bs(); ++m) q.set(r, m, keep(rng));
    const auto p = build_r1(s, q, th);
    bool empty = false;
    for (const auto& b : p.blocks) empty = empty || (b.coords.empty() && p.kappa_req[b.request] > 0.0);
    if (empty) continue;
    const auto sol = solve_r1(p);
    if (sol.status == SolveStatus::infeasible) {
      ++infeasible;
      continue;
    }
    if (!sol.optimal() || !sol.duals) {
      ++failures;
      continue;
    }
    ++solved;
    double ratio = 0.0;
    for (double r : sol.rank_ratio) ratio = std::max(ratio, r);
    worst_ratio = std::max(worst_ratio, ratio);
    if (!(ratio <= tol)) ++rank_bad;
    const auto rep = verify_solution(s, q, sol.w, th);
    const double exact = std::max(rep.c6, rep.c7);
    worst_exact = std::max(worst_exact, exact);
    if (!(exact <= tol)) ++exact_bad;
    const auto cert = kkt_residuals(p, sol, *sol.duals, tol);
    worst_kkt = std::max(worst_kkt, cert.worst_scaled());
    for (double e : cert.b_min_eigenvalue) min_b = std::min(min_b, e);
    bool pd = true;
    for (double e : cert.b_min_eigenvalue) pd = pd && e > 0.0;
    if (!pd) ++b_bad;
    if (!cert.valid) {
      ++kkt_bad;
      if (first_kkt_reason.empty()) first_kkt_reason = cert.reason;
    }
  }
  const double t = clock.seconds();
  RelaxationChecks out;
  out.rank1.name = "rank-1 tightness";
  out.rank1.passed = solved >= feasible && failures == 0 && rank_bad == 0 && exact_bad == 0;
  out.rank1.detail = std::to_string(solved) + " feasible solves (" + std::to_string(infeasible) + " infeasible, " +
                     std::to_string(failures) + " solver failures); worst lambda2/lambda1 " + detail::sci(worst_ratio) +
                     ", worst exact C6/C7 residual " + detail::sci(worst_exact) + "; violations " +
                     std::to_string(rank_bad + exact_bad);
  out.rank1.seconds = t;
  out.kkt.name = "KKT certificate";
  out.kkt.passed = solved >= feasible && failures == 0 && kkt_bad == 0 && b_bad == 0;
  out.kkt.detail = std::to_string(solved) + " certificates; worst residual / (1 + |B|) " + detail::sci(worst_kkt) +
                   ", min eig(B) " + detail::sci(min_b) + "; rejected " + std::to_string(kkt_bad) +
                   (first_kkt_reason.empty() ? "" : " (first: " + first_kkt_reason + ")");
  out.kkt.seconds = t;
  return out;
}

/// Greedy against exhaustive search on tiny instances (M in {2, 3}, K = 2,
/// two distinct files). Instances whose full cooperation already meets the
/// backhaul are counted separately and must match exactly.
inline CheckResult oracle_equivalence(int binding, int unconstrained, std::uint64_t seed, double match_tol = 1e-5,
                                      double order_tol = 1e-6) {
  detail::Stopwatch clock;
  const auto base = SystemConfig::desk();
  int n_bind = 0, n_free = 0, bind_match = 0, free_match = 0, below = 0;
  double worst_below = 0.0;
  std::uint64_t i = 0;
  const std::uint64_t max_draws = 50 * static_cast<std::uint64_t>(binding + unconstrained) + 200;
  for (; (n_bind < binding || n_free < unconstrained) && i < max_draws; ++i) {
    SystemConfig cfg = base;
    cfg.num_bs = 2 + static_cast<int>(i % 2);
    cfg.num_users = 2;
    const auto pop = zipf_popularity(cfg.num_files, cfg.zipf_exponent);
    const Scenario s = generate_scenario(cfg, pop, seed + i);
    if (s.requested_files().size() != 2) continue;
    CacheState cache;
    switch ((i / 2) % 3) {
      case 0: cache = CacheState::filled(cfg.num_files, cfg.num_bs, 0.0); break;
      case 1: cache = uniform_caching(cfg); break;
      default: cache = preference_caching(pop, cfg); break;
    }
    const auto ctx = DeliveryContext::from_config(cfg, R1Options::fast());
    const bool is_binding = !violation_set(make_plan(s, cache, ctx, Cooperation::full(s))).empty();
    if (is_binding ? n_bind >= binding : n_free >= unconstrained) continue;
    const auto ex = exhaustive_delivery(s, cache, ctx);
    if (ex.outage) continue;
    const auto gr = greedy_delivery(s, cache, ctx);
    const double g = gr.outage ? kInf : gr.total_power_w;
    const double e = ex.total_power_w;
    if (g < e * (1.0 - order_tol)) {
      ++below;
      worst_below = std::max(worst_below, (e - g) / e);
    }
    const bool match = std::abs(g - e) <= match_tol * e;
    if (is_binding) {
      ++n_bind;
      bind_match += match ? 1 : 0;
    } else {
      ++n_free;
      free_match += match ? 1 : 0;
    }
  }
  CheckResult out;
  out.name = "oracle equivalence";
  const double rate = n_bind > 0 ? static_cast<double>(bind_match) / n_bind : 0.0;
  out.passed = n_bind >= binding && n_free >= unconstrained && below == 0 && rate >= 0.6 && free_match == n_free;
  out.detail = "binding: " + std::to_string(bind_match) + "/" + std::to_string(n_bind) + " exact matches (" +
               detail::fixed(100.0 * rate, 1) + "%); unconstrained: " + std::to_string(free_match) + "/" +
               std::to_string(n_free) + "; greedy below exhaustive: " + std::to_string(below) +
               (below ? " (worst " + detail::sci(worst_below) + ")" : "");
  out.seconds = clock.seconds();
  return out;
}

/// Nested plans Q1 subset of Q2 on desk scenarios: removing cooperating BSs
/// never lowers the optimal power, and never turns an infeasible plan
/// feasible.
inline CheckResult nested_monotonicity(int pairs, std::uint64_t seed, double tol = 1e-6) {
  detail::Stopwatch clock;
  const SystemConfig cfg = SystemConfig::desk();
  const auto pop = zipf_popularity(cfg.num_files, cfg.zipf_exponent);
  const auto ctx = DeliveryContext::from_config(cfg);
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution keep_big(0.75), drop(0.3);
  int done = 0, violations = 0, failures = 0, both_feasible = 0;
  double worst = 0.0;
  for (std::uint64_t i = 0; done < pairs; ++i) {
    const Scenario s = generate_scenario(cfg, pop, seed + i);
    Cooperation big = Cooperation::full(s);
    for (int r = 0; r < big.num_files(); ++r)
      for (int m = 0; m < big.num_bs(); ++m) big.set(r, m, keep_big(rng));
    Cooperation small = big;
    bool removed = false;
    for (int r = 0; r < big.num_files(); ++r)
      for (int m = 0; m < big.num_bs(); ++m)
        if (big.get(r, m) && drop(rng)) {
          small.set(r, m, false);
          removed = true;
        }
    if (!removed) continue;
    const auto e2 = cachesec::detail::evaluate(s, big, ctx);
    const auto e1 = cachesec::detail::evaluate(s, small, ctx);
    ++done;
    if (e1.sol.status == SolveStatus::solver_failure || e2.sol.status == SolveStatus::solver_failure) {
      ++failures;
      continue;
    }
    if (!e1.sol.optimal()) continue;
    if (!e2.sol.optimal()) {
      ++violations;  // the smaller plan is feasible but the larger is not
      continue;
    }
    ++both_feasible;
    const double p1 = e1.sol.objective_w, p2 = e2.sol.objective_w;
    if (p1 < p2 - tol * p1) {
      ++violations;
      worst = std::max(worst, (p2 - p1) / p1);
    }
  }
  CheckResult out;
  out.name = "nested-plan monotonicity";
  out.passed = violations == 0 && failures == 0;
  out.detail = std::to_string(done) + " pairs (" + std::to_string(both_feasible) + " both feasible); violations " +
               std::to_string(violations) + (violations ? " (worst " + detail::sci(worst) + ")" : "") +
               "; solver failures " + std::to_string(failures);
  out.seconds = clock.seconds();
  return out;
}

/// full-coop <= exhaustive <= greedy <= coordinated per scenario, on desk
/// scenarios where all four are feasible, under a trained cache.
inline CheckResult scheme_ordering(int scenarios, std::uint64_t seed, int training = 10, double slack_w = 1e-6) {
  detail::Stopwatch clock;
  const SystemConfig cfg = SystemConfig::desk();
  const auto pop = zipf_popularity(cfg.num_files, cfg.zipf_exponent);
  const auto ctx = DeliveryContext::from_config(cfg, R1Options::fast());
  const CacheState cache = detail::desk_trained_cache(cfg, training, seed);
  int done = 0, skipped = 0;
  int bad[3] = {0, 0, 0};
  for (std::uint64_t i = 0; done < scenarios && i < static_cast<std::uint64_t>(50 * scenarios + 100); ++i) {
    const Scenario s = generate_scenario(cfg, pop, seed + i);
    const auto full = full_coop_baseline(s, ctx);
    const auto ex = exhaustive_delivery(s, cache, ctx);
    const auto gr = greedy_delivery(s, cache, ctx);
    const auto co = coordinated_baseline(s, cache, ctx);
    if (full.outage || ex.outage || gr.outage || co.outage) {
      ++skipped;
      continue;
    }
    ++done;
    if (full.total_power_w > ex.total_power_w + slack_w) ++bad[0];
    if (ex.total_power_w > gr.total_power_w + slack_w) ++bad[1];
    if (gr.total_power_w > co.total_power_w + slack_w) ++bad[2];
  }
  CheckResult out;
  out.name = "scheme ordering";
  out.passed = done >= scenarios && bad[0] + bad[1] + bad[2] == 0;
  out.detail = std::to_string(done) + " all-feasible scenarios (" + std::to_string(skipped) +
               " skipped); violations full>exh " + std::to_string(bad[0]) + ", exh>greedy " + std::to_string(bad[1]) +
               ", greedy>coord " + std::to_string(bad[2]);
  out.seconds = clock.seconds();
  return out;
}

/// Mean greedy power under the trained cache across cache capacities:
/// non-increasing within one standard error of the difference, and a drop of
/// at least `min_drop_db` from the first capacity to the last.
inline CheckResult capacity_trend(const SystemConfig& base, const std::vector<double>& capacities_mb, int scenarios,
                                  int training, std::uint64_t seed, double min_drop_db = 3.0,
                                  std::vector<MetricsRecord>* records = nullptr) {
  detail::Stopwatch clock;
  ExperimentSpec spec;
  spec.base = base;
  spec.sweep_name = "cache_capacity_mb";
  spec.sweep_values = capacities_mb;
  spec.schemes = {Scheme::proposed};
  spec.eval_scenarios = scenarios;
  spec.training_scenarios = training;
  spec.seed = seed;
  const auto recs = run_experiment(spec);
  bool ok = true;
  std::string series;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    series += (i ? ", " : "") + detail::fixed(recs[i].sweep_value, 0) + " MB: " +
              detail::fixed(recs[i].mean_power_dbm, 2) + " dBm (p_out " + detail::fixed(recs[i].p_out, 3) + ")";
    if (!recs[i].has_power()) ok = false;
    if (i > 0 && recs[i].has_power() && recs[i - 1].has_power()) {
      const double se = std::hypot(recs[i].power_stderr_w, recs[i - 1].power_stderr_w);
      if (recs[i].mean_power_w > recs[i - 1].mean_power_w + se) ok = false;
    }
  }
  const double drop = recs.size() >= 2 ? recs.front().mean_power_dbm - recs.back().mean_power_dbm : 0.0;
  if (!(drop >= min_drop_db)) ok = false;
  CheckResult out;
  out.name = "cache capacity trend";
  out.passed = ok;
  out.detail = series + "; drop " + detail::fixed(drop, 2) + " dB";
  out.seconds = clock.seconds();
  if (records) *records = recs;
  return out;
}

/// Paired outage comparison between two configs on the same evaluation
/// seeds, proposed scheme. Passes when `worse` has significantly more
/// outages than `better` (exact one-sided sign test on discordant pairs).
struct OutageComparison {
  int outages_worse = 0;
  int outages_better = 0;
  int only_worse = 0;   // discordant: outage under `worse` only
  int only_better = 0;
  double p_value = 1.0;
};

inline OutageComparison compare_outage(const SystemConfig& worse, const SystemConfig& better, int scenarios,
                                       int training, std::uint64_t seed) {
  ExperimentSpec spec;
  spec.sweep_name = "none";
  spec.sweep_values = {0.0};
  spec.schemes = {Scheme::proposed};
  spec.eval_scenarios = scenarios;
  spec.training_scenarios = training;
  spec.seed = seed;
  spec.base = worse;
  const auto a = run_experiment(spec).front();
  spec.base = better;
  const auto b = run_experiment(spec).front();
  OutageComparison out;
  for (int i = 0; i < scenarios; ++i) {
    const bool oa = std::isnan(a.powers_w[i]);
    const bool ob = std::isnan(b.powers_w[i]);
    out.outages_worse += oa;
    out.outages_better += ob;
    out.only_worse += oa && !ob;
    out.only_better += ob && !oa;
  }
  out.p_value = detail::binomial_upper_tail(out.only_worse, out.only_worse + out.only_better);
  return out;
}

/// Outage falls with more transmit antennas (Nt 2 -> 4 at Ne = 2) and rises
/// with more eavesdropper antennas (Ne 1 -> 2 at Nt = 2), on desk configs.
inline CheckResult antenna_outage_trend(int scenarios, int training, std::uint64_t seed, double alpha = 0.05) {
  detail::Stopwatch clock;
  SystemConfig nt2 = SystemConfig::desk();
  nt2.tx_antennas = 2;
  nt2.er_antennas = 2;
  SystemConfig nt4 = nt2;
  nt4.tx_antennas = 4;
  SystemConfig ne1 = nt2;
  ne1.er_antennas = 1;
  const auto tx = compare_outage(nt2, nt4, scenarios, training, seed);
  const auto er = compare_outage(nt2, ne1, scenarios, training, seed);
  auto describe = [&](const char* what, const OutageComparison& c, const char* worse, const char* better) {
    return std::string(what) + ": p_out " + detail::fixed(static_cast<double>(c.outages_worse) / scenarios, 3) + " (" +
           worse + ") vs " + detail::fixed(static_cast<double>(c.outages_better) / scenarios, 3) + " (" + better +
           "), discordant " + std::to_string(c.only_worse) + "/" + std::to_string(c.only_better) + ", p = " +
           detail::sci(c.p_value);
  };
  CheckResult out;
  out.name = "antenna outage trend";
  out.passed = tx.outages_worse > tx.outages_better && tx.p_value < alpha && er.outages_worse > er.outages_better &&
               er.p_value < alpha;
  out.detail = describe("Nt 2->4 at Ne=2", tx, "Nt=2", "Nt=4") + "; " + describe("Ne 1->2 at Nt=2", er, "Ne=2", "Ne=1") +
               "; " + std::to_string(scenarios) + " scenarios each";
  out.seconds = clock.seconds();
  return out;
}

/// Relative gap (Q0 - Q1) / Q1 between the exact mixed-integer training
/// optimum and the relaxed training program, averaged over repetitions, for
/// each training-set size. Uses M = 2 BSs, K = 2 users, F = 2 files and room
/// for half a file per cache so that the backhaul budget binds.
struct TrainingGap {
  int omega = 0;
  double mean_gap = 0.0;
  double min_gap = 0.0;
  int reps = 0;
};

inline SystemConfig small_training_config() {
  SystemConfig cfg = SystemConfig::desk();
  cfg.num_bs = 2;
  cfg.num_users = 2;
  cfg.num_files = 2;
  cfg.cache_capacity_bits = 0.5 * cfg.file_size_bits;
  return cfg;
}

inline std::vector<TrainingGap> training_gaps(const std::vector<int>& omegas, int reps, std::uint64_t seed) {
  const SystemConfig cfg = small_training_config();
  const auto pop = zipf_popularity(cfg.num_files, cfg.zipf_exponent);
  TrainOptions opt;
  opt.backhaul_tiebreak = 0.0;
  std::vector<TrainingGap> out;
  for (int omega : omegas) {
    TrainingGap g;
    g.omega = omega;
    g.min_gap = kInf;
    for (int r = 0; r < reps; ++r) {
      // With few scenarios the binary program can be infeasible (e.g. every
      // BS without backhaul) while the relaxation is not; such draws give
      // an infinite gap and are replaced.
      oracle::Q0Solution q0;
      TrainingSet ts;
      for (int attempt = 0; !q0.feasible; ++attempt) {
        if (attempt == 100)
          throw std::runtime_error("training gap: no feasible training set for Omega = " + std::to_string(omega));
        const std::uint64_t s = seed + 100'000 * static_cast<std::uint64_t>(r) + 1'000 * attempt;
        ts = generate_training_set(cfg, pop, omega, s);
        q0 = oracle::q0_enumerate(ts);
      }
      const auto q1 = train_cache_q1(ts, opt);
      if (!q1.optimal())
        throw std::runtime_error("training gap: relaxed training failed for Omega = " + std::to_string(omega) + ": " +
                                 q1.message);
      const double gap = (q0.average_power_w - q1.average_power_w) / q1.average_power_w;
      g.mean_gap += gap;
      g.min_gap = std::min(g.min_gap, gap);
      ++g.reps;
    }
    g.mean_gap /= std::max(1, g.reps);
    out.push_back(g);
  }
  return out;
}

inline CheckResult training_gap_trend(const std::vector<int>& omegas, int reps, std::uint64_t seed) {
  detail::Stopwatch clock;
  const auto gaps = training_gaps(omegas, reps, seed);
  bool ok = gaps.size() >= 2;
  std::string series;
  for (std::size_t i = 0; i < gaps.size(); ++i) {
    series += (i ? ", " : "") + std::string("Omega=") + std::to_string(gaps[i].omega) + ": " +
              detail::sci(gaps[i].mean_gap) + " (min " + detail::sci(gaps[i].min_gap) + ")";
    if (i > 0 && !(gaps[i].mean_gap < gaps[i - 1].mean_gap)) ok = false;
  }
  CheckResult out;
  out.name = "training gap vs Omega";
  out.passed = ok;
  out.detail = "mean relative gap over " + std::to_string(reps) + " repetitions: " + series;
  out.seconds = clock.seconds();
  return out;
}

/// det(I + A) >= 1 + tr A on random PSD matrices, with equality at rank one.
inline CheckResult det_trace_numerics(int psd, int rank_one, std::uint64_t seed, double tol = 1e-12) {
  detail::Stopwatch clock;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
  std::uniform_int_distribution<int> dim(1, 8);
  std::uniform_real_distribution<double> log_scale(-3.0, 1.0);
  auto gaussian = [&](int rows, int cols) {
    CMat x(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) x(i, j) = {normal(rng), normal(rng)};
    return x;
  };
  double min_gap = kInf, max_rank_one = 0.0;
  int bad_psd = 0, bad_rank_one = 0;
  for (int i = 0; i < psd; ++i) {
    const int n = dim(rng);
    const int r = std::uniform_int_distribution<int>(0, n)(rng);
    const CMat x = gaussian(n, r) * std::pow(10.0, log_scale(rng));
    const CMat a = x * x.adjoint();
    const double gap = det_trace_bound_check(a).gap;
    min_gap = std::min(min_gap, gap);
    if (!(gap >= -tol)) ++bad_psd;
  }
  for (int i = 0; i < rank_one; ++i) {
    const CVec v = gaussian(dim(rng), 1).col(0);
    const double gap = det_trace_bound_check(v * v.adjoint()).gap;
    max_rank_one = std::max(max_rank_one, std::abs(gap));
    if (!(std::abs(gap) <= tol)) ++bad_rank_one;
  }
  CheckResult out;
  out.name = "det-trace bound";
  out.passed = bad_psd == 0 && bad_rank_one == 0;
  out.detail = std::to_string(psd) + " PSD: min gap " + detail::sci(min_gap) + ", violations " +
               std::to_string(bad_psd) + "; " + std::to_string(rank_one) + " rank-1: max |gap| " +
               detail::sci(max_rank_one) + ", violations " + std::to_string(bad_rank_one);
  out.seconds = clock.seconds();
  return out;
}

/// Two identical sweeps produce identical CSV bytes.
inline CheckResult sweep_determinism(const ExperimentSpec& spec) {
  detail::Stopwatch clock;
  std::ostringstream a, b;
  write_csv(a, run_experiment(spec));
  write_csv(b, run_experiment(spec));
  CheckResult out;
  out.name = "sweep determinism";
  out.passed = a.str() == b.str() && !a.str().empty();
  out.detail = std::to_string(a.str().size()) + " CSV bytes, " + (out.passed ? "identical" : "different");
  out.seconds = clock.seconds();
  return out;
}

}  // namespace cachesec::checks
