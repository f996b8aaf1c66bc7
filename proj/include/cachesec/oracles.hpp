#pragma once

// Independent reference solutions used to cross-check the conic pipeline.

#include "cachesec/cache.hpp"
#include "cachesec/errors.hpp"
#include "cachesec/linalg.hpp"
#include "cachesec/model.hpp"
#include "cachesec/sdp_core.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

namespace cachesec::oracle {

/// Single user, no eavesdropper, no power cap: w = sqrt(p) h / |h| with
/// p = kappa sigma^2 / |h|^2.
inline double mrt_power(const CVec& h, double kappa, double noise_w) { return kappa * noise_w / h.squaredNorm(); }

inline CVec mrt_beamformer(const CVec& h, double kappa, double noise_w) {
  return h.normalized() * std::sqrt(mrt_power(h, kappa, noise_w));
}

struct DownlinkSolution {
  double power_w = kInf;
  std::vector<CVec> w;
  std::vector<double> lambda;  // dual variables mu_k
  int iterations = 0;
  bool converged = false;
};

/// Minimum-power multiuser beamforming under SINR targets only, from the
/// dual fixed point
///   mu_k = 1 / ((1 + 1/g_k) h_k^H (I + sum_j mu_j h_j h_j^H)^-1 h_k),
/// whose optimal power is s2 sum_k mu_k. Columns of `h` are the channels.
inline DownlinkSolution uplink_downlink(const CMat& h, const std::vector<double>& gamma, double noise_w,
                                        int max_iterations = 10000, double tol = 1e-14) {
  const int n = static_cast<int>(h.rows());
  const int k = static_cast<int>(h.cols());
  if (static_cast<int>(gamma.size()) != k) throw InvalidProblem("uplink_downlink: one target per user");
  DownlinkSolution out;
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(k);
  auto gram = [&](const Eigen::VectorXd& v) {
    CMat a = CMat::Identity(n, n);
    for (int j = 0; j < k; ++j) a += v(j) * h.col(j) * h.col(j).adjoint();
    return a;
  };
  for (int it = 0; it < max_iterations; ++it) {
    const Eigen::LLT<CMat> llt(gram(mu));
    Eigen::VectorXd next(k);
    for (int j = 0; j < k; ++j) next(j) = 1.0 / ((1.0 + 1.0 / gamma[j]) * std::real(h.col(j).dot(llt.solve(h.col(j)))));
    out.iterations = it + 1;
    const double change = (next - mu).cwiseAbs().maxCoeff() / next.cwiseAbs().maxCoeff();
    mu = next;
    if (change < tol) {
      out.converged = true;
      break;
    }
    if (!mu.allFinite()) break;
  }
  // Iterates only grow; a bounded limit means the targets are reachable.
  out.lambda.assign(mu.data(), mu.data() + k);
  if (!out.converged) return out;

  // Receive filters give the beam directions; powers then meet every SINR
  // target with equality.
  const Eigen::LLT<CMat> llt(gram(mu));
  std::vector<CVec> dir(k);
  for (int j = 0; j < k; ++j) dir[j] = llt.solve(h.col(j)).normalized();
  Eigen::MatrixXd a(k, k);
  Eigen::VectorXd rhs(k);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      const double gain = std::norm(h.col(i).dot(dir[j]));
      a(i, j) = i == j ? gain / gamma[i] : -gain;
    }
    rhs(i) = noise_w;
  }
  const Eigen::VectorXd p = a.partialPivLu().solve(rhs);
  out.power_w = p.sum();
  for (int j = 0; j < k; ++j) out.w.push_back(dir[j] * std::sqrt(std::max(p(j), 0.0)));
  return out;
}

struct Q0Solution {
  double average_power_w = kInf;
  bool feasible = false;
  std::vector<Cooperation> plans;  // chosen plan per scenario
  CacheState cache;                // a placement supporting those plans
  int solve_count = 0;
};

namespace detail {

/// Least average backhaul load at one BS for the given per-file cooperation
/// counts: fill the cache greedily by the traffic each bit saves.
inline double min_backhaul_load(const std::vector<double>& counts, const TrainingSet& ts, int m,
                                std::vector<double>* placement = nullptr) {
  const int F = ts.num_files();
  std::vector<int> order(F);
  std::iota(order.begin(), order.end(), 0);
  auto value = [&](int f) {
    return ts.file_size_bits[f] > 0.0 ? counts[f] * ts.file_rate_bps[f] / ts.file_size_bits[f] : kInf;
  };
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return value(a) > value(b); });
  double left = ts.cache_capacity_bits[m];
  std::vector<double> c(F, 0.0);
  for (int f : order) {
    if (ts.file_size_bits[f] <= 0.0) {
      c[f] = 1.0;
      continue;
    }
    if (!(left > 0.0) || counts[f] <= 0.0) continue;
    c[f] = std::min(1.0, left / ts.file_size_bits[f]);
    left -= c[f] * ts.file_size_bits[f];
  }
  double load = 0.0;
  for (int f = 0; f < F; ++f) load += (1.0 - c[f]) * counts[f] * ts.file_rate_bps[f];
  if (placement) *placement = c;
  return load;
}

}  // namespace detail

/// Exact optimum of the mixed-integer training problem with binary
/// cooperation. For fixed plans the cache only has to make the average
/// backhaul budget feasible, and that depends on the plans only through how
/// often each (file, BS) pair cooperates, so a dynamic program over those
/// counts is exact. Every scenario's 2^(F(S) M) plans are solved once.
inline Q0Solution q0_enumerate(const TrainingSet& ts, const R1Options& r1 = R1Options::fast(),
                               std::int64_t max_states = 5'000'000) {
  ts.validate();
  const int F = ts.num_files();
  const int M = ts.num_bs();
  const int W = ts.size();
  const int dims = F * M;
  std::int64_t states = 1;
  for (int i = 0; i < dims; ++i) {
    states *= (W + 1);
    if (states > max_states) throw InstanceTooLarge("q0_enumerate: (Omega+1)^(F M) count states exceed the guard");
  }
  Q0Solution out;

  // Per scenario: every plan's relaxed (tight) power.
  struct Option {
    std::uint64_t mask;
    double power;
    std::int64_t step;  // count-vector increment in mixed radix
  };
  std::vector<std::vector<Option>> options(W);
  std::vector<std::int64_t> radix(dims, 1);
  for (int i = 1; i < dims; ++i) radix[i] = radix[i - 1] * (W + 1);
  for (int w = 0; w < W; ++w) {
    const auto& s = ts.scenarios[w];
    Cooperation q = Cooperation::full(s);
    const int n = q.size();
    if (n > 20) throw InstanceTooLarge("q0_enumerate: too many cooperation pairs per scenario");
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
      q.set_mask(mask);
      const auto p = build_r1(s, q, ts.thresholds);
      bool empty_block = false;
      for (const auto& b : p.blocks) empty_block = empty_block || (b.coords.empty() && p.kappa_req[b.request] > 0.0);
      if (empty_block) continue;
      const auto sol = solve_r1(p, r1);
      ++out.solve_count;
      if (!sol.optimal()) continue;
      std::int64_t step = 0;
      for (int r = 0; r < q.num_files(); ++r)
        for (int m = 0; m < M; ++m)
          if (q.get(r, m)) step += radix[q.files()[r] * M + m];
      options[w].push_back({mask, sol.objective_w, step});
    }
    if (options[w].empty()) return out;
  }

  // best[state]: least total power reaching that count vector.
  std::vector<double> best(static_cast<std::size_t>(states), kInf);
  std::vector<std::vector<std::int32_t>> choice(W, std::vector<std::int32_t>(static_cast<std::size_t>(states), -1));
  best[0] = 0.0;
  for (int w = 0; w < W; ++w) {
    std::vector<double> next(static_cast<std::size_t>(states), kInf);
    for (std::int64_t st = 0; st < states; ++st) {
      if (!std::isfinite(best[st])) continue;
      for (std::size_t o = 0; o < options[w].size(); ++o) {
        const std::int64_t to = st + options[w][o].step;
        const double v = best[st] + options[w][o].power;
        if (v < next[to]) {
          next[to] = v;
          choice[w][to] = static_cast<std::int32_t>(o);
        }
      }
    }
    best.swap(next);
  }

  const auto avg_b = ts.average_backhaul();
  std::int64_t arg = -1;
  for (std::int64_t st = 0; st < states; ++st) {
    if (!std::isfinite(best[st]) || (arg >= 0 && best[st] >= best[arg])) continue;
    bool ok = true;
    for (int m = 0; m < M && ok; ++m) {
      std::vector<double> counts(F);
      for (int f = 0; f < F; ++f) counts[f] = static_cast<double>((st / radix[f * M + m]) % (W + 1));
      const double load = detail::min_backhaul_load(counts, ts, m) / W;
      ok = load <= avg_b[m] + 1e-9 * std::max(1.0, avg_b[m]);
    }
    if (ok) arg = st;
  }
  if (arg < 0) return out;

  out.feasible = true;
  out.average_power_w = best[arg] / W;
  out.cache = CacheState::filled(F, M, 0.0);
  for (int m = 0; m < M; ++m) {
    std::vector<double> counts(F), c;
    for (int f = 0; f < F; ++f) counts[f] = static_cast<double>((arg / radix[f * M + m]) % (W + 1));
    detail::min_backhaul_load(counts, ts, m, &c);
    for (int f = 0; f < F; ++f) out.cache.c(f, m) = c[f];
  }
  // Walk the choices back to recover each scenario's plan.
  out.plans.resize(W);
  std::int64_t st = arg;
  for (int w = W - 1; w >= 0; --w) {
    const auto& opt = options[w][choice[w][st]];
    out.plans[w] = Cooperation::full(ts.scenarios[w]);
    out.plans[w].set_mask(opt.mask);
    st -= opt.step;
  }
  return out;
}

}  // namespace cachesec::oracle
