#include "cachesec/oracles.hpp"
#include "cachesec/sdp_core.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace cachesec;
using cachesec::testing::gaussian;
using cachesec::testing::make_scenario;

namespace {

const Thresholds kNoEr{1.0, kInf, kInf};

Scenario desk_scenario(std::uint64_t seed, SystemConfig cfg = SystemConfig::desk()) {
  return generate_scenario(cfg, zipf_popularity(cfg.num_files, cfg.zipf_exponent), seed);
}

}  // namespace

TEST(R1, SingleUserMatchesMrt) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const CMat h = gaussian(3, 1, seed);
    const auto s = make_scenario(1, 3, {0}, h, gaussian(3, 1, 100 + seed), {0.0}, 0.5);
    const Thresholds t{0.8, kInf, kInf};
    const auto p = build_r1(s, Cooperation::full(s), t);
    const auto sol = solve_r1(p);
    ASSERT_TRUE(sol.optimal()) << sol.message;
    EXPECT_NEAR(sol.objective_w, oracle::mrt_power(h.col(0), 0.8, 0.5), 1e-9 * sol.objective_w);
    const CVec w = oracle::mrt_beamformer(h.col(0), 0.8, 0.5);
    EXPECT_NEAR(std::abs(sol.w[0].dot(w)), w.squaredNorm(), 1e-7 * w.squaredNorm());
  }
}

TEST(R1, PowerCapBelowMrtIsInfeasible) {
  const CMat h = gaussian(2, 1, 3);
  const auto s = make_scenario(1, 2, {0}, h, gaussian(2, 1, 4), {0.0});
  const double mrt = oracle::mrt_power(h.col(0), 1.0, 1.0);
  const auto p = build_r1(s, Cooperation::full(s), Thresholds{1.0, kInf, 0.9 * mrt});
  EXPECT_EQ(solve_r1(p).status, SolveStatus::infeasible);
  const auto q = build_r1(s, Cooperation::full(s), Thresholds{1.0, kInf, 1.1 * mrt});
  EXPECT_TRUE(solve_r1(q).optimal());
}

TEST(R1, TwoUsersMatchUplinkDownlinkOracle) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const CMat h = gaussian(4, 2, seed);
    const auto s = make_scenario(2, 2, {0, 1}, h, gaussian(4, 1, 50 + seed), {0.0, 0.0}, 0.3);
    const Thresholds t{1.5, kInf, kInf};
    const auto sol = solve_r1(build_r1(s, Cooperation::full(s), t));
    ASSERT_TRUE(sol.optimal()) << sol.message;
    const auto ref = oracle::uplink_downlink(h, {1.5, 1.5}, 0.3);
    ASSERT_TRUE(ref.converged);
    EXPECT_NEAR(sol.objective_w, ref.power_w, 1e-4 * ref.power_w) << "seed " << seed;
    double dual_power = 0.0;
    for (double mu : ref.lambda) dual_power += 0.3 * mu;
    EXPECT_NEAR(ref.power_w, dual_power, 1e-9 * dual_power);
  }
}

TEST(R1, EmptyRequestSetCostsNothing) {
  Scenario s = make_scenario(2, 2, {}, CMat(4, 0), gaussian(4, 1, 1), {0.0, 0.0});
  const auto sol = solve_r1(build_r1(s, Cooperation::full(s), kNoEr));
  ASSERT_TRUE(sol.optimal());
  EXPECT_EQ(sol.objective_w, 0.0);
}

TEST(R1, RejectsMismatchedPlan) {
  const auto s = make_scenario(2, 2, {0}, gaussian(4, 1, 1), gaussian(4, 1, 2), {0.0, 0.0});
  EXPECT_THROW(build_r1(s, Cooperation({0}, 3, true), kNoEr), InvalidProblem);
  EXPECT_THROW(build_r1(s, Cooperation({1}, 2, true), kNoEr), InvalidProblem);
  Scenario bad = s;
  bad.channels = gaussian(3, 1, 1);
  EXPECT_THROW(build_r1(bad, Cooperation::full(s), kNoEr), InvalidProblem);
}

TEST(R1, NonCooperatingBsTransmitsNothing) {
  const auto s = desk_scenario(5);
  Cooperation q = Cooperation::full(s);
  for (int r = 0; r < q.num_files(); ++r) q.set(r, 1, false);
  const auto th = Thresholds::from_config(SystemConfig::desk());
  const auto sol = solve_r1(build_r1(s, q, th));
  ASSERT_TRUE(sol.optimal()) << sol.message;
  for (const auto& W : sol.W) EXPECT_EQ(W.block(2, 2, 2, 2).norm(), 0.0);
  EXPECT_EQ(verify_solution(s, q, sol.w, th).c4, 0.0);
}

TEST(R1, RandomSolvesAreRankOneAndConsistent) {
  const auto cfg = SystemConfig::desk();
  const auto th = Thresholds::from_config(cfg);
  std::mt19937_64 rng(9);
  int solved = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto s = desk_scenario(seed);
    Cooperation q = Cooperation::full(s);
    for (int r = 0; r < q.num_files(); ++r)
      for (int m = 0; m < q.num_bs(); ++m) q.set(r, m, rng() % 4 != 0);
    const auto sol = solve_r1(build_r1(s, q, th));
    if (!sol.optimal()) continue;
    ++solved;
    double sum = 0.0;
    for (std::size_t r = 0; r < sol.W.size(); ++r) {
      EXPECT_LE(sol.rank_ratio[r], 1e-6);
      EXPECT_LE(sol.rank1_residual[r], 1e-5);
      EXPECT_LE(hermitian_defect(sol.W[r]), 1e-9 * std::max(1e-30, std::real(sol.W[r].trace())));
      sum += sol.w[r].squaredNorm();
      for (int m = 0; m < s.num_bs; ++m)
        EXPECT_NEAR(std::real(sol.W[r].block(2 * m, 2 * m, 2, 2).trace()), sol.w[r].segment(2 * m, 2).squaredNorm(),
                    1e-6 * std::real(sol.W[r].trace()));
    }
    EXPECT_NEAR(sum, sol.objective_w, 1e-6 * sol.objective_w);
    const auto rep = verify_solution(s, q, sol.w, th);
    EXPECT_LE(rep.c6, 1e-6);
    EXPECT_LE(rep.c7, 1e-6);
    EXPECT_LE(rep.c5, 1e-6);
    // The relaxed eavesdropper LMI implies the per-antenna capacity bound.
    for (double re : rep.er_rate) EXPECT_LE(re, s.er_antennas * std::log2(1.0 + th.kappa_tol) + 1e-9);
  }
  EXPECT_GT(solved, 80);
}

TEST(R1, FastProfileAgreesWithExtended) {
  const auto th = Thresholds::from_config(SystemConfig::desk());
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto s = desk_scenario(seed);
    const auto p = build_r1(s, Cooperation::full(s), th);
    const auto a = solve_r1(p);
    const auto b = solve_r1(p, R1Options::fast());
    ASSERT_EQ(a.status, b.status);
    if (a.optimal()) {
      EXPECT_NEAR(a.objective_w, b.objective_w, 1e-8 * a.objective_w);
    }
  }
}

TEST(R1, MonotoneInThresholds) {
  const auto cfg = SystemConfig::desk();
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const auto s = desk_scenario(seed);
    const auto q = Cooperation::full(s);
    Thresholds t = Thresholds::from_config(cfg);
    double prev = 0.0;
    for (double scale : {0.5, 1.0, 1.5, 2.0}) {
      Thresholds u = t;
      u.kappa_req = t.kappa_req * scale;
      const auto sol = solve_r1(build_r1(s, q, u), R1Options::fast());
      const double p = sol.optimal() ? sol.objective_w : kInf;
      EXPECT_GE(p, prev * (1.0 - 1e-8));
      prev = p;
    }
    prev = kInf;
    for (double scale : {0.5, 1.0, 2.0, 8.0}) {
      Thresholds u = t;
      u.kappa_tol = t.kappa_tol * scale;
      const auto sol = solve_r1(build_r1(s, q, u), R1Options::fast());
      const double p = sol.optimal() ? sol.objective_w : kInf;
      EXPECT_LE(p, prev * (1.0 + 1e-8));
      prev = p;
    }
  }
}

TEST(Rank1, ExtractsPrincipalVector) {
  CMat d = CMat::Zero(2, 2);
  d(0, 0) = 1.0;
  const CVec w = extract_rank1(d);
  EXPECT_NEAR(std::abs(w(0) - 1.0), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(w(1)), 0.0, 1e-15);

  const CVec v = gaussian(4, 1, 2).col(0);
  const CVec u = extract_rank1(CMat(v * v.adjoint()));
  const cd phase = v.dot(u) / v.squaredNorm();
  EXPECT_NEAR(std::abs(phase), 1.0, 1e-12);
  EXPECT_LE((u - phase * v).norm(), 1e-12 * v.norm());
  Eigen::Index big = 0;
  u.cwiseAbs().maxCoeff(&big);
  EXPECT_NEAR(std::imag(u(big)), 0.0, 1e-15);
  EXPECT_GE(std::real(u(big)), 0.0);

  EXPECT_THROW(extract_rank1(CMat(CMat::Identity(2, 2))), CertificateFailure);
}

TEST(VerifySolution, ZeroBeamformersMissQosByNoiseTimesTarget) {
  const auto s = make_scenario(1, 2, {0}, gaussian(2, 1, 1), gaussian(2, 1, 2), {0.0}, 0.7);
  const auto rep = verify_solution(s, Cooperation::full(s), {CVec::Zero(2)}, Thresholds{1.3, kInf, kInf});
  EXPECT_NEAR(rep.c6_abs_w, 0.7 * 1.3, 1e-15);
  EXPECT_NEAR(rep.c6, 1.0, 1e-15);
}

TEST(VerifySolution, SingleAntennaEavesdropperCapacity) {
  const CMat g = gaussian(2, 1, 2);
  const auto s = make_scenario(1, 2, {0}, gaussian(2, 1, 1), g, {0.0}, 0.7);
  const CVec w = gaussian(2, 1, 3).col(0);
  const auto rep = verify_solution(s, Cooperation::full(s), {w}, Thresholds{1.0, 0.1, kInf});
  EXPECT_NEAR(rep.er_rate[0], std::log2(1.0 + std::norm(g.col(0).dot(w)) / 0.7), 1e-12);
}

TEST(VerifySolution, TraceAndDeterminantFormsAgreeAtRankOne) {
  const CMat g = gaussian(4, 3, 5);
  const CVec w = gaussian(4, 1, 6).col(0);
  const CMat a = g.adjoint() * w * w.adjoint() * g / 0.4;
  EXPECT_NEAR(std::log2(1.0 + std::real(a.trace())), log2_det_identity_plus(a), 1e-9);
}

// ---------------------------------------------------------------------------
// KKT certificate

namespace {

// minimize tr W  s.t.  tr(W H) >= 1, W psd, with H = h h^H (unit noise and
// target). In normalized units the analytic multipliers are
// lambda = kappa / |h^|^2 and Theta = I - h^ h^^H / |h^|^2.
struct Toy {
  Scenario s;
  BeamformingProblem p;
  BeamformingSolution sol;
  Duals analytic;
};

Toy make_toy() {
  Toy t;
  const CMat h = gaussian(3, 1, 21);
  t.s = make_scenario(1, 3, {0}, h, gaussian(3, 1, 22), {0.0}, 1.0);
  t.p = build_r1(t.s, Cooperation::full(t.s), kNoEr);
  t.sol = solve_r1(t.p);
  const CVec hn = t.p.h.col(0);
  t.analytic.alpha = {{0.0}};
  t.analytic.beta = {0.0};
  t.analytic.lambda = {t.p.kappa_req[0] / hn.squaredNorm()};
  t.analytic.phi = {CMat()};
  t.analytic.theta = {CMat(CMat::Identity(3, 3) - hn * hn.adjoint() / hn.squaredNorm())};
  return t;
}

}  // namespace

TEST(Kkt, ToyProblemHasAnalyticCertificate) {
  const Toy t = make_toy();
  ASSERT_TRUE(t.sol.optimal());
  EXPECT_NEAR(t.sol.objective_w, 1.0 / t.s.channels.squaredNorm(), 1e-10);
  const auto cert = kkt_residuals(t.p, t.sol, t.analytic);
  EXPECT_TRUE(cert.valid) << cert.reason;
  EXPECT_LE(cert.stationarity[0], 1e-12);
  EXPECT_LE(cert.complementarity[0], 1e-8);
  EXPECT_EQ(cert.rank_w[0], 1);
  EXPECT_EQ(cert.rank_wb[0], 1);

  // The solver's own multipliers coincide with the analytic ones.
  ASSERT_TRUE(t.sol.duals.has_value());
  EXPECT_NEAR(t.sol.duals->lambda[0], t.analytic.lambda[0], 1e-8);
  EXPECT_LE((t.sol.duals->theta[0] - t.analytic.theta[0]).norm(), 1e-7);
}

TEST(Kkt, DoubledMultipliersAreRejected) {
  const Toy t = make_toy();
  Duals d = t.analytic;
  d.lambda[0] *= 2.0;
  d.theta[0] *= 2.0;
  const auto cert = kkt_residuals(t.p, t.sol, d);
  EXPECT_FALSE(cert.valid);
  EXPECT_GT(cert.stationarity[0], 0.5);
  EXPECT_THROW(verify_kkt(t.p, t.sol, d), CertificateFailure);
}

TEST(Kkt, SolverDualsCertifyRandomInstances) {
  const auto th = Thresholds::from_config(SystemConfig::desk());
  int certified = 0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto s = desk_scenario(seed);
    const auto p = build_r1(s, Cooperation::full(s), th);
    const auto sol = solve_r1(p);
    if (!sol.optimal()) continue;
    const auto cert = verify_kkt(p, sol, *sol.duals);
    for (double e : cert.b_min_eigenvalue) EXPECT_GT(e, 0.0);
    EXPECT_LE(cert.worst_scaled(), 1e-6);
    ++certified;
  }
  EXPECT_GT(certified, 30);
}

TEST(Kkt, RejectsMismatchedDuals) {
  const Toy t = make_toy();
  Duals d = t.analytic;
  d.lambda.push_back(0.0);
  EXPECT_THROW(kkt_residuals(t.p, t.sol, d), InvalidProblem);
}

// ---------------------------------------------------------------------------
// det(I + A) >= 1 + tr A

TEST(DetTrace, Examples) {
  auto z = det_trace_bound_check(CMat::Zero(2, 2));
  EXPECT_DOUBLE_EQ(z.det_side, 1.0);
  EXPECT_DOUBLE_EQ(z.trace_side, 1.0);
  EXPECT_DOUBLE_EQ(z.gap, 0.0);
  auto d = det_trace_bound_check(CMat::Identity(2, 2));
  EXPECT_NEAR(d.det_side, 4.0, 1e-14);
  EXPECT_NEAR(d.trace_side, 3.0, 1e-14);
  EXPECT_NEAR(d.gap, 1.0, 1e-14);
  const CVec a = gaussian(5, 1, 8).col(0);
  EXPECT_LE(std::abs(det_trace_bound_check(a * a.adjoint()).gap), 1e-12);
}

TEST(DetTrace, RejectsNonPsdInput) {
  CMat a = CMat::Identity(2, 2);
  a(1, 1) = -1.0;
  EXPECT_THROW(det_trace_bound_check(a), std::domain_error);
  CMat b = CMat::Identity(2, 2);
  b(0, 1) = 1.0;
  EXPECT_THROW(det_trace_bound_check(b), std::domain_error);
}

TEST(Dump, WritesConicForm) {
  const Toy t = make_toy();
  std::ostringstream os;
  dump_r1(t.p, os);
  EXPECT_FALSE(os.str().empty());
}
