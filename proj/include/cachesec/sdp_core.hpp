#pragma once

// Power-minimizing secure cooperative beamforming for a fixed cooperation
// plan: the semidefinite relaxation, rank-one recovery, and a KKT
// certificate checker.
//
// All SDP work happens in a normalized problem. Channels are whitened by the
// noise and rescaled by a power unit s (watts), so that
//
//   h^ = sqrt(s) h / sigma,   G^ = sqrt(s) G / sigma_e,   W = s W~.
//
// The normalized problem reads
//
//   minimize   sum_rho tr W~_rho
//   subject to sum_rho tr(L_m W~_rho) <= P / s                       (per BS)
//              tr(W~_rho H^_rho) / k_rho - sum_{r != rho} tr(W~_r H^_rho) >= 1
//              G^^H W~_rho G^ <= k_tol I
//              W~_rho >= 0, supported on the BSs cooperating for its file.
//
// Restricting W_rho to the cooperating BSs is the q = 0 case of the per-BS
// cap; with q = 1 that cap is implied by the sum-power constraint.

#include "cachesec/conic.hpp"
#include "cachesec/errors.hpp"
#include "cachesec/linalg.hpp"
#include "cachesec/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace cachesec {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Link requirements shared by all requests of a scenario.
struct Thresholds {
  double kappa_req = 0.0;        // SINR target of each legitimate receiver
  double kappa_tol = kInf;       // per-antenna SNR cap at the eavesdropper; inf disables it
  double max_tx_power_w = kInf;  // per-BS power cap; inf disables it

  static Thresholds from_config(const SystemConfig& cfg) {
    return {rate_to_sinr_threshold(cfg.qos_rate_bps, cfg.bandwidth_hz),
            rate_to_sinr_threshold(cfg.secrecy_tolerance_bps, cfg.bandwidth_hz), cfg.max_tx_power_w};
  }
};

/// Support of one request's beamformer.
struct RequestBlock {
  int request = 0;              // index into the scenario's requests
  int file_row = 0;             // row of the request's file in the cooperation plan
  std::vector<int> active_bs;   // cooperating BSs, ascending
  std::vector<int> coords;      // antenna coordinates of those BSs in the stacked vector
};

struct BeamformingProblem {
  int num_bs = 0;
  int tx_antennas = 0;
  int er_antennas = 0;
  CMat h;  // normalized channels, (M Nt) x |S|
  CMat g;  // normalized eavesdropper channel, (M Nt) x Ne
  std::vector<double> kappa_req;
  std::vector<double> kappa_tol;
  double power_cap = kInf;  // normalized per-BS cap, P / s
  double power_unit = 1.0;  // s, in watts
  std::vector<RequestBlock> blocks;
  Cooperation cooperation;

  int antenna_dim() const { return num_bs * tx_antennas; }
  int num_requests() const { return static_cast<int>(blocks.size()); }

  /// Block selector for BS m (diagonal 0/1 with tx_antennas ones).
  CMat selector(int m) const {
    CMat l = CMat::Zero(antenna_dim(), antenna_dim());
    l.diagonal().segment(m * tx_antennas, tx_antennas).setOnes();
    return l;
  }

  /// Normalized channel outer product of request rho.
  CMat channel_outer(int rho) const { return h.col(rho) * h.col(rho).adjoint(); }

  void validate() const {
    const int n = antenna_dim();
    const auto k = static_cast<Eigen::Index>(blocks.size());
    if (h.rows() != n || h.cols() != k) throw InvalidProblem("beamforming problem: channel matrix shape");
    if (g.rows() != n || g.cols() != er_antennas) throw InvalidProblem("beamforming problem: eavesdropper shape");
    if (kappa_req.size() != blocks.size() || kappa_tol.size() != blocks.size())
      throw InvalidProblem("beamforming problem: one threshold per request");
    for (const auto& b : blocks) {
      for (int c : b.coords)
        if (c < 0 || c >= n) throw InvalidProblem("beamforming problem: coordinate out of range");
      if (b.coords.size() != b.active_bs.size() * static_cast<std::size_t>(tx_antennas))
        throw InvalidProblem("beamforming problem: coordinates do not match active BSs");
    }
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      if (!(kappa_req[i] >= 0.0)) throw InvalidProblem("beamforming problem: negative SINR target");
      if (!(kappa_tol[i] > 0.0)) throw InvalidProblem("beamforming problem: eavesdropper cap must be positive");
    }
    if (!(power_unit > 0.0) || !std::isfinite(power_unit)) throw InvalidProblem("beamforming problem: power unit");
  }
};

/// Builds the relaxation for the given cooperation plan. A request is served
/// by exactly the BSs with q(file, m) = 1.
inline BeamformingProblem build_r1(const Scenario& s, const Cooperation& q, const Thresholds& t) {
  s.validate();
  if (q.num_bs() != s.num_bs || q.files() != s.requested_files())
    throw InvalidProblem("build_r1: cooperation plan does not match the scenario's requested files and BSs");
  BeamformingProblem p;
  p.num_bs = s.num_bs;
  p.tx_antennas = s.tx_antennas;
  p.er_antennas = s.er_antennas;
  p.cooperation = q;
  const int k = static_cast<int>(s.requests.size());
  double unit = 0.0;
  for (int r = 0; r < k; ++r) {
    RequestBlock b;
    b.request = r;
    b.file_row = q.row_of(s.requests[r].file);
    for (int m = 0; m < s.num_bs; ++m) {
      if (!q.get(b.file_row, m)) continue;
      b.active_bs.push_back(m);
      for (int a = 0; a < s.tx_antennas; ++a) b.coords.push_back(m * s.tx_antennas + a);
    }
    double gain = 0.0;
    for (int c : b.coords) gain += std::norm(s.channels(c, r));
    if (gain > 0.0) unit += t.kappa_req * s.noise_w / gain;
    p.blocks.push_back(std::move(b));
    p.kappa_req.push_back(t.kappa_req);
    p.kappa_tol.push_back(t.kappa_tol);
  }
  // Roughly the interference-free MRT power; keeps the normalized data O(1).
  p.power_unit = (unit > 0.0 && std::isfinite(unit)) ? unit : 1.0;
  p.h = s.channels * (std::sqrt(p.power_unit / s.noise_w));
  p.g = s.eavesdropper * (std::sqrt(p.power_unit / s.er_noise_w));
  p.power_cap = t.max_tx_power_w / p.power_unit;
  p.validate();
  return p;
}

enum class SolveStatus { optimal, infeasible, solver_failure };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::solver_failure: return "solver-failure";
  }
  return "unknown";
}

/// Lagrange multipliers of the normalized problem.
struct Duals {
  std::vector<std::vector<double>> alpha;  // per request, aligned with active_bs; C4 is implied, so zero
  std::vector<double> beta;                // per BS sum-power constraint
  std::vector<double> lambda;              // per request SINR constraint
  std::vector<CMat> phi;                   // per request eavesdropper LMI, Ne x Ne (empty if disabled)
  std::vector<CMat> theta;                 // per request PSD multiplier, on the active coordinates
};

/// Constraint report in physical units. Violations are relative and
/// clamped at zero, so 0 means satisfied.
struct ResidualReport {
  std::vector<double> sinr;
  std::vector<double> rate;              // bit/s/Hz
  std::vector<double> er_rate;           // exact log-det capacity at the eavesdropper, bit/s/Hz
  std::vector<double> bs_power_w;
  double c4 = 0.0;
  double c5 = 0.0;
  double c6 = 0.0;
  double c6_abs_w = 0.0;                 // kappa (sigma^2 + interference) - signal, watts
  double c7 = 0.0;
  double max_violation() const { return std::max({c4, c5, c6, c7}); }
};

struct BeamformingSolution {
  SolveStatus status = SolveStatus::solver_failure;
  std::vector<CMat> W;  // per request, (M Nt) x (M Nt), watts
  std::vector<CVec> w;  // principal-eigenvector recovery
  double objective_w = kInf;
  std::vector<double> rank_ratio;     // lambda_2 / lambda_1 per request
  std::vector<double> rank1_residual; // ||W - w w^H||_F / tr W
  std::optional<Duals> duals;
  ResidualReport residuals;           // relaxed constraints evaluated on W
  int iterations = 0;
  double relative_gap = kInf;
  std::string message;

  bool optimal() const { return status == SolveStatus::optimal; }
};

struct Rank1Recovery {
  std::vector<CVec> w;
  std::vector<double> ratio;
  std::vector<double> residual;
};

namespace detail {

struct Principal {
  CVec w;
  double ratio = 0.0;
  double residual = 0.0;
};

/// sqrt(lambda_1) u_1 with the largest-magnitude entry real non-negative.
inline Principal principal_component(const CMat& W) {
  Principal out;
  const Eigen::Index n = W.rows();
  out.w = CVec::Zero(n);
  if (n == 0) return out;
  Eigen::SelfAdjointEigenSolver<CMat> es(hermitian_part(W));
  const RVec& ev = es.eigenvalues();
  const double l1 = ev(n - 1);
  if (!(l1 > 0.0)) return out;
  const double l2 = n >= 2 ? std::max(ev(n - 2), 0.0) : 0.0;
  out.ratio = l2 / l1;
  CVec u = es.eigenvectors().col(n - 1);
  Eigen::Index big = 0;
  u.cwiseAbs().maxCoeff(&big);
  const cd phase = std::abs(u(big)) > 0.0 ? std::conj(u(big)) / std::abs(u(big)) : cd(1.0, 0.0);
  out.w = std::sqrt(l1) * phase * u;
  const double tr = std::real(W.trace());
  out.residual = tr > 0.0 ? (W - out.w * out.w.adjoint()).norm() / tr : 0.0;
  return out;
}

/// The relaxation is solved in extended precision: certificate residuals
/// scale with the square root of the final barrier parameter, and double
/// precision leaves too little headroom for them.
using SolverScalar = std::complex<long double>;

/// Row bookkeeping for the conic form of a problem.
struct R1Layout {
  std::vector<int> w_block;   // per request
  std::vector<int> s_block;   // per request eavesdropper slack block, -1 if none
  std::vector<int> c5_row;    // per BS, -1 if absent
  std::vector<int> c6_row;    // per request, -1 if absent
  std::vector<int> c7_row0;   // first LMI row per request, -1 if none
  int num_rows = 0;
};

inline bool has_c7(const BeamformingProblem& p, int r) {
  return std::isfinite(p.kappa_tol[r]) && p.er_antennas > 0 && !p.blocks[r].coords.empty();
}

/// Appends the conic form of the normalized problem to `prog`, with the
/// objective scaled by `weight`. Each request's PSD block has the dictionary
/// [I, h^_1..h^_K, G^] restricted to its coordinates.
template <typename S>
void append_r1(conic::Program<S>& prog, const BeamformingProblem& p, R1Layout& lay, double weight = 1.0) {
  using Mat = conic::Matrix<S>;
  const int K = p.num_requests();
  const int ne = p.er_antennas;
  lay = R1Layout{};
  lay.w_block.assign(K, -1);
  lay.s_block.assign(K, -1);
  lay.c5_row.assign(p.num_bs, -1);
  lay.c6_row.assign(K, -1);
  lay.c7_row0.assign(K, -1);

  for (int r = 0; r < K; ++r) {
    const auto& b = p.blocks[r];
    const int d = static_cast<int>(b.coords.size());
    if (d == 0) continue;
    CMat basis(d, d + K + ne);
    basis.leftCols(d).setIdentity();
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < K; ++j) basis(i, d + j) = p.h(b.coords[i], j);
      for (int e = 0; e < ne; ++e) basis(i, d + K + e) = p.g(b.coords[i], e);
    }
    lay.w_block[r] = prog.add_block(basis.cast<S>(), Mat::Identity(d, d) * S(weight));
    if (has_c7(p, r)) lay.s_block[r] = prog.add_block(Mat::Identity(ne, ne), Mat::Zero(ne, ne));
  }

  // Sum power per BS, scaled by 1/cap: sum_rho tr(L_m W~) / cap + slack = 1.
  if (std::isfinite(p.power_cap)) {
    for (int m = 0; m < p.num_bs; ++m) {
      std::vector<int> users;
      for (int r = 0; r < K; ++r) {
        const auto& ab = p.blocks[r].active_bs;
        if (std::find(ab.begin(), ab.end(), m) != ab.end()) users.push_back(r);
      }
      if (users.empty()) continue;
      const int row = prog.add_row(1.0);
      lay.c5_row[m] = row;
      prog.add_lp_coef(row, prog.add_lp(0.0), 1.0);
      for (int r : users) {
        const auto& ab = p.blocks[r].active_bs;
        const int pos = static_cast<int>(std::find(ab.begin(), ab.end(), m) - ab.begin());
        std::vector<int> cols;
        for (int a = 0; a < p.tx_antennas; ++a) cols.push_back(pos * p.tx_antennas + a);
        prog.add_block_term(row, lay.w_block[r], cols, Mat::Identity(p.tx_antennas, p.tx_antennas) / p.power_cap);
      }
    }
  }

  // SINR rows: tr(W~_r H^_r)/k_r - sum_{r' != r} tr(W~_r' H^_r) - slack = 1.
  for (int r = 0; r < K; ++r) {
    if (!(p.kappa_req[r] > 0.0)) continue;
    const int row = prog.add_row(1.0);
    lay.c6_row[r] = row;
    prog.add_lp_coef(row, prog.add_lp(0.0), -1.0);
    for (int rp = 0; rp < K; ++rp) {
      if (lay.w_block[rp] < 0) continue;
      const int col = static_cast<int>(p.blocks[rp].coords.size()) + r;
      const double coef = rp == r ? 1.0 / p.kappa_req[r] : -1.0;
      prog.add_block_term(row, lay.w_block[rp], {col}, Mat::Constant(1, 1, S(coef)));
    }
  }

  // Eavesdropper LMI, scaled by 1/k_tol: G^^H W~ G^ / k_tol + S = I, entrywise
  // over the upper triangle (diagonal, real and imaginary parts).
  for (int r = 0; r < K; ++r) {
    if (lay.s_block[r] < 0) continue;
    const int d = static_cast<int>(p.blocks[r].coords.size());
    const int g0 = d + K;
    const double inv = 1.0 / p.kappa_tol[r];
    auto add_entry = [&](double rhs, std::vector<int> idx, const CMat& coef) {
      const int row = prog.add_row(rhs);
      if (lay.c7_row0[r] < 0) lay.c7_row0[r] = row;
      std::vector<int> gcols;
      for (int i : idx) gcols.push_back(g0 + i);
      prog.add_block_term(row, lay.w_block[r], gcols, (coef * inv).cast<S>());
      prog.add_block_term(row, lay.s_block[r], idx, coef.cast<S>());
    };
    for (int k = 0; k < p.er_antennas; ++k) {
      add_entry(1.0, {k}, CMat::Ones(1, 1));
      for (int l = k + 1; l < p.er_antennas; ++l) {
        CMat re(2, 2), im(2, 2);
        re << 0.0, 0.5, 0.5, 0.0;
        im << cd(0.0, 0.0), cd(0.0, 0.5), cd(0.0, -0.5), cd(0.0, 0.0);
        add_entry(0.0, {k, l}, re);
        add_entry(0.0, {k, l}, im);
      }
    }
  }
  lay.num_rows = prog.num_rows();
}

template <typename S>
conic::Program<S> to_conic(const BeamformingProblem& p, R1Layout& lay) {
  conic::Program<S> prog;
  append_r1(prog, p, lay);
  return prog;
}

/// Assembles the Hermitian matrix sum_i y_i E_i from the LMI multipliers of
/// one request (inverse of the entry parameterization above).
inline CMat lmi_multiplier(const Eigen::VectorXd& y, int row0, int ne) {
  CMat out = CMat::Zero(ne, ne);
  int row = row0;
  for (int k = 0; k < ne; ++k) {
    out(k, k) += y(row++);
    for (int l = k + 1; l < ne; ++l) {
      const double yr = y(row++);
      const double yi = y(row++);
      out(k, l) += 0.5 * yr + cd(0.0, 0.5) * yi;
      out(l, k) += 0.5 * yr - cd(0.0, 0.5) * yi;
    }
  }
  return out;
}

inline CMat embed(const CMat& local, const std::vector<int>& coords, int n) {
  CMat out = CMat::Zero(n, n);
  for (std::size_t i = 0; i < coords.size(); ++i)
    for (std::size_t j = 0; j < coords.size(); ++j) out(coords[i], coords[j]) = local(i, j);
  return out;
}

/// Relaxed constraints evaluated on lifted matrices W (physical units).
inline ResidualReport relaxed_residuals(const Scenario& s, const Cooperation& q, const std::vector<CMat>& W,
                                        const Thresholds& t) {
  ResidualReport rep;
  const int K = static_cast<int>(W.size());
  const int nt = s.tx_antennas;
  rep.bs_power_w.assign(s.num_bs, 0.0);
  for (int r = 0; r < K; ++r) {
    const int row = q.row_of(s.requests[r].file);
    for (int m = 0; m < s.num_bs; ++m) {
      const double pm = std::real(W[r].block(m * nt, m * nt, nt, nt).trace());
      rep.bs_power_w[m] += pm;
      const double cap = q.get(row, m) ? t.max_tx_power_w : 0.0;
      const double scale = std::isfinite(t.max_tx_power_w) ? t.max_tx_power_w : std::max(1.0, std::real(W[r].trace()));
      if (std::isfinite(cap) || !q.get(row, m)) rep.c4 = std::max(rep.c4, std::max(0.0, pm - (q.get(row, m) ? cap : 0.0)) / scale);
    }
  }
  if (std::isfinite(t.max_tx_power_w))
    for (double pm : rep.bs_power_w) rep.c5 = std::max(rep.c5, std::max(0.0, pm - t.max_tx_power_w) / t.max_tx_power_w);
  for (int r = 0; r < K; ++r) {
    const CVec hr = s.channels.col(r);
    const double sig = std::real(hr.dot(W[r] * hr));
    double interf = 0.0;
    for (int rp = 0; rp < K; ++rp)
      if (rp != r) interf += std::real(hr.dot(W[rp] * hr));
    const double sinr = sig / (s.noise_w + interf);
    rep.sinr.push_back(sinr);
    rep.rate.push_back(std::log2(1.0 + std::max(sinr, 0.0)));
    const double need = t.kappa_req * (s.noise_w + interf);
    rep.c6_abs_w = std::max(rep.c6_abs_w, need - sig);
    if (need > 0.0) rep.c6 = std::max(rep.c6, std::max(0.0, need - sig) / need);
    const CMat ge = s.eavesdropper.adjoint() * W[r] * s.eavesdropper / s.er_noise_w;
    rep.er_rate.push_back(log2_det_identity_plus(ge));
    if (std::isfinite(t.kappa_tol)) {
      // Relaxed LMI: largest eigenvalue against the per-antenna cap.
      const double top = max_eigenvalue(ge);
      rep.c7 = std::max(rep.c7, std::max(0.0, top - t.kappa_tol) / t.kappa_tol);
    }
  }
  rep.c6_abs_w = std::max(rep.c6_abs_w, 0.0);
  return rep;
}

}  // namespace detail

struct R1Options {
  // Extended precision roughly quadruples the cost; plain double still gives
  // objectives to about 1e-9 relative but weaker certificates.
  bool extended_precision = true;
  conic::Options solver = default_solver_options();

  static conic::Options default_solver_options() {
    conic::Options o;
    o.feasibility_tol = 1e-14;
    o.gap_tol = 1e-14;
    // Typical scale of normalized solutions: traces of a few units, SINR
    // multipliers of tens.
    o.initial_primal_scale = 5.0;
    o.initial_dual_scale = 50.0;
    return o;
  }
  static R1Options fast() {
    R1Options o;
    o.extended_precision = false;
    o.solver.feasibility_tol = 1e-11;
    o.solver.gap_tol = 1e-11;
    return o;
  }
};

namespace detail {

/// Runs the conic solver and converts the result to double precision.
template <typename S>
conic::Result<cd> solve_conic(const BeamformingProblem& p, R1Layout& lay, const conic::Options& opt) {
  const auto prog = to_conic<S>(p, lay);
  if (prog.num_rows() == 0) {
    conic::Result<cd> out;
    out.status = conic::Status::optimal;
    return out;
  }
  const auto r = conic::solve(prog, opt);
  conic::Result<cd> out;
  out.status = r.status;
  out.iterations = r.iterations;
  out.message = r.message;
  out.relative_gap = static_cast<double>(r.relative_gap);
  out.y = r.y.template cast<double>();
  out.x.lp = r.x.lp.template cast<double>();
  out.z.lp = r.z.lp.template cast<double>();
  for (const auto& b : r.x.psd) out.x.psd.push_back(b.template cast<cd>());
  for (const auto& b : r.z.psd) out.z.psd.push_back(b.template cast<cd>());
  return out;
}

}  // namespace detail

/// Solves the relaxation. Never returns a violating point as optimal.
inline BeamformingSolution solve_r1(const BeamformingProblem& p, const R1Options& options = {}) {
  p.validate();
  BeamformingSolution sol;
  const int K = p.num_requests();
  const int n = p.antenna_dim();
  for (int r = 0; r < K; ++r) {
    if (p.blocks[r].coords.empty() && p.kappa_req[r] > 0.0) {
      sol.status = SolveStatus::infeasible;
      sol.message = "request has no cooperating BS";
      return sol;
    }
  }

  detail::R1Layout lay;
  const auto res = options.extended_precision ? detail::solve_conic<detail::SolverScalar>(p, lay, options.solver)
                                              : detail::solve_conic<cd>(p, lay, options.solver);
  Duals duals;
  duals.beta.assign(p.num_bs, 0.0);
  duals.lambda.assign(K, 0.0);
  duals.alpha.resize(K);
  duals.phi.resize(K);
  duals.theta.resize(K);
  for (int r = 0; r < K; ++r) duals.alpha[r].assign(p.blocks[r].active_bs.size(), 0.0);

  if (lay.num_rows == 0) {
    // No binding requirement: W = 0 is optimal.
    sol.status = SolveStatus::optimal;
    sol.objective_w = 0.0;
    sol.relative_gap = 0.0;
    for (int r = 0; r < K; ++r) {
      sol.W.push_back(CMat::Zero(n, n));
      const auto d = static_cast<Eigen::Index>(p.blocks[r].coords.size());
      duals.theta[r] = CMat::Identity(d, d);
      if (detail::has_c7(p, r)) duals.phi[r] = CMat::Zero(p.er_antennas, p.er_antennas);
    }
    sol.duals = std::move(duals);
    sol.message = "no active constraints";
  } else {
    sol.iterations = res.iterations;
    sol.message = res.message;
    if (res.status == conic::Status::primal_infeasible) {
      sol.status = SolveStatus::infeasible;
      return sol;
    }
    if (res.status != conic::Status::optimal) {
      sol.status = SolveStatus::solver_failure;
      return sol;
    }
    sol.relative_gap = res.relative_gap;
    const Eigen::VectorXd& y = res.y;
    double obj = 0.0;
    for (int r = 0; r < K; ++r) {
      if (lay.w_block[r] < 0) {
        sol.W.push_back(CMat::Zero(n, n));
        duals.theta[r] = CMat::Zero(0, 0);
        continue;
      }
      const CMat& xw = res.x.psd[lay.w_block[r]];
      obj += std::real(xw.trace());
      sol.W.push_back(detail::embed(xw * p.power_unit, p.blocks[r].coords, n));
      duals.theta[r] = res.z.psd[lay.w_block[r]];
      if (lay.c6_row[r] >= 0) duals.lambda[r] = y(lay.c6_row[r]);
      if (lay.s_block[r] >= 0)
        duals.phi[r] = -detail::lmi_multiplier(y, lay.c7_row0[r], p.er_antennas) / p.kappa_tol[r];
    }
    for (int m = 0; m < p.num_bs; ++m)
      if (lay.c5_row[m] >= 0) duals.beta[m] = -y(lay.c5_row[m]) / p.power_cap;
    sol.objective_w = obj * p.power_unit;
    sol.duals = std::move(duals);
    if (std::isfinite(p.power_cap) && sol.objective_w > p.num_bs * p.power_cap * p.power_unit + 1.0) {
      sol.status = SolveStatus::infeasible;
      sol.message = "objective exceeds total power budget";
      return sol;
    }
    sol.status = SolveStatus::optimal;
  }
  for (const auto& W : sol.W) {
    const auto pc = detail::principal_component(W);
    sol.w.push_back(pc.w);
    sol.rank_ratio.push_back(pc.ratio);
    sol.rank1_residual.push_back(pc.residual);
  }
  return sol;
}

/// Writes the conic form of the normalized problem in the solver's text
/// triplet format, for cross-checking against another backend.
inline void dump_r1(const BeamformingProblem& p, std::ostream& os) {
  detail::R1Layout lay;
  detail::to_conic<cd>(p, lay).dump(os);
}

/// Principal-eigenvector beamformers. Throws CertificateFailure if any W is
/// not numerically rank one (ratio above 1e-4).
inline Rank1Recovery extract_rank1(const BeamformingSolution& sol, double max_ratio = 1e-4) {
  if (!sol.optimal()) throw InvalidProblem("extract_rank1: solution is not optimal");
  Rank1Recovery out;
  for (std::size_t r = 0; r < sol.W.size(); ++r) {
    const auto pc = detail::principal_component(sol.W[r]);
    if (pc.ratio > max_ratio)
      throw CertificateFailure("extract_rank1: request " + std::to_string(r) + " has eigenvalue ratio " +
                               std::to_string(pc.ratio));
    out.w.push_back(pc.w);
    out.ratio.push_back(pc.ratio);
    out.residual.push_back(pc.residual);
  }
  return out;
}

/// Overload for a single matrix.
inline CVec extract_rank1(const CMat& W, double max_ratio = 1e-4) {
  const auto pc = detail::principal_component(W);
  if (pc.ratio > max_ratio) throw CertificateFailure("extract_rank1: matrix is not rank one");
  return pc.w;
}

/// Rate, secrecy and power report for recovered beamformers. C6 and C7 are
/// checked in their original form (SINR and exact log-det capacity).
inline ResidualReport verify_solution(const Scenario& s, const Cooperation& q, const std::vector<CVec>& w,
                                      const Thresholds& t) {
  if (w.size() != s.requests.size()) throw InvalidProblem("verify_solution: one beamformer per request");
  std::vector<CMat> W;
  for (const auto& v : w) W.push_back(v * v.adjoint());
  auto rep = detail::relaxed_residuals(s, q, W, t);
  rep.c7 = 0.0;
  if (std::isfinite(t.kappa_tol)) {
    const double tol_rate = std::log2(1.0 + t.kappa_tol);
    for (double re : rep.er_rate) rep.c7 = std::max(rep.c7, std::max(0.0, re - tol_rate) / tol_rate);
  }
  return rep;
}

/// Evaluates the relaxed constraints on the solution's lifted matrices.
inline ResidualReport relaxed_residuals(const Scenario& s, const BeamformingProblem& p, const BeamformingSolution& sol,
                                        const Thresholds& t) {
  return detail::relaxed_residuals(s, p.cooperation, sol.W, t);
}

// ---------------------------------------------------------------------------
// KKT certificate

/// Optimality certificate of the normalized problem. For each request,
///   B = I + sum_m (alpha_m + beta_m) L_m + G^ Phi G^^H + sum_{r != rho} lambda_r H^_r,
/// and stationarity reads B - (lambda / kappa) H^ = Theta. Since B > 0 and
/// W Theta = 0, rank W = rank(W B) <= rank H^ = 1.
struct KKTCertificate {
  std::vector<CMat> B;
  std::vector<double> stationarity;     // ||B - (lambda/kappa) H - Theta||_F
  std::vector<double> complementarity;  // ||W~ Theta||_F
  std::vector<double> b_min_eigenvalue;
  std::vector<double> b_norm;
  std::vector<int> rank_w;
  std::vector<int> rank_wb;
  double dual_feasibility = 0.0;        // largest sign or PSD violation of the multipliers
  double slackness = 0.0;               // largest |multiplier x constraint slack|
  bool rank_chain = true;
  bool valid = false;
  std::string reason;

  /// Largest residual divided by (1 + ||B||).
  double worst_scaled() const {
    double out = 0.0;
    for (std::size_t r = 0; r < B.size(); ++r) {
      const double s = 1.0 + b_norm[r];
      out = std::max({out, stationarity[r] / s, complementarity[r] / s});
    }
    return std::max({out, dual_feasibility, slackness});
  }
};

namespace detail {

inline int numerical_rank(const CMat& a, double rel = 1e-6) {
  if (a.size() == 0) return 0;
  Eigen::JacobiSVD<CMat> svd(a);
  const RVec& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) <= 0.0) return 0;
  int r = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > rel * sv(0)) ++r;
  return r;
}

}  // namespace detail

/// Computes all residuals without throwing.
inline KKTCertificate kkt_residuals(const BeamformingProblem& p, const BeamformingSolution& sol, const Duals& d,
                                    double tol = 1e-6) {
  KKTCertificate cert;
  const int K = p.num_requests();
  if (static_cast<int>(sol.W.size()) != K || static_cast<int>(d.lambda.size()) != K ||
      static_cast<int>(d.theta.size()) != K || static_cast<int>(d.beta.size()) != p.num_bs)
    throw InvalidProblem("kkt_residuals: dimensions of duals and solution do not match the problem");

  auto neg = [](double v) { return std::max(0.0, -v); };
  double feas = 0.0;
  for (double b : d.beta) feas = std::max(feas, neg(b));
  for (double l : d.lambda) feas = std::max(feas, neg(l));
  for (const auto& a : d.alpha)
    for (double v : a) feas = std::max(feas, neg(v));

  // Normalized lifted matrices on their supports.
  std::vector<CMat> Wn(K);
  for (int r = 0; r < K; ++r) {
    const auto& c = p.blocks[r].coords;
    const Eigen::Index dim = static_cast<Eigen::Index>(c.size());
    Wn[r] = CMat(dim, dim);
    for (Eigen::Index i = 0; i < dim; ++i)
      for (Eigen::Index j = 0; j < dim; ++j) Wn[r](i, j) = sol.W[r](c[i], c[j]) / p.power_unit;
  }

  double slack = 0.0;
  double max_b = 0.0;
  for (int r = 0; r < K; ++r) {
    const auto& blk = p.blocks[r];
    const auto& c = blk.coords;
    const Eigen::Index dim = static_cast<Eigen::Index>(c.size());
    const CMat hl = p.h(c, Eigen::all);
    const CMat gl = p.g(c, Eigen::all);
    CMat B = CMat::Identity(dim, dim);
    for (std::size_t i = 0; i < blk.active_bs.size(); ++i) {
      const int m = blk.active_bs[i];
      const double a = d.alpha.size() == static_cast<std::size_t>(K) && i < d.alpha[r].size() ? d.alpha[r][i] : 0.0;
      for (int t = 0; t < p.tx_antennas; ++t) {
        const auto idx = static_cast<Eigen::Index>(i) * p.tx_antennas + t;
        B(idx, idx) += a + d.beta[m];
      }
    }
    if (r < static_cast<int>(d.phi.size()) && d.phi[r].size() > 0) {
      B += gl * d.phi[r] * gl.adjoint();
      feas = std::max(feas, neg(min_eigenvalue(d.phi[r])));
    }
    for (int rp = 0; rp < K; ++rp)
      if (rp != r) B += d.lambda[rp] * hl.col(rp) * hl.col(rp).adjoint();
    B = hermitian_part(B);
    const double lk = p.kappa_req[r] > 0.0 ? d.lambda[r] / p.kappa_req[r] : 0.0;
    const CMat theta = d.theta[r].size() == dim * dim ? d.theta[r] : CMat::Zero(dim, dim);
    const CMat stat = B - lk * hl.col(r) * hl.col(r).adjoint() - theta;
    if (dim > 0) feas = std::max(feas, neg(min_eigenvalue(theta)) / (1.0 + B.norm()));
    cert.stationarity.push_back(stat.norm());
    cert.complementarity.push_back((Wn[r] * theta).norm());
    cert.b_min_eigenvalue.push_back(dim > 0 ? min_eigenvalue(B) : 1.0);
    cert.b_norm.push_back(B.norm());
    max_b = std::max(max_b, B.norm());
    const int rw = detail::numerical_rank(Wn[r]);
    const int rwb = detail::numerical_rank(Wn[r] * B);
    cert.rank_w.push_back(rw);
    cert.rank_wb.push_back(rwb);
    if (rw != rwb || rw > 1) cert.rank_chain = false;
    cert.B.push_back(std::move(B));

    // Scalar complementary slackness of the SINR and eavesdropper constraints.
    if (p.kappa_req[r] > 0.0) {
      double lhs = p.kappa_req[r] > 0.0 ? std::real(hl.col(r).dot(Wn[r] * hl.col(r))) / p.kappa_req[r] : 0.0;
      for (int rp = 0; rp < K; ++rp) {
        if (rp == r) continue;
        const CVec hr = p.h(p.blocks[rp].coords, r);
        lhs -= std::real(hr.dot(Wn[rp] * hr));
      }
      slack = std::max(slack, std::abs(d.lambda[r] * (lhs - 1.0)));
    }
    if (r < static_cast<int>(d.phi.size()) && d.phi[r].size() > 0) {
      const CMat s = p.kappa_tol[r] * CMat::Identity(p.er_antennas, p.er_antennas) - gl.adjoint() * Wn[r] * gl;
      slack = std::max(slack, (d.phi[r] * s).norm() / (1.0 + max_b));
    }
  }
  if (std::isfinite(p.power_cap)) {
    for (int m = 0; m < p.num_bs; ++m) {
      double used = 0.0;
      for (int r = 0; r < K; ++r) {
        const auto& ab = p.blocks[r].active_bs;
        const auto it = std::find(ab.begin(), ab.end(), m);
        if (it == ab.end()) continue;
        const auto pos = static_cast<Eigen::Index>(it - ab.begin()) * p.tx_antennas;
        used += std::real(Wn[r].block(pos, pos, p.tx_antennas, p.tx_antennas).trace());
      }
      slack = std::max(slack, std::abs(d.beta[m] * (p.power_cap - used)) / (1.0 + p.power_cap));
    }
  }
  cert.dual_feasibility = feas;
  cert.slackness = slack;

  cert.valid = true;
  auto fail = [&](const std::string& why) {
    if (cert.valid) cert.reason = why;
    cert.valid = false;
  };
  for (int r = 0; r < K; ++r) {
    const double s = 1.0 + cert.b_norm[r];
    if (cert.stationarity[r] > tol * s) fail("stationarity residual of request " + std::to_string(r));
    if (cert.complementarity[r] > tol * s) fail("complementary slackness of request " + std::to_string(r));
    if (!(cert.b_min_eigenvalue[r] > 0.0)) fail("B is not positive definite for request " + std::to_string(r));
  }
  if (cert.dual_feasibility > tol) fail("dual feasibility");
  if (cert.slackness > tol) fail("scalar complementary slackness");
  if (!cert.rank_chain) fail("rank chain");
  return cert;
}

/// Throws CertificateFailure when any residual exceeds tol (1 + ||B||).
inline KKTCertificate verify_kkt(const BeamformingProblem& p, const BeamformingSolution& sol, const Duals& d,
                                 double tol = 1e-6) {
  auto cert = kkt_residuals(p, sol, d, tol);
  if (!cert.valid) throw CertificateFailure("KKT certificate rejected: " + cert.reason);
  return cert;
}

// ---------------------------------------------------------------------------
// Determinant bound

struct DetTraceBound {
  double det_side = 1.0;    // det(I + A)
  double trace_side = 1.0;  // 1 + tr A
  double gap = 0.0;         // det_side - trace_side
};

/// det(I + A) against 1 + tr(A) for Hermitian PSD A. The gap is the sum of
/// the elementary symmetric polynomials of order >= 2 of the eigenvalues
/// rather than a difference of the two sides, which would cancel badly.
inline DetTraceBound det_trace_bound_check(const CMat& a) {
  if (a.rows() != a.cols()) throw std::domain_error("det_trace_bound_check: matrix must be square");
  DetTraceBound out;
  if (a.rows() == 0) return out;
  const double scale = std::max(1.0, a.norm());
  if (hermitian_defect(a) > 1e-12 * scale) throw std::domain_error("det_trace_bound_check: matrix is not Hermitian");
  RVec ev = hermitian_eigenvalues(a);
  if (ev(0) < -1e-12 * scale) throw std::domain_error("det_trace_bound_check: matrix is not PSD");
  const double top = ev(ev.size() - 1);
  // Eigenvalues at rounding level are zero for rank purposes.
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (ev(i) < 4.0 * ev.size() * std::numeric_limits<double>::epsilon() * std::max(top, 0.0)) ev(i) = 0.0;
  // e[j] holds the elementary symmetric polynomial of order j.
  std::vector<double> e(ev.size() + 1, 0.0);
  e[0] = 1.0;
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    for (Eigen::Index j = i + 1; j >= 1; --j) e[j] += ev(i) * e[j - 1];
  double higher = 0.0;
  for (std::size_t j = 2; j < e.size(); ++j) higher += e[j];
  out.trace_side = 1.0 + std::real(a.trace());
  out.gap = higher;
  out.det_side = 1.0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) out.det_side *= 1.0 + ev(i);
  return out;
}

}  // namespace cachesec
