#pragma once

// Primal-dual interior-point solver for linear conic programs over the
// product of a nonnegative orthant and Hermitian (or real symmetric) PSD
// blocks:
//
//   minimize   <C, X>
//   subject to <A_i, X> = b_i,  i = 1..m,   X in K
//
// The dual is   maximize b'y  s.t.  sum_i y_i A_i + Z = C,  Z in K.
//
// Every A_i restricted to a PSD block is given in factored form
// V_S D V_S^H, where V is a per-block column dictionary and S selects a
// few of its columns. Beamforming constraints are all of this shape
// (selectors, rank-one channel outer products, eavesdropper Gram entries),
// which keeps the Schur complement cheap to assemble.
//
// The iteration runs on the homogeneous self-dual embedding so primal
// infeasibility comes back as a Farkas ray instead of a stalled solve.
// Search direction is HKM with a Mehrotra predictor-corrector.

#include "cachesec/linalg.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <iostream>
#include <limits>
#include <ostream>
#include <sstream>
#include <type_traits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cachesec::conic {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using RealOf = typename Eigen::NumTraits<Scalar>::Real;

template <typename Scalar>
using RVectorOf = Eigen::Matrix<RealOf<Scalar>, Eigen::Dynamic, 1>;

template <typename Scalar>
using RMatrixOf = Eigen::Matrix<RealOf<Scalar>, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
struct PsdBlock {
  Matrix<Scalar> basis;  // dim x R column dictionary
  Matrix<Scalar> cost;   // dim x dim, Hermitian
  int dim() const { return static_cast<int>(basis.rows()); }
};

/// Contribution <V_S coef V_S^H, X_block> of one row on one PSD block.
template <typename Scalar>
struct BlockTerm {
  int block = 0;
  std::vector<int> cols;
  Matrix<Scalar> coef;
};

template <typename Scalar>
struct Row {
  using Real = RealOf<Scalar>;
  using RVector = RVectorOf<Scalar>;
  using RMatrix = RMatrixOf<Scalar>;
  Real rhs = 0.0;
  std::vector<std::pair<int, Real>> lp;
  std::vector<BlockTerm<Scalar>> psd;
};

template <typename Scalar>
class Program {
 public:
  using Real = RealOf<Scalar>;
  using RVector = RVectorOf<Scalar>;
  using RMatrix = RMatrixOf<Scalar>;
  int add_lp(Real cost = 0.0) {
    lp_cost_.push_back(cost);
    return static_cast<int>(lp_cost_.size()) - 1;
  }

  int add_block(Matrix<Scalar> basis, Matrix<Scalar> cost) {
    if (cost.rows() != basis.rows() || cost.cols() != basis.rows()) {
      throw std::invalid_argument("PSD block cost must be dim x dim");
    }
    blocks_.push_back({std::move(basis), std::move(cost)});
    return static_cast<int>(blocks_.size()) - 1;
  }

  int add_row(Real rhs) {
    rows_.push_back(Row<Scalar>{rhs, {}, {}});
    return static_cast<int>(rows_.size()) - 1;
  }

  void add_lp_coef(int row, int var, Real coef) {
    check_row(row);
    if (var < 0 || var >= num_lp()) throw std::out_of_range("LP variable index");
    for (auto& [k, a] : rows_[row].lp) {
      if (k == var) {
        a += coef;
        return;
      }
    }
    rows_[row].lp.emplace_back(var, coef);
  }

  void add_block_term(int row, int block, std::vector<int> cols, Matrix<Scalar> coef) {
    check_row(row);
    if (block < 0 || block >= num_blocks()) throw std::out_of_range("PSD block index");
    const auto r = blocks_[block].basis.cols();
    for (int c : cols) {
      if (c < 0 || c >= r) throw std::out_of_range("basis column index");
    }
    if (coef.rows() != static_cast<Eigen::Index>(cols.size()) || coef.cols() != coef.rows()) {
      throw std::invalid_argument("block term coefficient must be |cols| x |cols|");
    }
    for (const auto& t : rows_[row].psd) {
      if (t.block == block) throw std::invalid_argument("duplicate block term in one row");
    }
    rows_[row].psd.push_back({block, std::move(cols), std::move(coef)});
  }

  /// Multiplies row `row` (coefficients and right-hand side) by `factor`.
  void scale_row(int row, Real factor) {
    check_row(row);
    auto& r = rows_[row];
    r.rhs *= factor;
    for (auto& [k, a] : r.lp) a *= factor;
    for (auto& t : r.psd) t.coef *= factor;
  }

  /// Frobenius norm of the row's coefficient matrix over the whole cone.
  Real row_norm(int row) const {
    check_row(row);
    Real s = 0.0;
    for (const auto& [k, a] : rows_[row].lp) s += a * a;
    for (const auto& t : rows_[row].psd) {
      const Matrix<Scalar> v = blocks_[t.block].basis(Eigen::all, t.cols);
      s += (v * t.coef * v.adjoint()).squaredNorm();
    }
    return std::sqrt(s);
  }

  int num_lp() const { return static_cast<int>(lp_cost_.size()); }
  int num_blocks() const { return static_cast<int>(blocks_.size()); }
  int num_rows() const { return static_cast<int>(rows_.size()); }
  const std::vector<Real>& lp_cost() const { return lp_cost_; }
  const std::vector<PsdBlock<Scalar>>& blocks() const { return blocks_; }
  const std::vector<Row<Scalar>>& rows() const { return rows_; }

  /// Barrier parameter denominator: total cone degree.
  int cone_degree() const {
    int nu = num_lp();
    for (const auto& b : blocks_) nu += b.dim();
    return nu;
  }

  /// Self-describing text form: dimensions, cone list, sparse triplets.
  void dump(std::ostream& os) const {
    os.precision(17);
    os << "conic-program v1\n";
    os << "scalar " << (is_complex() ? "complex" : "real") << "\n";
    os << "rows " << num_rows() << "\n";
    os << "lp " << num_lp() << "\n";
    os << "psd " << num_blocks();
    for (const auto& b : blocks_) os << ' ' << b.dim();
    os << "\n";
    for (int k = 0; k < num_lp(); ++k) {
      if (lp_cost_[k] != 0.0) os << "c lp " << k << ' ' << lp_cost_[k] << "\n";
    }
    for (int b = 0; b < num_blocks(); ++b) {
      const auto& blk = blocks_[b];
      for (int i = 0; i < blk.dim(); ++i)
        for (int j = i; j < blk.dim(); ++j)
          if (blk.cost(i, j) != Scalar(0)) os << "c psd " << b << ' ' << i << ' ' << j << ' ' << fmt(blk.cost(i, j)) << "\n";
      for (int i = 0; i < blk.dim(); ++i)
        for (int j = 0; j < blk.basis.cols(); ++j)
          if (blk.basis(i, j) != Scalar(0)) os << "v " << b << ' ' << i << ' ' << j << ' ' << fmt(blk.basis(i, j)) << "\n";
    }
    for (int r = 0; r < num_rows(); ++r) {
      const auto& row = rows_[r];
      os << "b " << r << ' ' << row.rhs << "\n";
      for (const auto& [k, a] : row.lp) os << "a lp " << r << ' ' << k << ' ' << a << "\n";
      for (const auto& t : row.psd) {
        for (std::size_t i = 0; i < t.cols.size(); ++i)
          for (std::size_t j = 0; j < t.cols.size(); ++j)
            if (t.coef(i, j) != Scalar(0))
              os << "a psd " << r << ' ' << t.block << ' ' << t.cols[i] << ' ' << t.cols[j] << ' ' << fmt(t.coef(i, j)) << "\n";
      }
    }
  }

 private:
  static constexpr bool is_complex() { return Eigen::NumTraits<Scalar>::IsComplex; }
  static std::string fmt(const Scalar& s) {
    std::ostringstream o;
    o.precision(17);
    if constexpr (!Eigen::NumTraits<Scalar>::IsComplex) {
      o << s;
    } else {
      o << s.real() << ' ' << s.imag();
    }
    return o.str();
  }
  void check_row(int row) const {
    if (row < 0 || row >= num_rows()) throw std::out_of_range("row index");
  }

  std::vector<Real> lp_cost_;
  std::vector<PsdBlock<Scalar>> blocks_;
  std::vector<Row<Scalar>> rows_;
};

/// Element of the cone K (or of its ambient space).
template <typename Scalar>
struct ConeVector {
  using Real = RealOf<Scalar>;
  using RVector = RVectorOf<Scalar>;
  using RMatrix = RMatrixOf<Scalar>;
  RVector lp;
  std::vector<Matrix<Scalar>> psd;

  static ConeVector zeros_like(const Program<Scalar>& p) {
    ConeVector v;
    v.lp = RVector::Zero(p.num_lp());
    for (const auto& b : p.blocks()) v.psd.push_back(Matrix<Scalar>::Zero(b.dim(), b.dim()));
    return v;
  }
  static ConeVector identity_like(const Program<Scalar>& p) {
    ConeVector v;
    v.lp = RVector::Ones(p.num_lp());
    for (const auto& b : p.blocks()) v.psd.push_back(Matrix<Scalar>::Identity(b.dim(), b.dim()));
    return v;
  }
  void axpy(Real a, const ConeVector& x) {
    lp += a * x.lp;
    for (std::size_t b = 0; b < psd.size(); ++b) psd[b] += a * x.psd[b];
  }
  void scale(Real a) {
    lp *= a;
    for (auto& m : psd) m *= a;
  }
  Real squared_norm() const {
    Real s = lp.squaredNorm();
    for (const auto& m : psd) s += m.squaredNorm();
    return s;
  }
  Real norm() const { return std::sqrt(squared_norm()); }
};

template <typename Scalar>
RealOf<Scalar> inner(const ConeVector<Scalar>& a, const ConeVector<Scalar>& b) {
  using Real = RealOf<Scalar>;
  Real s = a.lp.dot(b.lp);
  for (std::size_t k = 0; k < a.psd.size(); ++k) s += std::real((a.psd[k].conjugate().cwiseProduct(b.psd[k])).sum());
  return s;
}

enum class Status { optimal, primal_infeasible, dual_infeasible, failure };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::optimal: return "optimal";
    case Status::primal_infeasible: return "primal-infeasible";
    case Status::dual_infeasible: return "dual-infeasible";
    case Status::failure: return "failure";
  }
  return "unknown";
}

struct Options {
  double feasibility_tol = 1e-12;
  double gap_tol = 1e-12;
  // Accepted as optimal when progress stalls before the targets above.
  double acceptable_feasibility = 1e-8;
  double acceptable_gap = 1e-7;
  double infeasibility_tol = 1e-9;
  int max_iterations = 120;
  double step_fraction = 0.98;
  double initial_primal_scale = 1.0;  // X0 = xi I
  double initial_dual_scale = 1.0;    // Z0 = eta I
  bool verbose = false;  // per-iteration trace on std::clog
};

template <typename Scalar>
struct Result {
  using Real = RealOf<Scalar>;
  using RVector = RVectorOf<Scalar>;
  using RMatrix = RMatrixOf<Scalar>;
  Status status = Status::failure;
  ConeVector<Scalar> x;  // primal point (already divided by tau)
  RVector y;     // equality multipliers
  ConeVector<Scalar> z;  // dual slack
  Real primal_objective = std::numeric_limits<Real>::quiet_NaN();
  Real dual_objective = std::numeric_limits<Real>::quiet_NaN();
  Real primal_residual = std::numeric_limits<Real>::infinity();
  Real dual_residual = std::numeric_limits<Real>::infinity();
  Real relative_gap = std::numeric_limits<Real>::infinity();
  int iterations = 0;
  std::string message;
};

namespace detail {

template <typename Scalar>
class Workspace {
 public:
  using Real = RealOf<Scalar>;
  using RVector = RVectorOf<Scalar>;
  using RMatrix = RMatrixOf<Scalar>;
  using Mat = Matrix<Scalar>;
  using Cone = ConeVector<Scalar>;

  explicit Workspace(const Program<Scalar>& p) : p_(p) {
    m_ = p.num_rows();
    b_.resize(m_);
    lp_cols_.assign(p.num_lp(), {});
    block_rows_.assign(p.num_blocks(), {});
    for (int i = 0; i < m_; ++i) {
      const auto& row = p.rows()[i];
      b_(i) = row.rhs;
      for (const auto& [k, a] : row.lp) lp_cols_[k].emplace_back(i, a);
      for (const auto& t : row.psd) block_rows_[t.block].push_back({i, &t});
    }
    cost_ = Cone::zeros_like(p);
    for (int k = 0; k < p.num_lp(); ++k) cost_.lp(k) = p.lp_cost()[k];
    for (int b = 0; b < p.num_blocks(); ++b) cost_.psd[b] = hermitian_part(p.blocks()[b].cost);
    // Split each basis as [I | E] when it starts with an identity, so the
    // congruences below cost O(n^2 |E|) instead of full products.
    ident_.assign(p.num_blocks(), 0);
    extra_.resize(p.num_blocks());
    for (int b = 0; b < p.num_blocks(); ++b) {
      const Mat& v = p.blocks()[b].basis;
      const auto n = v.rows();
      if (v.cols() >= n && v.leftCols(n) == Mat::Identity(n, n)) ident_[b] = static_cast<int>(n);
      extra_[b] = v.rightCols(v.cols() - ident_[b]);
    }
  }

  int m() const { return m_; }
  const RVector& b() const { return b_; }
  const Cone& cost() const { return cost_; }

  /// A(Y) for any element of the ambient space (Hermitian part is used).
  RVector apply_a(const Cone& v) const {
    RVector out = RVector::Zero(m_);
    for (int k = 0; k < p_.num_lp(); ++k) {
      if (v.lp(k) == 0.0) continue;
      for (const auto& [i, a] : lp_cols_[k]) out(i) += a * v.lp(k);
    }
    for (int blk = 0; blk < p_.num_blocks(); ++blk) {
      if (block_rows_[blk].empty()) continue;
      const Mat k = congruence(blk, v.psd[blk]);
      for (const auto& [i, t] : block_rows_[blk]) out(i) += trace_product(t->coef, k(t->cols, t->cols));
    }
    return out;
  }

  Cone apply_at(const RVector& y) const {
    Cone out = Cone::zeros_like(p_);
    for (int k = 0; k < p_.num_lp(); ++k) {
      Real s = 0.0;
      for (const auto& [i, a] : lp_cols_[k]) s += a * y(i);
      out.lp(k) = s;
    }
    for (int blk = 0; blk < p_.num_blocks(); ++blk) {
      if (block_rows_[blk].empty()) continue;
      const auto r = p_.blocks()[blk].basis.cols();
      Mat t = Mat::Zero(r, r);
      for (const auto& [i, term] : block_rows_[blk]) {
        if (y(i) == 0.0) continue;
        t(term->cols, term->cols) += y(i) * term->coef;
      }
      out.psd[blk] = hermitian_part(expand(blk, t));
    }
    return out;
  }

  /// Prepares per-iteration quantities at (X, Z).
  bool prepare(const Cone& x, const Cone& z) {
    x_ = &x;
    zinv_.resize(p_.num_blocks());
    for (int blk = 0; blk < p_.num_blocks(); ++blk) {
      Eigen::LLT<Mat> llt(z.psd[blk]);
      if (llt.info() != Eigen::Success) return false;
      zinv_[blk] = hermitian_part(llt.solve(Mat::Identity(z.psd[blk].rows(), z.psd[blk].cols())));
    }
    d_lp_ = x.lp.cwiseQuotient(z.lp);
    zinv_lp_ = z.lp.cwiseInverse();
    return true;
  }

  /// HKM scaling operator E(Y) = sym(X Y Z^-1).
  Cone apply_e(const Cone& v) const {
    Cone out;
    out.lp = d_lp_.cwiseProduct(v.lp);
    out.psd.resize(v.psd.size());
    for (std::size_t blk = 0; blk < v.psd.size(); ++blk)
      out.psd[blk] = hermitian_part(x_->psd[blk] * v.psd[blk] * zinv_[blk]);
    return out;
  }

  const std::vector<Mat>& zinv() const { return zinv_; }
  const RVector& zinv_lp() const { return zinv_lp_; }

  /// Schur complement M_ij = <A_i, E(A_j)>.
  RMatrix schur() const {
    RMatrix mm = RMatrix::Zero(m_, m_);
    for (int k = 0; k < p_.num_lp(); ++k) {
      const auto& col = lp_cols_[k];
      const Real d = d_lp_(k);
      for (std::size_t a = 0; a < col.size(); ++a)
        for (std::size_t c = a; c < col.size(); ++c) mm(col[a].first, col[c].first) += d * col[a].second * col[c].second;
    }
    for (int blk = 0; blk < p_.num_blocks(); ++blk) {
      const auto& touching = block_rows_[blk];
      if (touching.empty()) continue;
      const Mat pv = congruence(blk, x_->psd[blk]);
      const Mat qv = congruence(blk, zinv_[blk]);
      // D_j P[S_j, S_a] D_a precomputed per j would cost memory; the terms are tiny.
      for (std::size_t a = 0; a < touching.size(); ++a) {
        const auto& ta = *touching[a].second;
        for (std::size_t c = a; c < touching.size(); ++c) {
          const auto& tc = *touching[c].second;
          const Mat lhs = ta.coef * pv(ta.cols, tc.cols);
          const Mat rhs = tc.coef * qv(tc.cols, ta.cols);
          Real v = std::real((lhs.transpose().cwiseProduct(rhs)).sum());
          mm(touching[a].first, touching[c].first) += v;
        }
      }
    }
    // Only the upper triangle (in row order) was filled; mirror it.
    for (int i = 0; i < m_; ++i)
      for (int j = 0; j < i; ++j) {
        const Real s = mm(i, j) + mm(j, i);
        mm(i, j) = s;
        mm(j, i) = s;
      }
    return mm;
  }

  static Real trace_product(const Mat& d, const Mat& k) {
    // Re tr(D K)
    return std::real((d.transpose().cwiseProduct(k)).sum());
  }

 private:
  // V^H Y V for the block's basis V = [I_p | E].
  Mat congruence(int blk, const Mat& y) const {
    const Mat& e = extra_[blk];
    const int p = ident_[blk];
    const auto re = e.cols();
    Mat k(p + re, p + re);
    const Mat ye = y * e;
    if (p > 0) {
      k.topLeftCorner(p, p) = y;
      k.topRightCorner(p, re) = ye;
      k.bottomLeftCorner(re, p).noalias() = e.adjoint() * y;
    }
    k.bottomRightCorner(re, re).noalias() = e.adjoint() * ye;
    return k;
  }

  // V T V^H for the block's basis V = [I_p | E].
  Mat expand(int blk, const Mat& t) const {
    const Mat& e = extra_[blk];
    const int p = ident_[blk];
    const auto re = e.cols();
    if (p == 0) return e * t * e.adjoint();
    const Mat g = t.bottomLeftCorner(re, p) + t.bottomRightCorner(re, re) * e.adjoint();
    Mat out = t.topLeftCorner(p, p);
    out.noalias() += e * g;
    out.noalias() += t.topRightCorner(p, re) * e.adjoint();
    return out;
  }

  const Program<Scalar>& p_;
  int m_ = 0;
  RVector b_;
  Cone cost_;
  std::vector<std::vector<std::pair<int, Real>>> lp_cols_;
  std::vector<std::vector<std::pair<int, const BlockTerm<Scalar>*>>> block_rows_;
  std::vector<int> ident_;
  std::vector<Mat> extra_;
  const Cone* x_ = nullptr;
  std::vector<Mat> zinv_;
  RVector d_lp_;
  RVector zinv_lp_;
};

/// Largest alpha in [0, inf) with X + alpha dX in the cone.
template <typename Scalar>
RealOf<Scalar> max_step(const ConeVector<Scalar>& x, const ConeVector<Scalar>& dx) {
  using Real = RealOf<Scalar>;
  Real alpha = std::numeric_limits<Real>::infinity();
  for (Eigen::Index k = 0; k < x.lp.size(); ++k)
    if (dx.lp(k) < 0.0) alpha = std::min(alpha, -x.lp(k) / dx.lp(k));
  for (std::size_t blk = 0; blk < x.psd.size(); ++blk) {
    using Mat = Matrix<Scalar>;
    Eigen::LLT<Mat> llt(x.psd[blk]);
    if (llt.info() != Eigen::Success) return 0.0;
    const auto l = llt.matrixL();
    Mat t = l.solve(dx.psd[blk]);
    Mat s = l.solve(t.adjoint());
    const Real lam = min_eigenvalue(s);
    if (lam < 0.0) alpha = std::min(alpha, -1.0 / lam);
  }
  return alpha;
}

template <typename Scalar>
RealOf<Scalar> max_step_scalar(RealOf<Scalar> v, RealOf<Scalar> dv) {
  return dv < 0.0 ? -v / dv : std::numeric_limits<RealOf<Scalar>>::infinity();
}

template <typename Scalar>
struct Direction {
  using Real = RealOf<Scalar>;
  using RVector = RVectorOf<Scalar>;
  using RMatrix = RMatrixOf<Scalar>;
  ConeVector<Scalar> dx;
  RVector dy;
  ConeVector<Scalar> dz;
  Real dtau = 0.0;
  Real dkappa = 0.0;
};

}  // namespace detail

namespace detail {

template <typename Scalar>
Result<Scalar> solve_scaled(const Program<Scalar>& prog, const Options& opt);

}  // namespace detail

/// Solves the program after scaling every row to unit norm. Multipliers are
/// mapped back to the caller's rows; the reported residuals refer to the
/// scaled rows.
template <typename Scalar>
Result<Scalar> solve(const Program<Scalar>& prog, const Options& opt = {}) {
  using Real = RealOf<Scalar>;
  using RVector = RVectorOf<Scalar>;
  Program<Scalar> scaled = prog;
  RVector d = RVector::Ones(prog.num_rows());
  for (int i = 0; i < prog.num_rows(); ++i) {
    const Real n = prog.row_norm(i);
    if (n > 0.0 && std::isfinite(n)) {
      d(i) = n;
      scaled.scale_row(i, 1.0 / n);
    }
  }
  Result<Scalar> res = detail::solve_scaled(scaled, opt);
  if (res.y.size() == d.size()) res.y = res.y.cwiseQuotient(d);
  return res;
}

template <typename Scalar>
Result<Scalar> detail::solve_scaled(const Program<Scalar>& prog, const Options& opt) {
  using Real = RealOf<Scalar>;
  using RVector = RVectorOf<Scalar>;
  using RMatrix = RMatrixOf<Scalar>;
  using Cone = ConeVector<Scalar>;
  detail::Workspace<Scalar> ws(prog);
  const int m = ws.m();
  const Real nu = static_cast<Real>(prog.cone_degree()) + 1.0;
  const RVector& b = ws.b();
  const Cone& c = ws.cost();
  const Real b_norm = b.norm();
  const Real c_norm = c.norm();

  Cone x = Cone::identity_like(prog);
  Cone z = Cone::identity_like(prog);
  x.scale(opt.initial_primal_scale);
  z.scale(opt.initial_dual_scale);
  RVector y = RVector::Zero(m);
  Real tau = 1.0;
  Real kappa = 1.0;

  Result<Scalar> res;
  Real best_merit = std::numeric_limits<Real>::infinity();
  Cone best_x, best_z;
  RVector best_y;
  Real best_tau = 1.0;

  auto record = [&](Result<Scalar>& r, const Cone& xx, const RVector& yy, const Cone& zz, Real tt) {
    r.x = xx;
    r.x.scale(1.0 / tt);
    r.z = zz;
    r.z.scale(1.0 / tt);
    r.y = yy / tt;
    r.primal_objective = inner(c, r.x);
    r.dual_objective = b.dot(r.y);
    r.primal_residual = (ws.apply_a(r.x) - b).norm() / (1.0 + b_norm);
    Cone rd = c;
    rd.axpy(-1.0, ws.apply_at(r.y));
    rd.axpy(-1.0, r.z);
    r.dual_residual = rd.norm() / (1.0 + c_norm);
    r.relative_gap = std::abs(r.primal_objective - r.dual_objective) /
                     (1.0 + std::abs(r.primal_objective) + std::abs(r.dual_objective));
  };

  for (int it = 0; it <= opt.max_iterations; ++it) {
    res.iterations = it;
    // Residuals of the embedding.
    const RVector ax = ws.apply_a(x);
    const RVector rp = b * tau - ax;
    Cone rd = c;
    rd.scale(tau);
    rd.axpy(-1.0, ws.apply_at(y));
    rd.axpy(-1.0, z);
    const Real cx = inner(c, x);
    const Real by = b.dot(y);
    const Real rg = kappa + cx - by;
    const Real mu = (inner(x, z) + tau * kappa) / nu;

    // Convergence tests on the de-homogenized point.
    const Real pinf = rp.norm() / tau / (1.0 + b_norm);
    const Real dinf = rd.norm() / tau / (1.0 + c_norm);
    const Real pobj = cx / tau;
    const Real dobj = by / tau;
    const Real gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
    if (pinf <= opt.feasibility_tol && dinf <= opt.feasibility_tol && gap <= opt.gap_tol) {
      record(res, x, y, z, tau);
      res.status = Status::optimal;
      res.message = "converged";
      return res;
    }
    if (opt.verbose) {
      std::clog << "it " << it << " pinf " << pinf << " dinf " << dinf << " gap " << gap << " mu " << mu << " tau " << tau
                << " kappa " << kappa << '\n';
    }
    const Real merit = std::max({pinf, dinf, gap});
    if (merit < best_merit) {
      best_merit = merit;
      best_x = x;
      best_y = y;
      best_z = z;
      best_tau = tau;
    }
    // Farkas ray for primal infeasibility: A^T y + Z = 0, b'y > 0.
    if (by > 0.0) {
      Cone ray = ws.apply_at(y);
      ray.axpy(1.0, z);
      if (ray.norm() <= opt.infeasibility_tol * by) {
        res.status = Status::primal_infeasible;
        res.y = y / by;
        res.z = z;
        res.z.scale(1.0 / by);
        res.message = "primal infeasibility certificate";
        return res;
      }
    }
    if (cx < 0.0) {
      if (ax.norm() <= opt.infeasibility_tol * (-cx)) {
        res.status = Status::dual_infeasible;
        res.x = x;
        res.x.scale(-1.0 / cx);
        res.message = "dual infeasibility certificate";
        return res;
      }
    }
    if (it == opt.max_iterations) break;

    if (!ws.prepare(x, z)) {
      res.message = "dual slack lost definiteness";
      break;
    }
    const Cone ec = ws.apply_e(c);
    const RVector u = ws.apply_a(ec);
    const Real cec = inner(c, ec);
    RMatrix schur = ws.schur();
    const RMatrix schur_exact = schur;
    Eigen::LLT<RMatrix> llt(schur);
    bool factored = llt.info() == Eigen::Success;
    if (!factored) {
      const Real shift = 1e-14 * std::max(Real(1), schur.diagonal().maxCoeff());
      schur.diagonal().array() += shift;
      if (opt.verbose) std::clog << "  shifted Schur complement by " << static_cast<double>(shift) << '\n';
      llt.compute(schur);
      factored = llt.info() == Eigen::Success;
    }
    if (!factored) {
      res.message = "Schur complement factorization failed";
      break;
    }
    const RVector ub = u + b;
    // Two steps of iterative refinement against the unshifted matrix.
    auto schur_solve = [&](const RVector& r) {
      RVector v = llt.solve(r);
      for (int k = 0; k < 2; ++k) v += llt.solve(r - schur_exact * v);
      return v;
    };
    const RVector qv = schur_solve(ub);
    const RVector bmu = b - u;
    const Real denom = bmu.dot(qv) + cec + kappa / tau;

    auto direction = [&](Real sigma, Real eta, const detail::Direction<Scalar>* corr) {
      detail::Direction<Scalar> d;
      // R_c = sigma mu Z^-1 - X - sym(dXa dZa Z^-1)
      Cone rc = x;
      rc.scale(-1.0);
      rc.lp += sigma * mu * ws.zinv_lp();
      for (std::size_t blk = 0; blk < rc.psd.size(); ++blk) rc.psd[blk] += sigma * mu * ws.zinv()[blk];
      Real rk = sigma * mu - tau * kappa;
      if (corr != nullptr) {
        rc.lp -= corr->dx.lp.cwiseProduct(corr->dz.lp).cwiseProduct(ws.zinv_lp());
        for (std::size_t blk = 0; blk < rc.psd.size(); ++blk)
          rc.psd[blk] -= hermitian_part(corr->dx.psd[blk] * corr->dz.psd[blk] * ws.zinv()[blk]);
        rk -= corr->dtau * corr->dkappa;
      }
      Cone rde = rd;
      rde.scale(eta);
      Cone t = rc;
      t.axpy(-1.0, ws.apply_e(rde));
      const RVector h1 = eta * rp - ws.apply_a(t);
      const Real h2 = eta * rg + inner(c, t) + rk / tau;
      const RVector pv = schur_solve(h1);
      d.dtau = (h2 - bmu.dot(pv)) / denom;
      d.dy = pv + d.dtau * qv;
      d.dz = rde;
      d.dz.axpy(-1.0, ws.apply_at(d.dy));
      d.dz.axpy(d.dtau, c);
      d.dx = rc;
      d.dx.axpy(-1.0, ws.apply_e(d.dz));
      d.dkappa = (rk - kappa * d.dtau) / tau;
      return d;
    };

    auto step_bound = [&](const detail::Direction<Scalar>& d) {
      Real a = std::min(detail::max_step(x, d.dx), detail::max_step(z, d.dz));
      a = std::min(a, detail::max_step_scalar<Scalar>(tau, d.dtau));
      a = std::min(a, detail::max_step_scalar<Scalar>(kappa, d.dkappa));
      return a;
    };

    const auto pred = direction(0.0, 1.0, nullptr);
    const Real alpha_aff = std::min(Real(1), step_bound(pred));
    Cone xa = x, za = z;
    xa.axpy(alpha_aff, pred.dx);
    za.axpy(alpha_aff, pred.dz);
    const Real mu_aff =
        (inner(xa, za) + (tau + alpha_aff * pred.dtau) * (kappa + alpha_aff * pred.dkappa)) / nu;
    const Real sigma = std::clamp(std::pow(std::max(mu_aff, Real(0)) / mu, Real(3)), Real(0), Real(1));

    const auto dir = direction(sigma, 1.0 - sigma, &pred);
    const Real amax = step_bound(dir);
    const Real alpha = std::min(Real(1), Real(opt.step_fraction) * amax);
    if (opt.verbose) std::clog << "  alpha_aff " << static_cast<double>(alpha_aff) << " sigma " << static_cast<double>(sigma) << " alpha " << static_cast<double>(alpha) << '\n';
    if (!(alpha > 1e-12)) {
      res.message = "step length collapsed";
      break;
    }
    x.axpy(alpha, dir.dx);
    z.axpy(alpha, dir.dz);
    for (auto& blk : x.psd) blk = hermitian_part(blk);
    for (auto& blk : z.psd) blk = hermitian_part(blk);
    y += alpha * dir.dy;
    tau += alpha * dir.dtau;
    kappa += alpha * dir.dkappa;
    if (!(tau > 0.0) || !(kappa > 0.0) || !std::isfinite(tau)) {
      res.message = "embedding scalars left the cone";
      break;
    }
  }

  // Stalled. A vanishing tau with an approximate Farkas ray still certifies
  // infeasibility to a looser tolerance.
  {
    const Real by = b.dot(y);
    if (by > 0.0 && tau < 1e-8 * kappa) {
      Cone ray = ws.apply_at(y);
      ray.axpy(1.0, z);
      if (ray.norm() <= 1e-6 * by) {
        res.status = Status::primal_infeasible;
        res.y = y / by;
        res.z = z;
        res.z.scale(1.0 / by);
        res.message = "primal infeasibility certificate (loose, " + res.message + ")";
        return res;
      }
    }
  }
  // Otherwise accept the best iterate if it meets the looser tolerances.
  if (best_x.psd.size() == prog.blocks().size() && best_x.lp.size() == prog.num_lp()) {
    record(res, best_x, best_y, best_z, best_tau);
    if (res.primal_residual <= opt.acceptable_feasibility && res.dual_residual <= opt.acceptable_feasibility &&
        res.relative_gap <= opt.acceptable_gap) {
      res.status = Status::optimal;
      res.message = "converged to acceptable tolerance (" + res.message + ")";
      return res;
    }
  }
  res.status = Status::failure;
  if (res.message.empty()) res.message = "iteration limit";
  return res;
}

}  // namespace cachesec::conic
