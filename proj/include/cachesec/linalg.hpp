#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>

namespace cachesec {

using cd = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;

template <typename Derived>
auto hermitian_part(const Eigen::MatrixBase<Derived>& a) {
  using M = Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  M out = (a + a.adjoint()) * 0.5;
  return out;
}

/// Eigenvalues of a Hermitian matrix in ascending order.
template <typename Derived>
auto hermitian_eigenvalues(const Eigen::MatrixBase<Derived>& a) {
  using M = Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using V = Eigen::Matrix<typename Eigen::NumTraits<typename Derived::Scalar>::Real, Eigen::Dynamic, 1>;
  if (a.rows() == 0) return V();
  Eigen::SelfAdjointEigenSolver<M> es(hermitian_part(a), Eigen::EigenvaluesOnly);
  return V(es.eigenvalues());
}

template <typename Derived>
auto min_eigenvalue(const Eigen::MatrixBase<Derived>& a) {
  using R = typename Eigen::NumTraits<typename Derived::Scalar>::Real;
  if (a.rows() == 0) return R(0);
  return hermitian_eigenvalues(a)(0);
}

template <typename Derived>
auto max_eigenvalue(const Eigen::MatrixBase<Derived>& a) {
  using R = typename Eigen::NumTraits<typename Derived::Scalar>::Real;
  if (a.rows() == 0) return R(0);
  const auto ev = hermitian_eigenvalues(a);
  return ev(ev.size() - 1);
}

/// Hermitian matrix distance from Hermitian-ness, measured in Frobenius norm.
template <typename Derived>
auto hermitian_defect(const Eigen::MatrixBase<Derived>& a) {
  return (a - a.adjoint()).norm();
}

/// Standard real embedding of a complex matrix: [Re, -Im; Im, Re].
/// Hermitian PSD inputs map to real symmetric PSD outputs, every eigenvalue
/// appears twice, and the trace doubles.
inline RMat real_embedding(const CMat& a) {
  const Eigen::Index n = a.rows();
  const Eigen::Index m = a.cols();
  RMat out(2 * n, 2 * m);
  out.topLeftCorner(n, m) = a.real();
  out.topRightCorner(n, m) = -a.imag();
  out.bottomLeftCorner(n, m) = a.imag();
  out.bottomRightCorner(n, m) = a.real();
  return out;
}

/// Inverse of real_embedding after projecting onto the embedding structure.
inline CMat from_real_embedding(const RMat& r) {
  if (r.rows() % 2 != 0 || r.cols() % 2 != 0) {
    throw std::invalid_argument("real embedding must have even dimensions");
  }
  const Eigen::Index n = r.rows() / 2;
  const Eigen::Index m = r.cols() / 2;
  RMat re = 0.5 * (r.topLeftCorner(n, m) + r.bottomRightCorner(n, m));
  RMat im = 0.5 * (r.bottomLeftCorner(n, m) - r.topRightCorner(n, m));
  CMat out(n, m);
  out.real() = re;
  out.imag() = im;
  return out;
}

/// log2 det(I + A) for Hermitian PSD A, via eigenvalues (clamped at zero).
inline double log2_det_identity_plus(const CMat& a) {
  if (a.rows() == 0) return 0.0;
  RVec ev = hermitian_eigenvalues(a);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) acc += std::log2(1.0 + std::max(ev(i), 0.0));
  return acc;
}

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }
inline double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
inline double watts_to_dbm(double w) { return 10.0 * std::log10(w) + 30.0; }

}  // namespace cachesec
