#include "cachesec/conic.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

using namespace cachesec;
using namespace cachesec::conic;

TEST(Conic, SmallLp) {
  // min x0 + 2 x1  s.t.  x0 + x1 = 1, x >= 0
  Program<double> p;
  const int a = p.add_lp(1.0), b = p.add_lp(2.0);
  const int r = p.add_row(1.0);
  p.add_lp_coef(r, a, 1.0);
  p.add_lp_coef(r, b, 1.0);
  const auto res = solve(p);
  ASSERT_EQ(res.status, Status::optimal) << res.message;
  EXPECT_NEAR(res.x.lp(0), 1.0, 1e-9);
  EXPECT_NEAR(res.x.lp(1), 0.0, 1e-9);
  EXPECT_NEAR(res.y(0), 1.0, 1e-9);
}

TEST(Conic, MinEigenvalueSdpReal) {
  // min <C, X>  s.t.  tr X = 1, X psd  has optimum lambda_min(C).
  Program<double> p;
  Eigen::MatrixXd c = Eigen::Vector3d(2.0, 1.0, 3.0).asDiagonal();
  const int blk = p.add_block(Eigen::MatrixXd::Identity(3, 3), c);
  const int r = p.add_row(1.0);
  p.add_block_term(r, blk, {0, 1, 2}, Eigen::MatrixXd::Identity(3, 3));
  const auto res = solve(p);
  ASSERT_EQ(res.status, Status::optimal) << res.message;
  EXPECT_NEAR(res.primal_objective, 1.0, 1e-9);
  EXPECT_NEAR(res.x.psd[0](1, 1), 1.0, 1e-6);
}

TEST(Conic, MinEigenvalueSdpHermitian) {
  const CMat a = cachesec::testing::gaussian(4, 4, 7);
  const CMat c = (a + a.adjoint()) / 2.0;
  Program<cd> p;
  const int blk = p.add_block(CMat::Identity(4, 4), c);
  const int r = p.add_row(1.0);
  p.add_block_term(r, blk, {0, 1, 2, 3}, CMat::Identity(4, 4));
  const auto res = solve(p);
  ASSERT_EQ(res.status, Status::optimal) << res.message;
  EXPECT_NEAR(res.primal_objective, hermitian_eigenvalues(c)(0), 1e-8);
  EXPECT_NEAR(res.dual_objective, hermitian_eigenvalues(c)(0), 1e-8);
}

TEST(Conic, FactoredRowTerm) {
  // min tr X  s.t.  h^H X h = 1: optimum 1 / |h|^2 at X = h h^H / |h|^4.
  const CVec h = cachesec::testing::gaussian(3, 1, 11).col(0);
  Program<cd> p;
  CMat basis(3, 4);
  basis << CMat::Identity(3, 3), h;
  const int blk = p.add_block(basis, CMat::Identity(3, 3));
  const int r = p.add_row(1.0);
  p.add_block_term(r, blk, {3}, CMat::Identity(1, 1));
  const auto res = solve(p);
  ASSERT_EQ(res.status, Status::optimal) << res.message;
  EXPECT_NEAR(res.primal_objective, 1.0 / h.squaredNorm(), 1e-9);
}

TEST(Conic, DetectsPrimalInfeasibility) {
  // x0 + x1 = -1 with x >= 0.
  Program<double> p;
  const int a = p.add_lp(1.0), b = p.add_lp(1.0);
  const int r = p.add_row(-1.0);
  p.add_lp_coef(r, a, 1.0);
  p.add_lp_coef(r, b, 1.0);
  EXPECT_EQ(solve(p).status, Status::primal_infeasible);
}

TEST(Conic, DetectsUnboundedness) {
  // min -x0  s.t.  x0 - x1 = 0: unbounded below.
  Program<double> p;
  const int a = p.add_lp(-1.0), b = p.add_lp(0.0);
  const int r = p.add_row(0.0);
  p.add_lp_coef(r, a, 1.0);
  p.add_lp_coef(r, b, -1.0);
  EXPECT_EQ(solve(p).status, Status::dual_infeasible);
}

TEST(Conic, ExtendedPrecisionAgrees) {
  const CMat a = cachesec::testing::gaussian(3, 3, 5);
  const CMat c = (a + a.adjoint()) / 2.0 + 3.0 * CMat::Identity(3, 3);
  Program<std::complex<long double>> p;
  using LMat = Matrix<std::complex<long double>>;
  const int blk = p.add_block(LMat::Identity(3, 3), c.cast<std::complex<long double>>());
  const int r = p.add_row(2.0);
  p.add_block_term(r, blk, {0, 1, 2}, LMat::Identity(3, 3));
  const auto res = solve(p);
  ASSERT_EQ(res.status, Status::optimal) << res.message;
  EXPECT_NEAR(static_cast<double>(res.primal_objective), 2.0 * hermitian_eigenvalues(c)(0), 1e-11);
}

TEST(Conic, RejectsMalformedTerms) {
  Program<double> p;
  const int blk = p.add_block(Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Identity(2, 2));
  const int r = p.add_row(1.0);
  EXPECT_THROW(p.add_block_term(r, blk, {0, 5}, Eigen::MatrixXd::Identity(2, 2)), std::out_of_range);
  EXPECT_THROW(p.add_block_term(r, blk, {0}, Eigen::MatrixXd::Identity(2, 2)), std::invalid_argument);
  EXPECT_THROW(p.add_lp_coef(r, 3, 1.0), std::out_of_range);
  EXPECT_THROW(p.add_block(Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Identity(3, 3)), std::invalid_argument);
}
