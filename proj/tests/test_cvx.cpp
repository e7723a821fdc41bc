#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "mgopt/cvx.hpp"

using namespace mgopt;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Projected gradient descent for box-constrained QPs: an independent
// oracle that shares no code with the interior-point solver.
VectorXd projected_gradient(const cvx::ConvexProgram& p, int iters = 200000) {
  VectorXd x(p.n);
  for (int i = 0; i < p.n; ++i)
    x(i) = 0.5 * (std::max(p.lb(i), -1.0) + std::min(p.ub(i), 1.0));
  double L = p.Q.norm() + 1e-12;
  double step = 1.0 / L;
  for (int k = 0; k < iters; ++k) {
    VectorXd g = p.Q * x + p.c;
    VectorXd xn = x - step * g;
    for (int i = 0; i < p.n; ++i) xn(i) = std::clamp(xn(i), p.lb(i), p.ub(i));
    if ((xn - x).lpNorm<Eigen::Infinity>() < 1e-13) {
      x = xn;
      break;
    }
    x = xn;
  }
  return x;
}

}  // namespace

TEST_CASE("unconstrained quadratic hits the analytic minimum") {
  cvx::ConvexProgram p = cvx::ConvexProgram::sized(2);
  p.Q << 2, 0, 0, 4;
  p.c << -2, -8;  // minimum at (1, 2)
  cvx::KktSolution s = cvx::solve(p);
  REQUIRE(s.status == cvx::Status::Optimal);
  REQUIRE(s.x(0) == Catch::Approx(1.0).margin(1e-7));
  REQUIRE(s.x(1) == Catch::Approx(2.0).margin(1e-7));
}

TEST_CASE("equality-constrained quadratic solves via the KKT fast path") {
  // min x^2 + y^2 s.t. x + y = 2 -> (1, 1)
  cvx::ConvexProgram p = cvx::ConvexProgram::sized(2);
  p.Q = 2.0 * MatrixXd::Identity(2, 2);
  p.A = MatrixXd::Ones(1, 2);
  p.b = VectorXd::Constant(1, 2.0);
  cvx::KktSolution s = cvx::solve(p);
  REQUIRE(s.status == cvx::Status::Optimal);
  REQUIRE(s.x(0) == Catch::Approx(1.0).margin(1e-9));
  REQUIRE(s.x(1) == Catch::Approx(1.0).margin(1e-9));
  REQUIRE(cvx::verify_kkt(p, s).max_residual() < 1e-8);
}

TEST_CASE("active box bound") {
  // min (x+3)^2 with x in [-1, 1] -> x = -1
  cvx::ConvexProgram p = cvx::ConvexProgram::sized(1);
  p.Q(0, 0) = 2.0;
  p.c(0) = 6.0;
  p.lb(0) = -1.0;
  p.ub(0) = 1.0;
  cvx::KktSolution s = cvx::solve(p);
  REQUIRE(s.status == cvx::Status::Optimal);
  REQUIRE(s.x(0) == Catch::Approx(-1.0).margin(1e-7));
  REQUIRE(s.z_lb(0) > 1e-8);  // bound is active, multiplier positive
}

TEST_CASE("linear program via the LP wrapper") {
  // min -x - 2y s.t. x + y <= 1, x,y >= 0 -> (0, 1)
  cvx::ConvexProgram p = cvx::ConvexProgram::sized(2);
  p.c << -1, -2;
  p.G = MatrixXd::Ones(1, 2);
  p.h = VectorXd::Constant(1, 1.0);
  p.lb = VectorXd::Zero(2);
  cvx::KktSolution s = cvx::solve(p);
  REQUIRE(s.status == cvx::Status::Optimal);
  REQUIRE(s.x(0) == Catch::Approx(0.0).margin(1e-6));
  REQUIRE(s.x(1) == Catch::Approx(1.0).margin(1e-6));
}

TEST_CASE("quadratic (circle) constraint activates at the boundary") {
  // min -x - y s.t. x^2 + y^2 <= 2 -> (1, 1)
  cvx::ConvexProgram p = cvx::ConvexProgram::sized(2);
  p.c << -1, -1;
  cvx::QuadIneq ball;
  ball.P = 2.0 * MatrixXd::Identity(2, 2);
  ball.q = VectorXd::Zero(2);
  ball.r = -2.0;  // 0.5 x'Px + q'x + r <= 0  <=>  x^2 + y^2 <= 2
  p.qineq.push_back(ball);
  cvx::KktSolution s = cvx::solve(p);
  REQUIRE(s.status == cvx::Status::Optimal);
  REQUIRE(s.x(0) == Catch::Approx(1.0).margin(1e-6));
  REQUIRE(s.x(1) == Catch::Approx(1.0).margin(1e-6));
  REQUIRE(cvx::verify_kkt(p, s).max_residual() < 1e-8);
}

TEST_CASE("infeasible boxes are reported, not silently solved") {
  cvx::ConvexProgram p = cvx::ConvexProgram::sized(1);
  p.Q(0, 0) = 2.0;
  p.lb(0) = 1.0;
  p.ub(0) = 2.0;
  p.A = MatrixXd::Ones(1, 1);
  p.b = VectorXd::Constant(1, 5.0);  // x = 5 contradicts x <= 2
  cvx::KktSolution s = cvx::solve(p);
  REQUIRE(s.status != cvx::Status::Optimal);
}

TEST_CASE("KKT verifier rejects a corrupted solution") {
  cvx::ConvexProgram p = cvx::ConvexProgram::sized(2);
  p.Q = 2.0 * MatrixXd::Identity(2, 2);
  p.c << -2, -2;
  cvx::KktSolution s = cvx::solve(p);
  REQUIRE(cvx::verify_kkt(p, s).max_residual() < 1e-8);
  s.x(0) += 0.1;
  REQUIRE(cvx::verify_kkt(p, s).max_residual() > 1e-3);
}

TEST_CASE("fuzzed box QPs agree with the projected-gradient oracle") {
  std::mt19937 rng(20240817);
  std::uniform_int_distribution<int> dim(1, 6);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.2, 2.0);
  for (int trial = 0; trial < 60; ++trial) {
    int n = dim(rng);
    cvx::ConvexProgram p = cvx::ConvexProgram::sized(n);
    MatrixXd B(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) B(i, j) = gauss(rng);
    p.Q = B.transpose() * B + 0.1 * MatrixXd::Identity(n, n);
    for (int i = 0; i < n; ++i) {
      p.c(i) = 3.0 * gauss(rng);
      double center = gauss(rng), half = unif(rng);
      p.lb(i) = center - half;
      p.ub(i) = center + half;
    }
    cvx::KktSolution s = cvx::solve(p);
    INFO("trial " << trial << " status " << cvx::to_string(s.status));
    REQUIRE(s.status == cvx::Status::Optimal);
    VectorXd ref = projected_gradient(p);
    REQUIRE((s.x - ref).lpNorm<Eigen::Infinity>() < 1e-6);
    REQUIRE(cvx::verify_kkt(p, s).max_residual() < 1e-8);
  }
}
