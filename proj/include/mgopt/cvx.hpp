#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mgopt::cvx {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// 0.5 x'P x + q'x + r <= 0 with P symmetric PSD.
struct QuadIneq {
  Eigen::MatrixXd P;
  Eigen::VectorXd q;
  double r = 0.0;
};

/// min 0.5 x'Q x + c'x  s.t.  A x = b,  G x <= h,  quad ineqs,  lb <= x <= ub.
struct ConvexProgram {
  int n = 0;
  Eigen::MatrixXd Q;
  Eigen::VectorXd c;
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  Eigen::MatrixXd G;
  Eigen::VectorXd h;
  std::vector<QuadIneq> qineq;
  Eigen::VectorXd lb, ub;

  static ConvexProgram sized(int n) {
    ConvexProgram p;
    p.n = n;
    p.Q = Eigen::MatrixXd::Zero(n, n);
    p.c = Eigen::VectorXd::Zero(n);
    p.A.resize(0, n);
    p.b.resize(0);
    p.G.resize(0, n);
    p.h.resize(0);
    p.lb = Eigen::VectorXd::Constant(n, -kInf);
    p.ub = Eigen::VectorXd::Constant(n, kInf);
    return p;
  }

  double objective(const Eigen::VectorXd& x) const {
    return 0.5 * x.dot(Q * x) + c.dot(x);
  }
};

enum class Status { Optimal, Infeasible, Unbounded, IterationLimit };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::Optimal: return "optimal";
    case Status::Infeasible: return "infeasible";
    case Status::Unbounded: return "unbounded";
    default: return "iteration_limit";
  }
}

struct KktSolution {
  Eigen::VectorXd x;
  Eigen::VectorXd y_eq;      // equality duals
  Eigen::VectorXd z_ineq;    // linear inequality duals (>= 0)
  Eigen::VectorXd z_quad;    // quadratic inequality duals (>= 0)
  Eigen::VectorXd z_lb, z_ub;  // box duals (>= 0)
  Status status = Status::IterationLimit;
  double kkt_residual = kInf;
  int iterations = 0;
};

class SolverError : public std::runtime_error {
 public:
  explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

// Flattened inequality view: linear rows, then lower/upper box rows, then
// quadratic rows. Order is fixed so duals can be unpacked afterwards.
struct IneqView {
  const ConvexProgram* p = nullptr;
  std::vector<int> lb_idx, ub_idx;  // variables with finite bounds
  int m_lin = 0, m_box = 0, m_quad = 0;
  int total() const { return m_lin + m_box + m_quad; }

  explicit IneqView(const ConvexProgram& prog) : p(&prog) {
    m_lin = static_cast<int>(prog.G.rows());
    for (int i = 0; i < prog.n; ++i) {
      if (prog.lb(i) > -kInf) lb_idx.push_back(i);
      if (prog.ub(i) < kInf) ub_idx.push_back(i);
    }
    m_box = static_cast<int>(lb_idx.size() + ub_idx.size());
    m_quad = static_cast<int>(prog.qineq.size());
  }

  Eigen::VectorXd eval(const Eigen::VectorXd& x) const {
    Eigen::VectorXd g(total());
    int k = 0;
    if (m_lin) g.head(m_lin) = p->G * x - p->h;
    k = m_lin;
    for (int i : lb_idx) g(k++) = p->lb(i) - x(i);
    for (int i : ub_idx) g(k++) = x(i) - p->ub(i);
    for (const auto& qc : p->qineq)
      g(k++) = 0.5 * x.dot(qc.P * x) + qc.q.dot(x) + qc.r;
    return g;
  }

  Eigen::MatrixXd jac(const Eigen::VectorXd& x) const {
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(total(), p->n);
    int k = 0;
    if (m_lin) J.topRows(m_lin) = p->G;
    k = m_lin;
    for (int i : lb_idx) J(k++, i) = -1.0;
    for (int i : ub_idx) J(k++, i) = 1.0;
    for (const auto& qc : p->qineq) J.row(k++) = (qc.P * x + qc.q).transpose();
    return J;
  }

  // Hessian of the Lagrangian inequality part: sum z_k P_k.
  void add_hessian(const Eigen::VectorXd& z, Eigen::MatrixXd& H) const {
    int k = m_lin + m_box;
    for (const auto& qc : p->qineq) H += z(k++) * qc.P;
  }
};

inline double max_step(const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
  double a = 1.0;
  for (int i = 0; i < v.size(); ++i)
    if (dv(i) < 0.0) a = std::min(a, -v(i) / dv(i));
  return a;
}

}  // namespace detail

/// Independent KKT verifier: recomputes stationarity, feasibility and
/// complementarity residuals from the program data alone.
struct KktReport {
  double stationarity = 0.0;
  double primal_eq = 0.0;
  double primal_ineq = 0.0;
  double dual_feas = 0.0;       // most negative multiplier
  double complementarity = 0.0;
  double max_residual() const {
    return std::max({stationarity, primal_eq, primal_ineq, dual_feas, complementarity});
  }
};

inline KktReport verify_kkt(const ConvexProgram& p, const KktSolution& s) {
  KktReport rep;
  const Eigen::VectorXd& x = s.x;
  Eigen::VectorXd grad = p.Q * x + p.c;
  if (p.A.rows()) grad += p.A.transpose() * s.y_eq;
  if (p.G.rows()) grad += p.G.transpose() * s.z_ineq;
  for (std::size_t k = 0; k < p.qineq.size(); ++k)
    grad += s.z_quad(static_cast<int>(k)) * (p.qineq[k].P * x + p.qineq[k].q);
  grad -= s.z_lb;
  grad += s.z_ub;
  rep.stationarity = grad.size() ? grad.lpNorm<Eigen::Infinity>() : 0.0;
  if (p.A.rows()) rep.primal_eq = (p.A * x - p.b).lpNorm<Eigen::Infinity>();

  auto track = [&rep](double violation, double dual) {
    rep.primal_ineq = std::max(rep.primal_ineq, violation);
    rep.dual_feas = std::max(rep.dual_feas, -dual);
    rep.complementarity = std::max(rep.complementarity, std::abs(dual * violation));
  };
  for (int i = 0; i < p.G.rows(); ++i) track(p.G.row(i).dot(x) - p.h(i), s.z_ineq(i));
  for (int i = 0; i < p.n; ++i) {
    if (p.lb(i) > -kInf) track(p.lb(i) - x(i), s.z_lb(i));
    if (p.ub(i) < kInf) track(x(i) - p.ub(i), s.z_ub(i));
  }
  for (std::size_t k = 0; k < p.qineq.size(); ++k) {
    double g = 0.5 * x.dot(p.qineq[k].P * x) + p.qineq[k].q.dot(x) + p.qineq[k].r;
    track(g, s.z_quad(static_cast<int>(k)));
  }
  // complementarity is z * max(g, 0 distance); for interior points z*|g|
  return rep;
}

/// Primal-dual interior-point solve (Mehrotra predictor-corrector),
/// deterministic for fixed inputs.
inline KktSolution solve(const ConvexProgram& p, double tol = 1e-8, int max_iter = 100) {
  using Eigen::MatrixXd;
  using Eigen::VectorXd;
  const int n = p.n;
  const int neq = static_cast<int>(p.A.rows());
  detail::IneqView iv(p);
  const int M = iv.total();

  KktSolution sol;
  auto unpack = [&](const VectorXd& x, const VectorXd& y, const VectorXd& z) {
    sol.x = x;
    sol.y_eq = y;
    sol.z_ineq = z.size() ? VectorXd(z.head(iv.m_lin)) : VectorXd::Zero(0);
    sol.z_lb = VectorXd::Zero(n);
    sol.z_ub = VectorXd::Zero(n);
    int k = iv.m_lin;
    for (int i : iv.lb_idx) sol.z_lb(i) = z(k++);
    for (int i : iv.ub_idx) sol.z_ub(i) = z(k++);
    sol.z_quad.resize(iv.m_quad);
    for (int q = 0; q < iv.m_quad; ++q) sol.z_quad(q) = z(k++);
  };

  // Equality-constrained (or unconstrained) QP: one KKT solve.
  if (M == 0) {
    MatrixXd K(n + neq, n + neq);
    K.setZero();
    K.topLeftCorner(n, n) = p.Q;
    if (neq) {
      K.topRightCorner(n, neq) = p.A.transpose();
      K.bottomLeftCorner(neq, n) = p.A;
    }
    VectorXd rhs(n + neq);
    rhs.head(n) = -p.c;
    if (neq) rhs.tail(neq) = p.b;
    Eigen::FullPivLU<MatrixXd> lu(K);
    if (!lu.isInvertible()) {
      // singular KKT: either unbounded or degenerate equalities
      sol.status = Status::Unbounded;
      sol.x = VectorXd::Zero(n);
      sol.y_eq = VectorXd::Zero(neq);
      unpack(sol.x, sol.y_eq, VectorXd::Zero(0));
      return sol;
    }
    VectorXd xy = lu.solve(rhs);
    unpack(xy.head(n), xy.tail(neq), VectorXd::Zero(0));
    sol.status = Status::Optimal;
    KktReport rep = verify_kkt(p, sol);
    sol.kkt_residual = rep.max_residual();
    return sol;
  }

  // strictly interior start
  VectorXd x = VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) {
    double lo = p.lb(i), hi = p.ub(i);
    if (lo > -kInf && hi < kInf)
      x(i) = 0.5 * (lo + hi);
    else if (lo > -kInf)
      x(i) = lo + 1.0;
    else if (hi < kInf)
      x(i) = hi - 1.0;
  }
  VectorXd g = iv.eval(x);
  VectorXd s(M), z = VectorXd::Ones(M);
  for (int i = 0; i < M; ++i) s(i) = std::max(-g(i), 1.0);
  VectorXd y = VectorXd::Zero(neq);

  // stationarity and complementarity are judged relative to the objective
  // data scale; with a large quadratic penalty in Q/c an absolute test is
  // below attainable floating-point accuracy
  double obj_scale = 1.0 + std::max(p.c.lpNorm<Eigen::Infinity>(),
                                    p.Q.size() ? p.Q.lpNorm<Eigen::Infinity>() : 0.0);

  // best iterate seen, as a fallback when the endgame stalls on
  // ill-conditioned or degenerate instances
  double best_res = kInf;
  VectorXd x_best = x, y_best = y, z_best, s_best;

  double mu = s.dot(z) / M;
  for (int it = 0; it < max_iter; ++it) {
    g = iv.eval(x);
    MatrixXd J = iv.jac(x);
    VectorXd r_d = p.Q * x + p.c + J.transpose() * z;
    if (neq) r_d += p.A.transpose() * y;
    VectorXd r_e = neq ? VectorXd(p.A * x - p.b) : VectorXd();
    VectorXd r_p = g + s;
    mu = s.dot(z) / M;

    double res = r_d.lpNorm<Eigen::Infinity>() / obj_scale;
    if (neq) res = std::max(res, r_e.lpNorm<Eigen::Infinity>());
    res = std::max(res, r_p.lpNorm<Eigen::Infinity>());
    double comp = (s.array() * z.array()).maxCoeff() / obj_scale;
    sol.kkt_residual = std::max(res, comp);
    sol.iterations = it;
    if (sol.kkt_residual < best_res) {
      best_res = sol.kkt_residual;
      x_best = x;
      y_best = y;
      z_best = z;
      s_best = s;
    }
    if (sol.kkt_residual <= tol) {
      unpack(x, y, z);
      sol.status = Status::Optimal;
      sol.kkt_residual = verify_kkt(p, sol).max_residual();
      sol.iterations = it;
      return sol;
    }
    // endgame guards: once the iterate has been nearly optimal, a residual
    // rebound or a complementarity underflow means the scaling matrix has
    // degenerated -- stop and report the best iterate instead of diverging
    if (best_res <= 1e2 * tol && sol.kkt_residual > 1e4 * best_res) break;
    if (mu < 1e-17 * obj_scale && sol.kkt_residual > tol) break;

    // divergence heuristics
    double dual_norm = z.lpNorm<Eigen::Infinity>() + (neq ? y.lpNorm<Eigen::Infinity>() : 0.0);
    if (dual_norm > 1e9 && r_p.lpNorm<Eigen::Infinity>() > std::sqrt(tol)) {
      if (best_res <= 1e-6) break;  // was near-optimal: numerical breakdown, not infeasibility
      unpack(x, y, z);
      sol.status = Status::Infeasible;
      return sol;
    }
    if (x.lpNorm<Eigen::Infinity>() > 1e9) {
      if (best_res <= 1e-6) break;
      unpack(x, y, z);
      sol.status = Status::Unbounded;
      return sol;
    }

    MatrixXd H = p.Q;
    iv.add_hessian(z, H);
    Eigen::ArrayXd zs = z.array() / s.array();
    MatrixXd K(n + neq, n + neq);
    K.setZero();
    K.topLeftCorner(n, n) = H + J.transpose() * zs.matrix().asDiagonal() * J;
    K.topLeftCorner(n, n).diagonal().array() += 1e-12;
    if (neq) {
      K.topRightCorner(n, neq) = p.A.transpose();
      K.bottomLeftCorner(neq, n) = p.A;
      K.bottomRightCorner(neq, neq).diagonal().array() -= 1e-12;
    }
    Eigen::PartialPivLU<MatrixXd> lu(K);

    auto solve_dir = [&](const VectorXd& r_sz, VectorXd& dx, VectorXd& dy, VectorXd& dz,
                         VectorXd& ds) {
      VectorXd w = (r_sz.array() + z.array() * r_p.array()) / s.array();
      VectorXd rhs(n + neq);
      rhs.head(n) = -r_d - J.transpose() * w;
      if (neq) rhs.tail(neq) = -r_e;
      VectorXd d = lu.solve(rhs);
      d += lu.solve(rhs - K * d);  // iterative refinement recovers endgame accuracy
      d += lu.solve(rhs - K * d);
      dx = d.head(n);
      dy = neq ? VectorXd(d.tail(neq)) : VectorXd();
      dz = (zs * (J * dx).array()).matrix() + w;
      ds = -r_p - J * dx;
    };

    // predictor
    VectorXd dx, dy, dz, ds;
    solve_dir(-(s.array() * z.array()).matrix(), dx, dy, dz, ds);
    double a_p = detail::max_step(s, ds), a_d = detail::max_step(z, dz);
    double a_aff = std::min(a_p, a_d);
    double mu_aff = (s + a_aff * ds).dot(z + a_aff * dz) / M;
    double sigma = std::pow(mu_aff / mu, 3.0);

    // corrector
    VectorXd r_sz = (sigma * mu - (s.array() * z.array()) - (ds.array() * dz.array())).matrix();
    solve_dir(r_sz, dx, dy, dz, ds);
    double alpha = 0.99 * std::min(detail::max_step(s, ds), detail::max_step(z, dz));
    alpha = std::min(alpha, 1.0);

    if (alpha < 1e-13) break;  // stalled: no usable step direction left
    x += alpha * dx;
    if (neq) y += alpha * dy;
    z += alpha * dz;
    s += alpha * ds;
  }
  unpack(x_best, y_best, z_best.size() ? z_best : z);
  sol.kkt_residual = best_res;
  sol.status = Status::IterationLimit;
  sol.iterations = max_iter;
  return sol;
}

/// Fast path for linear programs (Q = 0, no quadratic rows); same contract.
inline KktSolution solve_lp(const ConvexProgram& p, double tol = 1e-8, int max_iter = 100) {
  if (!p.qineq.empty()) throw SolverError("solve_lp: program has quadratic inequalities");
  if (p.Q.size() && p.Q.lpNorm<Eigen::Infinity>() != 0.0)
    throw SolverError("solve_lp: program has a quadratic objective");
  return solve(p, tol, max_iter);
}

}  // namespace mgopt::cvx
