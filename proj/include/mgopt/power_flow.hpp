#pragma once

#include <complex>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "mgopt/network.hpp"

namespace mgopt {

class PowerFlowError : public std::runtime_error {
 public:
  explicit PowerFlowError(const std::string& what) : std::runtime_error(what) {}
};

/// Per-bus net complex injection in kW / kvar (loads negative), slack entry ignored.
struct Injections {
  std::vector<double> p_kw;
  std::vector<double> q_kvar;
};

struct PfSolution {
  std::vector<double> v;        // magnitude [p.u.], per bus
  std::vector<double> delta;    // angle [rad], per bus
  std::vector<double> branch_p; // from-side active flow [kW], oriented from->to
  std::vector<double> branch_q; // from-side reactive flow [kvar]
  double losses = 0.0;          // total I^2 r [kW]
  double mismatch = 0.0;        // final max power-balance residual [p.u.]
  int iterations = 0;
};

struct SensitivityMatrix {
  std::vector<int> row_buses;   // non-slack bus indices, in bus order
  std::vector<int> col_buses;   // MG PCC bus indices
  Eigen::MatrixXd dv_dp;        // [p.u. V / p.u. P]
  Eigen::MatrixXd dv_dq;
};

namespace pf_detail {

inline Eigen::MatrixXcd ybus(const Network& net) {
  const int n = static_cast<int>(net.buses.size());
  Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(n, n);
  for (const auto& br : net.branches) {
    int a = net.index_of(br.from_bus), b = net.index_of(br.to_bus);
    std::complex<double> ys = 1.0 / std::complex<double>(br.r, br.x);
    y(a, a) += ys;
    y(b, b) += ys;
    y(a, b) -= ys;
    y(b, a) -= ys;
  }
  return y;
}

// Calculated injections at the current state, in p.u.
inline void calc_injections(const Eigen::MatrixXcd& y, const Eigen::VectorXd& v,
                            const Eigen::VectorXd& d, Eigen::VectorXd& p,
                            Eigen::VectorXd& q) {
  const int n = static_cast<int>(v.size());
  p.setZero(n);
  q.setZero(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double g = y(i, j).real(), b = y(i, j).imag();
      double th = d(i) - d(j);
      p(i) += v(i) * v(j) * (g * std::cos(th) + b * std::sin(th));
      q(i) += v(i) * v(j) * (g * std::sin(th) - b * std::cos(th));
    }
}

// Full [dP/dd dP/dV; dQ/dd dQ/dV] over the given non-slack bus set.
inline Eigen::MatrixXd jacobian_at(const Eigen::MatrixXcd& y, const Eigen::VectorXd& v,
                                   const Eigen::VectorXd& d, const std::vector<int>& pq) {
  const int m = static_cast<int>(pq.size());
  const int n = static_cast<int>(v.size());
  Eigen::VectorXd p, q;
  calc_injections(y, v, d, p, q);
  Eigen::MatrixXd jac(2 * m, 2 * m);
  for (int r = 0; r < m; ++r) {
    int i = pq[r];
    for (int c = 0; c < m; ++c) {
      int j = pq[c];
      double g = y(i, j).real(), b = y(i, j).imag();
      double th = d(i) - d(j);
      if (i == j) {
        double gii = y(i, i).real(), bii = y(i, i).imag();
        jac(r, c) = -q(i) - bii * v(i) * v(i);                  // dP/dd
        jac(r, m + c) = p(i) / v(i) + gii * v(i);               // dP/dV
        jac(m + r, c) = p(i) - gii * v(i) * v(i);               // dQ/dd
        jac(m + r, m + c) = q(i) / v(i) - bii * v(i);           // dQ/dV
      } else {
        double s = std::sin(th), cth = std::cos(th);
        jac(r, c) = v(i) * v(j) * (g * s - b * cth);
        jac(r, m + c) = v(i) * (g * cth + b * s);
        jac(m + r, c) = -v(i) * v(j) * (g * cth + b * s);
        jac(m + r, m + c) = v(i) * (g * s - b * cth);
      }
      (void)n;
    }
  }
  return jac;
}

}  // namespace pf_detail

/// Non-slack bus indices in bus order (PQ and MG PCC buses).
inline std::vector<int> pq_indices(const Network& net) {
  std::vector<int> pq;
  for (std::size_t i = 0; i < net.buses.size(); ++i)
    if (net.buses[i].kind != BusKind::Slack) pq.push_back(static_cast<int>(i));
  return pq;
}

/// Injections for hour t of the base case: loads, PV at MPPT with the given
/// reactive output, and MG PCC exchange (positive = injecting into the DN).
inline Injections injections_at_hour(const Network& net, int t,
                                     const std::vector<double>* pv_q_kvar = nullptr,
                                     const std::vector<double>* mg_p_kw = nullptr,
                                     const std::vector<double>* mg_q_kvar = nullptr) {
  const int n = static_cast<int>(net.buses.size());
  Injections inj;
  inj.p_kw.assign(n, 0.0);
  inj.q_kvar.assign(n, 0.0);
  int pv_k = 0, mg_k = 0;
  for (int i = 0; i < n; ++i) {
    const Bus& b = net.buses[i];
    inj.p_kw[i] -= b.load_p[t];
    inj.q_kvar[i] -= b.load_q[t];
    if (b.pv) {
      inj.p_kw[i] += b.pv->p_mppt[t];
      if (pv_q_kvar) inj.q_kvar[i] += (*pv_q_kvar)[pv_k];
      pv_k++;
    }
    if (b.kind == BusKind::MgPcc) {
      if (mg_p_kw) inj.p_kw[i] += (*mg_p_kw)[mg_k];
      if (mg_q_kvar) inj.q_kvar[i] += (*mg_q_kvar)[mg_k];
      mg_k++;
    }
  }
  return inj;
}

/// Newton-Raphson power flow from flat start. Converges to max mismatch
/// <= tol p.u.; throws PowerFlowError on non-convergence or singular Jacobian.
inline PfSolution solve_pf(const Network& net, const Injections& inj, double tol = 1e-8,
                           int max_iter = 30) {
  const int n = static_cast<int>(net.buses.size());
  if (static_cast<int>(inj.p_kw.size()) != n || static_cast<int>(inj.q_kvar.size()) != n)
    throw PowerFlowError("injection vectors must have one entry per bus");
  const int slack = net.slack_index();
  const std::vector<int> pq = pq_indices(net);
  const int m = static_cast<int>(pq.size());

  Eigen::MatrixXcd y = pf_detail::ybus(net);
  Eigen::VectorXd v = Eigen::VectorXd::Constant(n, net.v_ref);
  Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd p_spec(n), q_spec(n);
  for (int i = 0; i < n; ++i) {
    p_spec(i) = net.to_pu(inj.p_kw[i]);
    q_spec(i) = net.to_pu(inj.q_kvar[i]);
  }

  double mismatch = 0.0;
  int it = 0;
  for (; it < max_iter; ++it) {
    Eigen::VectorXd p, q;
    pf_detail::calc_injections(y, v, d, p, q);
    Eigen::VectorXd f(2 * m);
    for (int r = 0; r < m; ++r) {
      f(r) = p_spec(pq[r]) - p(pq[r]);
      f(m + r) = q_spec(pq[r]) - q(pq[r]);
    }
    mismatch = f.lpNorm<Eigen::Infinity>();
    if (mismatch <= tol) break;
    Eigen::MatrixXd jac = pf_detail::jacobian_at(y, v, d, pq);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
    if (!lu.isInvertible())
      throw PowerFlowError("singular Jacobian at iteration " + std::to_string(it));
    Eigen::VectorXd dx = lu.solve(f);
    for (int r = 0; r < m; ++r) {
      d(pq[r]) += dx(r);
      v(pq[r]) += dx(m + r);
    }
  }
  if (mismatch > tol)
    throw PowerFlowError("power flow did not converge: final mismatch " +
                         std::to_string(mismatch) + " p.u.");

  PfSolution sol;
  sol.v.assign(v.data(), v.data() + n);
  sol.delta.assign(d.data(), d.data() + n);
  sol.mismatch = mismatch;
  sol.iterations = it;
  sol.branch_p.resize(net.branches.size());
  sol.branch_q.resize(net.branches.size());
  double loss_pu = 0.0;
  for (std::size_t e = 0; e < net.branches.size(); ++e) {
    const Branch& br = net.branches[e];
    int a = net.index_of(br.from_bus), b = net.index_of(br.to_bus);
    std::complex<double> va = std::polar(v(a), d(a)), vb = std::polar(v(b), d(b));
    std::complex<double> ys = 1.0 / std::complex<double>(br.r, br.x);
    std::complex<double> i_ab = (va - vb) * ys;
    std::complex<double> s_from = va * std::conj(i_ab);
    sol.branch_p[e] = net.to_kw(s_from.real());
    sol.branch_q[e] = net.to_kw(s_from.imag());
    loss_pu += std::norm(i_ab) * br.r;
  }
  sol.losses = net.to_kw(loss_pu);
  (void)slack;
  return sol;
}

/// The [dP/dd dP/dV; dQ/dd dQ/dV] Jacobian at a converged state,
/// non-slack buses in bus order, slack excluded.
inline Eigen::MatrixXd jacobian(const Network& net, const PfSolution& state) {
  const int n = static_cast<int>(net.buses.size());
  Eigen::MatrixXcd y = pf_detail::ybus(net);
  Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(state.v.data(), n);
  Eigen::VectorXd d = Eigen::Map<const Eigen::VectorXd>(state.delta.data(), n);
  return pf_detail::jacobian_at(y, v, d, pq_indices(net));
}

/// Voltage sensitivity of every non-slack node to MG PCC injections:
/// dv_dp(i, w) = dV_i / dP_MG,w extracted from J^-1 by factoring J once
/// and solving for the MG columns.
inline SensitivityMatrix sensitivity(const Network& net, const PfSolution& state,
                                     const std::vector<int>& mg_buses) {
  if (mg_buses.empty()) throw std::invalid_argument("sensitivity: empty MG bus list");
  const std::vector<int> pq = pq_indices(net);
  const int m = static_cast<int>(pq.size());
  std::vector<int> mg_pos(mg_buses.size());
  for (std::size_t w = 0; w < mg_buses.size(); ++w) {
    auto it = std::find(pq.begin(), pq.end(), mg_buses[w]);
    if (it == pq.end()) throw std::invalid_argument("sensitivity: MG bus is not a PQ node");
    mg_pos[w] = static_cast<int>(it - pq.begin());
  }
  Eigen::MatrixXd jac = jacobian(net, state);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
  if (!lu.isInvertible()) throw PowerFlowError("singular Jacobian in sensitivity extraction");

  SensitivityMatrix s;
  s.row_buses = pq;
  s.col_buses = mg_buses;
  s.dv_dp.resize(m, static_cast<int>(mg_buses.size()));
  s.dv_dq.resize(m, static_cast<int>(mg_buses.size()));
  for (std::size_t w = 0; w < mg_buses.size(); ++w) {
    Eigen::VectorXd ep = Eigen::VectorXd::Zero(2 * m);
    ep(mg_pos[w]) = 1.0;                       // dP at the MG bus
    Eigen::VectorXd col = lu.solve(ep);
    s.dv_dp.col(static_cast<int>(w)) = col.segment(m, m);  // dV block
    Eigen::VectorXd eq = Eigen::VectorXd::Zero(2 * m);
    eq(m + mg_pos[w]) = 1.0;                   // dQ at the MG bus
    col = lu.solve(eq);
    s.dv_dq.col(static_cast<int>(w)) = col.segment(m, m);
  }
  if (!s.dv_dp.allFinite() || !s.dv_dq.allFinite())
    throw PowerFlowError("sensitivity matrix contains non-finite entries");
  return s;
}

/// Central-difference sensitivity estimate; test oracle only.
inline SensitivityMatrix fd_sensitivity_oracle(const Network& net, const Injections& inj,
                                               const std::vector<int>& mg_buses, double h) {
  if (h <= 0.0) throw std::invalid_argument("fd_sensitivity_oracle: h must be > 0");
  const std::vector<int> pq = pq_indices(net);
  const int m = static_cast<int>(pq.size());
  SensitivityMatrix s;
  s.row_buses = pq;
  s.col_buses = mg_buses;
  s.dv_dp.resize(m, static_cast<int>(mg_buses.size()));
  s.dv_dq.resize(m, static_cast<int>(mg_buses.size()));
  const double h_kw = net.to_kw(h);
  for (std::size_t w = 0; w < mg_buses.size(); ++w) {
    for (int comp = 0; comp < 2; ++comp) {
      Injections plus = inj, minus = inj;
      auto& vp = comp == 0 ? plus.p_kw : plus.q_kvar;
      auto& vm = comp == 0 ? minus.p_kw : minus.q_kvar;
      vp[mg_buses[w]] += h_kw;
      vm[mg_buses[w]] -= h_kw;
      PfSolution a = solve_pf(net, plus), b = solve_pf(net, minus);
      auto& target = comp == 0 ? s.dv_dp : s.dv_dq;
      for (int r = 0; r < m; ++r)
        target(r, static_cast<int>(w)) = (a.v[pq[r]] - b.v[pq[r]]) / (2.0 * h);
    }
  }
  return s;
}

}  // namespace mgopt
