#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "mgopt/cvx.hpp"
#include "mgopt/network.hpp"

namespace mgopt {

struct CostBreakdown {
  double mt_op = 0.0, mt_fu = 0.0;
  double de_op = 0.0, de_fu = 0.0;
  double bess = 0.0;
  double total() const { return mt_op + mt_fu + de_op + de_fu + bess; }
};

struct MgSchedule {
  std::vector<double> p_mt, p_de, p_bess_dis, p_bess_ch, soc;  // per hour
  std::vector<double> p_pcc;  // tie-line import from the DN [kW], echo of the input
  CostBreakdown cost;
  double objective = 0.0;     // solver objective [$]
};

/// Dispatch program variables, per hour t: [p_mt, p_de, p_ch, p_dis, soc].
struct DispatchProgram {
  cvx::ConvexProgram prog;
  int T = 0;
  double const_cost = 0.0;    // constant fuel-curve term carried outside the solver
  std::vector<double> pcc;    // import schedule [kW]
  const MgConfig* cfg = nullptr;
  const std::vector<double>* gas_price = nullptr;

  int i_mt(int t) const { return 5 * t; }
  int i_de(int t) const { return 5 * t + 1; }
  int i_ch(int t) const { return 5 * t + 2; }
  int i_dis(int t) const { return 5 * t + 3; }
  int i_soc(int t) const { return 5 * t + 4; }
};

/// 24-hour economic dispatch of one MG with the tie-line schedule imposed
/// as an hourly equality. pcc_import is the power drawn from the DN
/// (positive = import), i.e. the negative of the DN-side PCC injection.
inline DispatchProgram build_dispatch(const MgConfig& cfg,
                                      const std::vector<double>& pcc_import,
                                      const std::vector<double>& gas_price) {
  const int T = static_cast<int>(cfg.load.size());
  if (static_cast<int>(pcc_import.size()) != T || static_cast<int>(gas_price.size()) != T)
    throw std::invalid_argument("dispatch: schedule and price arrays must match the horizon");

  DispatchProgram dp;
  dp.T = T;
  dp.pcc = pcc_import;
  dp.cfg = &cfg;
  dp.gas_price = &gas_price;
  cvx::ConvexProgram p = cvx::ConvexProgram::sized(5 * T);

  const double dt = 1.0;  // hourly scheduling
  const double de_base = cfg.de.fuel_p_base > 0.0 ? cfg.de.fuel_p_base : 1.0;
  for (int t = 0; t < T; ++t) {
    // device boxes
    p.lb(dp.i_mt(t)) = cfg.mt.p_min;
    p.ub(dp.i_mt(t)) = cfg.mt.p_max;
    p.lb(dp.i_de(t)) = cfg.de.p_min;
    p.ub(dp.i_de(t)) = cfg.de.p_max;
    p.lb(dp.i_ch(t)) = 0.0;
    p.ub(dp.i_ch(t)) = cfg.bess.p_max;
    p.lb(dp.i_dis(t)) = 0.0;
    p.ub(dp.i_dis(t)) = cfg.bess.p_max;
    p.lb(dp.i_soc(t)) = cfg.bess.soc_min;
    p.ub(dp.i_soc(t)) = cfg.bess.soc_max;

    // costs: MT O&M + linear gas fuel, DE O&M + quadratic fuel, BESS throughput
    p.c(dp.i_mt(t)) = cfg.mt.k_op * dt + gas_price[t] * dt / (cfg.mt.eta * cfg.mt.l_g);
    p.c(dp.i_de(t)) = cfg.de.k_op * dt + cfg.de.k_fu * cfg.de.beta / de_base * dt;
    p.Q(dp.i_de(t), dp.i_de(t)) = 2.0 * cfg.de.k_fu * cfg.de.alpha / (de_base * de_base) * dt;
    p.c(dp.i_ch(t)) = cfg.bess.zeta;
    p.c(dp.i_dis(t)) = cfg.bess.zeta;
    dp.const_cost += cfg.de.k_fu * cfg.de.gamma * dt;
  }

  // equalities: hourly balance and the SOC recursion
  int n_eq = 2 * T;
  p.A = Eigen::MatrixXd::Zero(n_eq, p.n);
  p.b = Eigen::VectorXd::Zero(n_eq);
  for (int t = 0; t < T; ++t) {
    // P_MT + P_DE + (P_dis - P_ch) + P_pcc = P_load - P_PV - P_Wind
    p.A(t, dp.i_mt(t)) = 1.0;
    p.A(t, dp.i_de(t)) = 1.0;
    p.A(t, dp.i_dis(t)) = 1.0;
    p.A(t, dp.i_ch(t)) = -1.0;
    p.b(t) = cfg.load[t] - cfg.pv[t] - cfg.wind[t] - pcc_import[t];
    // soc_t - soc_{t-1} - eta_ch p_ch dt / E + p_dis dt / (eta_dis E) = 0
    int r = T + t;
    p.A(r, dp.i_soc(t)) = 1.0;
    if (t > 0) p.A(r, dp.i_soc(t - 1)) = -1.0;
    p.A(r, dp.i_ch(t)) = -cfg.bess.eta_ch * dt / cfg.bess.capacity;
    p.A(r, dp.i_dis(t)) = dt / (cfg.bess.eta_dis * cfg.bess.capacity);
    p.b(r) = t == 0 ? cfg.bess.soc0 : 0.0;
  }

  // ramping, anchored at the configured initial power
  int n_in = 4 * T;
  p.G = Eigen::MatrixXd::Zero(n_in, p.n);
  p.h = Eigen::VectorXd::Zero(n_in);
  int row = 0;
  auto ramp = [&](int idx_t, int idx_prev, double up, double down, double init, bool first) {
    p.G(row, idx_t) = 1.0;
    if (!first) p.G(row, idx_prev) = -1.0;
    p.h(row) = up * dt + (first ? init : 0.0);
    ++row;
    p.G(row, idx_t) = -1.0;
    if (!first) p.G(row, idx_prev) = 1.0;
    p.h(row) = down * dt - (first ? init : 0.0);
    ++row;
  };
  for (int t = 0; t < T; ++t) {
    ramp(dp.i_mt(t), t ? dp.i_mt(t - 1) : 0, cfg.mt.ramp_up, cfg.mt.ramp_down, cfg.mt.p_init,
         t == 0);
    ramp(dp.i_de(t), t ? dp.i_de(t - 1) : 0, cfg.de.ramp_up, cfg.de.ramp_down, cfg.de.p_init,
         t == 0);
  }
  dp.prog = std::move(p);
  return dp;
}

/// Cost breakdown of a schedule, by direct evaluation of the cost model.
inline CostBreakdown evaluate_cost(const MgSchedule& s, const MgConfig& cfg,
                                   const std::vector<double>& gas_price) {
  CostBreakdown c;
  const double dt = 1.0;
  const double de_base = cfg.de.fuel_p_base > 0.0 ? cfg.de.fuel_p_base : 1.0;
  for (std::size_t t = 0; t < s.p_mt.size(); ++t) {
    c.mt_op += cfg.mt.k_op * s.p_mt[t] * dt;
    c.mt_fu += gas_price[t] * s.p_mt[t] * dt / (cfg.mt.eta * cfg.mt.l_g);
    c.de_op += cfg.de.k_op * s.p_de[t] * dt;
    double pn = s.p_de[t] / de_base;
    c.de_fu += cfg.de.k_fu * (cfg.de.alpha * pn * pn + cfg.de.beta * pn + cfg.de.gamma) * dt;
    c.bess += cfg.bess.zeta * (s.p_bess_ch[t] + s.p_bess_dis[t]);
  }
  return c;
}

class DispatchError : public std::runtime_error {
 public:
  explicit DispatchError(const std::string& what) : std::runtime_error(what) {}
};

inline MgSchedule solve_dispatch(const DispatchProgram& dp) {
  cvx::KktSolution sol = cvx::solve(dp.prog);
  if (sol.status != cvx::Status::Optimal) {
    // name the most violated balance hour for infeasibility diagnostics
    std::string detail;
    if (dp.prog.A.rows()) {
      Eigen::VectorXd res = dp.prog.A * sol.x - dp.prog.b;
      int worst = 0;
      res.head(dp.T).cwiseAbs().maxCoeff(&worst);
      detail = " (largest balance residual at hour " + std::to_string(worst) + ")";
    }
    throw DispatchError(std::string("dispatch not solvable: ") + cvx::to_string(sol.status) +
                        detail);
  }
  MgSchedule s;
  s.p_mt.resize(dp.T);
  s.p_de.resize(dp.T);
  s.p_bess_ch.resize(dp.T);
  s.p_bess_dis.resize(dp.T);
  s.soc.resize(dp.T);
  s.p_pcc = dp.pcc;
  for (int t = 0; t < dp.T; ++t) {
    s.p_mt[t] = sol.x(dp.i_mt(t));
    s.p_de[t] = sol.x(dp.i_de(t));
    s.p_bess_ch[t] = sol.x(dp.i_ch(t));
    s.p_bess_dis[t] = sol.x(dp.i_dis(t));
    s.soc[t] = sol.x(dp.i_soc(t));
  }
  s.cost = evaluate_cost(s, *dp.cfg, *dp.gas_price);
  s.objective = dp.prog.objective(sol.x) + dp.const_cost;
  return s;
}

}  // namespace mgopt
