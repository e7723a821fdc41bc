#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mgopt/network.hpp"

namespace mgopt::admm {

/// Penalty term handed to a zone solver: quadratic pull of the boundary
/// slice `slot` toward `target` with weight rho/2.
struct PenaltyTerm {
  int slot = 0;
  double rho = 0.0;
  Eigen::VectorXd target;
};

/// One zone as seen by the coordinator: an augmented-subproblem solver and
/// the extraction of boundary slices from its full solution. The solver
/// never sees another zone's interior variables.
struct Zone {
  std::function<Eigen::VectorXd(const std::vector<PenaltyTerm>&)> solve;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&, int slot)> boundary;
};

/// A consensus coupling: slot `slot_a` of zone_a mirrors slot `slot_b` of zone_b.
struct Coupling {
  int zone_a = 0, slot_a = 0;
  int zone_b = 0, slot_b = 0;
};

enum class Strategy { Fixed, Adaptive, Improved };

inline Strategy strategy_from(const std::string& s) {
  if (s == "fixed") return Strategy::Fixed;
  if (s == "adaptive") return Strategy::Adaptive;
  if (s == "improved") return Strategy::Improved;
  throw std::invalid_argument("unknown ADMM strategy: " + s);
}

inline double primal_residual(const Eigen::VectorXd& x_a, const Eigen::VectorXd& x_b) {
  return (x_a - x_b).norm();
}

inline double dual_residual(const Eigen::VectorXd& x, const Eigen::VectorXd& x_prev) {
  return (x - x_prev).norm();
}

/// Residual-balancing update with the corrected branch directions: both
/// factors exceed 1, the increase branch raises rho, the decrease branch
/// lowers it. Zero residuals are treated as the hold branch.
inline constexpr double kRhoMin = 1e-1;
#ifndef MGOPT_RHO_MAX
#define MGOPT_RHO_MAX 1e5
#endif
inline constexpr double kRhoMax = MGOPT_RHO_MAX;
#ifndef MGOPT_FIRE_RELAX
#define MGOPT_FIRE_RELAX 1.35
#endif
// relaxation applied on iterations where the penalty changed (see run())
inline constexpr double kFireRelaxation = MGOPT_FIRE_RELAX;

inline double update_penalty_adaptive(double rho, double r, double d, double mu_ratio,
                                      bool allow_increase = true) {
  if (r <= 0.0 || d <= 0.0) return rho;
  double rho_new = rho;
  if (d < r / mu_ratio) {
    // near the tolerance a stiffer penalty can only slow the final
    // contraction, so increases are suppressed there by the caller
    if (allow_increase) rho_new = rho * (1.0 + std::log10(r / d));
  } else if (d > mu_ratio * r) {
    rho_new = rho / (1.0 + std::log10(d / r));
  }
  // clamped to keep the augmented subproblems numerically solvable
  return std::clamp(rho_new, kRhoMin, kRhoMax);
}

/// Per-coupling ADMM state: boundary copies, averaged reference, scaled
/// duals, penalty and the consecutive-judgment counters.
struct ConsensusState {
  Eigen::VectorXd x_a, x_b;       // local boundary copies
  Eigen::VectorXd x_a_prev, x_b_prev;
  Eigen::VectorXd x_ref;          // averaged reference X_K
  Eigen::VectorXd u_a, u_b;       // scaled duals (u = lambda / rho)
  double rho = 0.0;
  double omega = 1.0;             // rho_prev / rho_current after a change, else 1
  int tau1 = 0, tau2 = 0;         // consecutive increase / decrease counts
};

/// Counter-gated penalty update: the adaptive rule fires only after sigma
/// consecutive identical judgments; any disagreement or hold resets.
inline void update_penalty_improved(ConsensusState& st, double r, double d,
                                    const AdmmConfig& cfg, bool allow_increase = true) {
  int judge = 0;  // +1 increase, -1 decrease, 0 hold
  if (r > 0.0 && d > 0.0) {
    if (d < r / cfg.mu_ratio) judge = allow_increase ? 1 : 0;
    else if (d > cfg.mu_ratio * r) judge = -1;
  }
  if (judge == 1) {
    st.tau1 += 1;
    st.tau2 = 0;
  } else if (judge == -1) {
    st.tau2 += 1;
    st.tau1 = 0;
  } else {
    st.tau1 = st.tau2 = 0;
  }
  st.omega = 1.0;
  if (st.tau1 >= cfg.sigma || st.tau2 >= cfg.sigma) {
    double rho_new = update_penalty_adaptive(st.rho, r, d, cfg.mu_ratio, allow_increase);
    if (rho_new != st.rho) st.omega = st.rho / rho_new;
    st.rho = rho_new;
    st.tau1 = st.tau2 = 0;
  }
}

/// u' = omega (u + x_a - x_ref); the omega factor keeps the unscaled
/// multiplier lambda = rho u continuous across penalty changes.
inline Eigen::VectorXd rescale_dual(const Eigen::VectorXd& u, double omega,
                                    const Eigen::VectorXd& x_a, const Eigen::VectorXd& x_ref) {
  if (omega <= 0.0) throw std::invalid_argument("rescale_dual: omega must be > 0");
  return omega * (u + x_a - x_ref);
}

struct TraceRow {
  int iter = 0;
  int coupling = 0;
  double r = 0.0, d = 0.0, rho = 0.0;
};

/// Per-iteration dual instrumentation, enough to reconstruct the unscaled
/// multiplier trajectory in tests.
struct DualRecord {
  int iter = 0;
  int coupling = 0;
  double rho_used = 0.0;        // rho active during the solve
  double omega = 0.0;
  Eigen::VectorXd x_a, x_b, x_ref, u_a, u_b;  // values after the update
};

struct Result {
  std::vector<Eigen::VectorXd> solutions;  // final full primal per zone
  std::vector<ConsensusState> states;
  std::vector<TraceRow> trace;
  std::vector<DualRecord> duals;
  int iterations = 0;
  bool converged = false;
};

/// Scaled consensus ADMM with neighbor averaging. Iteration 0 solves every
/// zone unpenalized to seed the boundary copies; convergence requires
/// r <= eps and d <= eps on every coupling simultaneously.
inline Result run(const std::vector<Zone>& zones, const std::vector<Coupling>& couplings,
                  const AdmmConfig& cfg, bool record_duals = false) {
  const Strategy strat = strategy_from(cfg.strategy);
  const int nc = static_cast<int>(couplings.size());
  Result res;
  res.solutions.resize(zones.size());
  res.states.resize(nc);

  // iteration 0: independent zone optima
  for (std::size_t z = 0; z < zones.size(); ++z) res.solutions[z] = zones[z].solve({});
  for (int k = 0; k < nc; ++k) {
    const Coupling& c = couplings[k];
    ConsensusState& st = res.states[k];
    st.x_a = zones[c.zone_a].boundary(res.solutions[c.zone_a], c.slot_a);
    st.x_b = zones[c.zone_b].boundary(res.solutions[c.zone_b], c.slot_b);
    st.x_ref = 0.5 * (st.x_a + st.x_b);
    st.u_a = Eigen::VectorXd::Zero(st.x_a.size());
    st.u_b = Eigen::VectorXd::Zero(st.x_b.size());
    st.rho = cfg.rho0;
  }
  if (nc == 0) {
    res.iterations = 1;
    res.converged = true;
    return res;
  }

  for (int m = 1; m <= cfg.max_iter; ++m) {
    res.iterations = m;
    for (int k = 0; k < nc; ++k) {
      res.states[k].x_a_prev = res.states[k].x_a;
      res.states[k].x_b_prev = res.states[k].x_b;
    }
    for (std::size_t z = 0; z < zones.size(); ++z) {
      std::vector<PenaltyTerm> terms;
      for (int k = 0; k < nc; ++k) {
        const Coupling& c = couplings[k];
        const ConsensusState& st = res.states[k];
        if (c.zone_a == static_cast<int>(z))
          terms.push_back({c.slot_a, st.rho, st.x_ref - st.u_a});
        else if (c.zone_b == static_cast<int>(z))
          terms.push_back({c.slot_b, st.rho, st.x_ref - st.u_b});
      }
      res.solutions[z] = zones[z].solve(terms);
    }

    bool all_converged = true;
    for (int k = 0; k < nc; ++k) {
      const Coupling& c = couplings[k];
      ConsensusState& st = res.states[k];
      st.x_a = zones[c.zone_a].boundary(res.solutions[c.zone_a], c.slot_a);
      st.x_b = zones[c.zone_b].boundary(res.solutions[c.zone_b], c.slot_b);
      double r = primal_residual(st.x_a, st.x_b);
      double d_a = dual_residual(st.x_a, st.x_a_prev);
      double d_b = dual_residual(st.x_b, st.x_b_prev);
      // convergence needs both copies settled; the penalty rule sees the
      // same worst-side residual (a copy pinned against persistent
      // disagreement reads as d << r, the signature of a too-weak penalty)
      double d = std::max(d_a, d_b);
      if (r > cfg.eps || d > cfg.eps) all_converged = false;

      double rho_used = st.rho;
      st.omega = 1.0;
      const bool allow_increase = r > 10.0 * cfg.eps;
      const double d_judge = d;
      if (strat == Strategy::Adaptive) {
        double rho_new = update_penalty_adaptive(st.rho, r, d_judge, cfg.mu_ratio, allow_increase);
        if (rho_new != st.rho) st.omega = st.rho / rho_new;
        st.rho = rho_new;
      } else if (strat == Strategy::Improved) {
        update_penalty_improved(st, r, d_judge, cfg, allow_increase);
      }

      // over-relaxed copies: mixing the fresh boundary values with the
      // previous reference damps the slow oscillatory consensus mode.
      // Reduced on iterations where the penalty changed: the dual
      // rescaling already perturbs the iterate, and extrapolating across
      // it sustains a residual limit cycle instead of damping it.
      const double a = st.omega == 1.0 ? cfg.relaxation
                                       : std::min(cfg.relaxation, kFireRelaxation);
      Eigen::VectorXd xr_a = a * st.x_a + (1.0 - a) * st.x_ref;
      Eigen::VectorXd xr_b = a * st.x_b + (1.0 - a) * st.x_ref;
      // reference first, duals against the new reference: this keeps
      // u_a + u_b = 0, the consensus fixpoint invariant
      st.x_ref = 0.5 * (xr_a + xr_b);
      st.u_a = rescale_dual(st.u_a, st.omega, xr_a, st.x_ref);
      st.u_b = rescale_dual(st.u_b, st.omega, xr_b, st.x_ref);

      res.trace.push_back({m, k, r, d, rho_used});
      if (record_duals)
        res.duals.push_back({m, k, rho_used, st.omega, st.x_a, st.x_b, st.x_ref, st.u_a, st.u_b});
    }
    if (all_converged) {
      res.converged = true;
      break;
    }
  }
  return res;
}

}  // namespace mgopt::admm
