#pragma once

#include <array>
#include <cmath>
#include <map>
#include <utility>
#include <vector>

#include "mgopt/cvx.hpp"
#include "mgopt/network.hpp"
#include "mgopt/zoning.hpp"

namespace mgopt {

/// Tie-line capability window for one MG at one hour, in p.u. on the DN side
/// (positive = MG injecting into the DN).
struct PccLimit {
  double p_min = 0.0, p_max = 0.0;
  double q_abs = 0.0;
};

/// Per-hour network data in p.u.: loads, PV MPPT output and ratings, PCC windows.
struct HourData {
  std::vector<double> load_p, load_q;  // per bus
  std::vector<double> pv_p, pv_s;      // per bus; zero where no PV
  std::vector<PccLimit> pcc;           // per MG
};

inline HourData hour_data(const Network& net, int t, const std::vector<PccLimit>& pcc) {
  const int n = static_cast<int>(net.buses.size());
  HourData hd;
  hd.load_p.resize(n);
  hd.load_q.resize(n);
  hd.pv_p.assign(n, 0.0);
  hd.pv_s.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    hd.load_p[i] = net.to_pu(net.buses[i].load_p[t]);
    hd.load_q[i] = net.to_pu(net.buses[i].load_q[t]);
    if (net.buses[i].pv) {
      hd.pv_p[i] = net.to_pu(net.buses[i].pv->p_mppt[t]);
      hd.pv_s[i] = net.to_pu(net.buses[i].pv->capacity_s);
    }
  }
  hd.pcc = pcc;
  return hd;
}

struct ObjectiveBounds {
  double f1_min = 0.0, f1_max = 0.0;
  double f2_min = 0.0, f2_max = 0.0;
};

/// Membership degree of Eq.-(4) shape: 1 below f_min, 0 above f_max,
/// linear in between.
inline double membership(double f, double f_min, double f_max) {
  if (f <= f_min) return 1.0;
  if (f > f_max) return 0.0;
  return (f_max - f) / (f_max - f_min);
}

constexpr double kPvTanLimit = 0.32868605869036580;  // tan(acos(0.95))

/// Ridge weight of the uniqueness regularization shared by the zone
/// subproblems and the centralized reference.
#ifndef MGOPT_RIDGE
#define MGOPT_RIDGE 3.0
#endif
constexpr double kRidge = MGOPT_RIDGE;
// weight of the satisfaction objective against the (fixed-scale) consensus
// penalty; sets where rho_0 sits relative to the optimal penalty
#ifndef MGOPT_PHI_WEIGHT
#define MGOPT_PHI_WEIGHT 1.0
#endif
constexpr double kPhiWeight = MGOPT_PHI_WEIGHT;

/// Minimum payoff-window widths [p.u. scale of f1/f2]; see
/// compute_objective_bounds.
#ifndef MGOPT_FLOOR_F1
#define MGOPT_FLOOR_F1 5e-2
#endif
#ifndef MGOPT_FLOOR_F2
#define MGOPT_FLOOR_F2 1e-1
#endif
constexpr double kPayoffFloorF1 = MGOPT_FLOOR_F1;
constexpr double kPayoffFloorF2 = MGOPT_FLOOR_F2;

/// A PV bus gets a reactive-power variable only when it has genuine
/// headroom: a nonzero power-factor window and strictly positive inverter
/// margin. Otherwise q is identically zero and modelling it would leave
/// the feasible set without a strict interior.
inline bool pv_has_q_headroom(double p_mppt, double s_cap) {
  return kPvTanLimit * p_mppt > 1e-12 && s_cap * s_cap - p_mppt * p_mppt > 1e-12;
}

/// One zone's convex program: LinDistFlow constraints, PV and PCC limits,
/// voltage-deviation slack pairs, and (once bounds are attached) the
/// max-satisfaction objective with its two membership rows.
class ZoneModel {
 public:
  ZoneModel(const Network& net, ZonePartition part, int zone, const HourData& hd)
      : net_(&net), part_(std::move(part)), zone_(zone) {
    build_core(hd);
  }

  int zone_id() const { return zone_; }
  const cvx::ConvexProgram& core() const { return core_; }
  int core_vars() const { return core_.n; }

  /// Variable indices of the boundary vector {P, Q, U_from, U_to} for
  /// overlap branch `ov` (an index into the partition's overlap list).
  std::array<int, 4> boundary_indices(int ov) const {
    const OverlapBranch& o = part_.overlaps[ov];
    const Branch& br = net_->branches[o.branch];
    return {p_idx_.at(o.branch), q_idx_.at(o.branch),
            u_idx_.at(net_->index_of(br.from_bus)), u_idx_.at(net_->index_of(br.to_bus))};
  }
  bool touches_overlap(int ov) const {
    return part_.overlaps[ov].zone_a == zone_ || part_.overlaps[ov].zone_b == zone_;
  }

  const std::vector<int>& member_nodes() const { return members_; }
  const std::vector<int>& branch_ids() const { return branch_ids_; }
  const std::vector<int>& pv_buses() const { return pv_buses_; }
  const std::vector<int>& mg_ids() const { return mg_ids_; }
  int u_index(int bus) const { return u_idx_.at(bus); }
  bool has_pv_q(int bus) const { return qpv_idx_.count(bus) != 0; }
  int pv_q_index(int bus) const { return qpv_idx_.at(bus); }
  int pcc_p_index(int mg) const { return ppcc_idx_.at(mg); }
  int pcc_q_index(int mg) const { return qpcc_idx_.at(mg); }
  int phi_index() const { return phi_idx_; }

  /// (f1 [p.u.^2 loss proxy], f2 [p.u.^2 deviation]) at a solution of
  /// either the core or the full program.
  std::pair<double, double> evaluate_objectives(const Eigen::VectorXd& x) const {
    double f1 = 0.0;
    for (std::size_t k = 0; k < branch_ids_.size(); ++k) {
      const Branch& br = net_->branches[branch_ids_[k]];
      double p = x(p_idx_.at(branch_ids_[k])), q = x(q_idx_.at(branch_ids_[k]));
      f1 += br.r * (p * p + q * q);
    }
    double f2 = 0.0;
    for (int bus : members_) f2 += std::abs(x(u_idx_.at(bus)) - u_spec_);
    return {f1, f2};
  }

  /// Single-objective payoff-table bounds: each f minimized alone, the max
  /// taken over the other objective's minimizer and the zero-control
  /// baseline, guarded against degeneracy.
  ObjectiveBounds compute_objective_bounds() const {
    auto run = [&](const cvx::ConvexProgram& p, const char* what) {
      cvx::KktSolution s = cvx::solve(p);
      if (s.status != cvx::Status::Optimal)
        throw cvx::SolverError(std::string("zone ") + std::to_string(zone_) + " " + what +
                               " bound problem: " + cvx::to_string(s.status));
      return s;
    };
    cvx::ConvexProgram p1 = core_;
    for (std::size_t k = 0; k < branch_ids_.size(); ++k) {
      const Branch& br = net_->branches[branch_ids_[k]];
      p1.Q(p_idx_.at(branch_ids_[k]), p_idx_.at(branch_ids_[k])) += 2.0 * br.r;
      p1.Q(q_idx_.at(branch_ids_[k]), q_idx_.at(branch_ids_[k])) += 2.0 * br.r;
    }
    // tiny slack-pair cost removes the flat (sp, sn) ray that would
    // otherwise stall the interior-point method; f1 itself is untouched
    for (int bus : members_) {
      p1.c(sp_idx_.at(bus)) += 1e-6;
      p1.c(sn_idx_.at(bus)) += 1e-6;
    }
    cvx::KktSolution s1 = run(p1, "loss");

    cvx::ConvexProgram p2 = core_;
    for (int bus : members_) {
      p2.c(sp_idx_.at(bus)) += 1.0;
      p2.c(sn_idx_.at(bus)) += 1.0;
    }
    // tiny flow regularization: the voltage objective leaves circulating
    // flow directions free, which would otherwise inflate the f1 payoff
    for (int bid : branch_ids_) {
      p2.Q(p_idx_.at(bid), p_idx_.at(bid)) += 1e-6;
      p2.Q(q_idx_.at(bid), q_idx_.at(bid)) += 1e-6;
    }
    cvx::KktSolution s2 = run(p2, "voltage");

    auto [f1_at_s1, f2_at_s1] = evaluate_objectives(s1.x);
    auto [f1_at_s2, f2_at_s2] = evaluate_objectives(s2.x);
    ObjectiveBounds b;
    b.f1_min = f1_at_s1;
    b.f2_min = f2_at_s2;
    b.f1_max = f1_at_s2;
    b.f2_max = f2_at_s1;

    // zero-control baseline: PV at unity power factor, no MG exchange
    cvx::ConvexProgram p0 = p2;
    auto pin = [&p0](int idx) {
      int ar = static_cast<int>(p0.A.rows());
      p0.A.conservativeResize(ar + 1, Eigen::NoChange);
      p0.b.conservativeResize(ar + 1);
      p0.A.row(ar).setZero();
      p0.A(ar, idx) = 1.0;
      p0.b(ar) = 0.0;
    };
    for (int bus : pv_buses_) pin(qpv_idx_.at(bus));
    for (int mg : mg_ids_) {
      pin(ppcc_idx_.at(mg));
      pin(qpcc_idx_.at(mg));
    }
    cvx::KktSolution s0 = cvx::solve(p0);
    if (s0.status == cvx::Status::Optimal) {
      auto [f1_0, f2_0] = evaluate_objectives(s0.x);
      b.f1_max = std::max(b.f1_max, f1_0);
      b.f2_max = std::max(b.f2_max, f2_0);
    }
    // floor on the payoff window widths: a zone whose attainable loss or
    // deviation range is physically negligible would otherwise get a
    // near-vertical membership slope (1/width), which is meaningless as a
    // preference and numerically stiff for the coordinator
    if (b.f1_max - b.f1_min < kPayoffFloorF1) b.f1_max = b.f1_min + kPayoffFloorF1;
    if (b.f2_max - b.f2_min < kPayoffFloorF2) b.f2_max = b.f2_min + kPayoffFloorF2;
    return b;
  }

  /// The full subproblem: max phi subject to the core constraints plus the
  /// two membership rows from the given bounds.
  cvx::ConvexProgram build_subproblem(const ObjectiveBounds& b) {
    if (!(b.f1_max > b.f1_min) || !(b.f2_max > b.f2_min))
      throw std::invalid_argument("degenerate objective bounds: f_max <= f_min (guard upstream)");
    bounds_ = b;
    cvx::ConvexProgram p = core_;
    // small ridge centered on the nominal point (flat voltage, zero flows
    // and controls) makes the optimizer unique: the max-min objective alone
    // leaves flat optimal faces, and a coordinator pulling on boundary
    // variables needs the argmin to move continuously
    p.Q.diagonal().array() += 2.0 * kRidge;
    for (auto& [bus, iu] : u_idx_) p.c(iu) -= 2.0 * kRidge * u_spec_;
    const int nv = p.n;
    phi_idx_ = nv;
    p.n = nv + 1;
    p.Q.conservativeResize(p.n, p.n);
    p.Q.row(nv).setZero();
    p.Q.col(nv).setZero();
    p.c.conservativeResize(p.n);
    p.c(nv) = -kPhiWeight;  // max phi
    p.A.conservativeResize(Eigen::NoChange, p.n);
    if (p.A.rows()) p.A.col(nv).setZero();
    p.G.conservativeResize(Eigen::NoChange, p.n);
    if (p.G.rows()) p.G.col(nv).setZero();
    p.lb.conservativeResize(p.n);
    p.ub.conservativeResize(p.n);
    // phi is capped at full satisfaction but open below: when consensus
    // forces a zone outside its locally computed payoff window, satisfaction
    // saturates negative instead of making the subproblem infeasible
    p.lb(nv) = -cvx::kInf;
    p.ub(nv) = 1.0;
    for (auto& qc : p.qineq) {
      qc.P.conservativeResize(p.n, p.n);
      qc.P.row(nv).setZero();
      qc.P.col(nv).setZero();
      qc.q.conservativeResize(p.n);
      qc.q(nv) = 0.0;
    }

    // phi <= mu_1: f1/d1 + phi <= f1_max/d1, quadratic in the flows
    double d1 = b.f1_max - b.f1_min;
    cvx::QuadIneq mu1;
    mu1.P = Eigen::MatrixXd::Zero(p.n, p.n);
    mu1.q = Eigen::VectorXd::Zero(p.n);
    for (int bid : branch_ids_) {
      const Branch& br = net_->branches[bid];
      mu1.P(p_idx_.at(bid), p_idx_.at(bid)) += 2.0 * br.r / d1;
      mu1.P(q_idx_.at(bid), q_idx_.at(bid)) += 2.0 * br.r / d1;
    }
    mu1.q(phi_idx_) = 1.0;
    mu1.r = -b.f1_max / d1;
    p.qineq.push_back(std::move(mu1));

    // phi <= mu_2: f2/d2 + phi <= f2_max/d2, linear in the slack pairs
    double d2 = b.f2_max - b.f2_min;
    int gr = static_cast<int>(p.G.rows());
    p.G.conservativeResize(gr + 1, Eigen::NoChange);
    p.h.conservativeResize(gr + 1);
    p.G.row(gr).setZero();
    for (int bus : members_) {
      p.G(gr, sp_idx_.at(bus)) = 1.0 / d2;
      p.G(gr, sn_idx_.at(bus)) = 1.0 / d2;
    }
    p.G(gr, phi_idx_) = 1.0;
    p.h(gr) = b.f2_max / d2;
    return p;
  }

  const ObjectiveBounds& bounds() const { return bounds_; }

 private:
  void build_core(const HourData& hd) {
    const Network& net = *net_;
    const RootedTree tree = root_at_slack(net);
    const int n = static_cast<int>(net.buses.size());
    const int slack = net.slack_index();
    u_spec_ = 1.0;  // V_spec = 1.0 p.u.

    std::vector<char> in_zone(n, 0);
    for (int i = 0; i < n; ++i)
      if (part_.assignment[i] == zone_) {
        in_zone[i] = 1;
        members_.push_back(i);
      }
    std::vector<char> is_node(in_zone);
    for (std::size_t e = 0; e < net.branches.size(); ++e) {
      int a = net.index_of(net.branches[e].from_bus);
      int b = net.index_of(net.branches[e].to_bus);
      if (in_zone[a] && in_zone[b]) {
        branch_ids_.push_back(static_cast<int>(e));
      } else if (in_zone[a] || in_zone[b]) {
        branch_ids_.push_back(static_cast<int>(e));  // overlap copy
        is_node[a] = is_node[b] = 1;                 // ghost endpoint carries a U copy
      }
    }

    int nv = 0;
    for (int bid : branch_ids_) {
      p_idx_[bid] = nv++;
      q_idx_[bid] = nv++;
    }
    for (int i = 0; i < n; ++i)
      if (is_node[i]) u_idx_[i] = nv++;
    for (int i : members_) {
      if (net.buses[i].pv && pv_has_q_headroom(hd.pv_p[i], hd.pv_s[i])) {
        pv_buses_.push_back(i);
        qpv_idx_[i] = nv++;
      }
      if (net.buses[i].kind == BusKind::MgPcc) {
        mg_ids_.push_back(net.buses[i].mg);
        ppcc_idx_[net.buses[i].mg] = nv++;
        qpcc_idx_[net.buses[i].mg] = nv++;
      }
      sp_idx_[i] = nv++;
      sn_idx_[i] = nv++;
    }

    cvx::ConvexProgram p = cvx::ConvexProgram::sized(nv);

    // bounds
    const double u_lo = (1.0 - net.eps_v) * (1.0 - net.eps_v);
    const double u_hi = (1.0 + net.eps_v) * (1.0 + net.eps_v);
    for (auto& [bus, iu] : u_idx_) {
      p.lb(iu) = u_lo;
      p.ub(iu) = u_hi;
    }
    for (int bus : pv_buses_) {
      double qmax = kPvTanLimit * hd.pv_p[bus];
      p.lb(qpv_idx_[bus]) = -qmax;
      p.ub(qpv_idx_[bus]) = qmax;
    }
    for (int mg : mg_ids_) {
      p.lb(ppcc_idx_[mg]) = hd.pcc[mg].p_min;
      p.ub(ppcc_idx_[mg]) = hd.pcc[mg].p_max;
      p.lb(qpcc_idx_[mg]) = -hd.pcc[mg].q_abs;
      p.ub(qpcc_idx_[mg]) = hd.pcc[mg].q_abs;
    }
    for (int i : members_) {
      p.lb(sp_idx_[i]) = 0.0;
      p.lb(sn_idx_[i]) = 0.0;
    }

    // equality rows: balance per non-slack member, voltage drop per branch,
    // slack anchor, slack-pair identities
    std::vector<Eigen::VectorXd> rows;
    std::vector<double> rhs;
    auto add_row = [&](Eigen::VectorXd r, double v) {
      rows.push_back(std::move(r));
      rhs.push_back(v);
    };

    for (int j : members_) {
      if (j == slack) continue;
      Eigen::VectorXd r = Eigen::VectorXd::Zero(nv);
      // incoming parent flow
      int pb = tree.parent_branch[j];
      r(p_idx_.at(pb)) = 1.0;
      for (std::size_t k = 0; k < tree.children[j].size(); ++k)
        r(p_idx_.at(tree.child_branch[j][k])) = -1.0;
      if (net.buses[j].kind == BusKind::MgPcc) r(ppcc_idx_.at(net.buses[j].mg)) = 1.0;
      add_row(r, hd.load_p[j] - hd.pv_p[j]);
      Eigen::VectorXd rq = Eigen::VectorXd::Zero(nv);
      rq(q_idx_.at(pb)) = 1.0;
      for (std::size_t k = 0; k < tree.children[j].size(); ++k)
        rq(q_idx_.at(tree.child_branch[j][k])) = -1.0;
      if (qpv_idx_.count(j)) rq(qpv_idx_.at(j)) = 1.0;
      if (net.buses[j].kind == BusKind::MgPcc) rq(qpcc_idx_.at(net.buses[j].mg)) = 1.0;
      add_row(rq, hd.load_q[j]);
    }
    for (int bid : branch_ids_) {
      const Branch& br = net.branches[bid];
      int a = net.index_of(br.from_bus), b = net.index_of(br.to_bus);
      // orient along the tree: U_child = U_parent - 2(r P + x Q)
      int child = tree.parent[a] == b ? a : b;
      int parent = child == a ? b : a;
      Eigen::VectorXd r = Eigen::VectorXd::Zero(nv);
      r(u_idx_.at(child)) = 1.0;
      r(u_idx_.at(parent)) = -1.0;
      r(p_idx_.at(bid)) = 2.0 * br.r;
      r(q_idx_.at(bid)) = 2.0 * br.x;
      add_row(r, 0.0);
    }
    if (in_zone[slack]) {
      Eigen::VectorXd r = Eigen::VectorXd::Zero(nv);
      r(u_idx_.at(slack)) = 1.0;
      add_row(r, net.v_ref * net.v_ref);
    }
    for (int i : members_) {
      Eigen::VectorXd r = Eigen::VectorXd::Zero(nv);
      r(u_idx_.at(i)) = 1.0;
      r(sp_idx_.at(i)) = -1.0;
      r(sn_idx_.at(i)) = 1.0;
      add_row(r, u_spec_);
    }
    p.A.resize(static_cast<int>(rows.size()), nv);
    p.b.resize(static_cast<int>(rows.size()));
    for (std::size_t k = 0; k < rows.size(); ++k) {
      p.A.row(static_cast<int>(k)) = rows[k];
      p.b(static_cast<int>(k)) = rhs[k];
    }

    // PV inverter capacity kept as a convex quadratic row
    for (int bus : pv_buses_) {
      cvx::QuadIneq qc;
      qc.P = Eigen::MatrixXd::Zero(nv, nv);
      qc.P(qpv_idx_[bus], qpv_idx_[bus]) = 2.0;
      qc.q = Eigen::VectorXd::Zero(nv);
      qc.r = hd.pv_p[bus] * hd.pv_p[bus] - hd.pv_s[bus] * hd.pv_s[bus];
      p.qineq.push_back(std::move(qc));
    }
    core_ = std::move(p);
  }

  const Network* net_;
  ZonePartition part_;
  int zone_;
  double u_spec_ = 1.0;
  std::vector<int> members_, branch_ids_, pv_buses_, mg_ids_;
  std::map<int, int> p_idx_, q_idx_, u_idx_, qpv_idx_, ppcc_idx_, qpcc_idx_, sp_idx_, sn_idx_;
  int phi_idx_ = -1;
  cvx::ConvexProgram core_;
  ObjectiveBounds bounds_;
};

/// The whole-network reference problem: all zone variables with overlap
/// copies merged, objective max sum phi_a with the same per-zone bounds.
struct CentralizedModel {
  cvx::ConvexProgram prog;
  std::vector<int> phi_idx;               // per zone
  std::map<int, int> u_idx, qpv_idx, ppcc_idx, qpcc_idx;
  std::map<int, int> p_idx, q_idx;        // per branch

  double objective(const Eigen::VectorXd& x) const {
    double s = 0.0;
    for (int i : phi_idx) s += x(i);
    return s;
  }
};

inline CentralizedModel build_centralized(const Network& net, const ZonePartition& part,
                                          const HourData& hd,
                                          const std::vector<ObjectiveBounds>& bounds) {
  const RootedTree tree = root_at_slack(net);
  const int n = static_cast<int>(net.buses.size());
  const int slack = net.slack_index();
  const double u_spec = 1.0;

  CentralizedModel m;
  std::map<int, int> sp_idx, sn_idx;
  int nv = 0;
  for (std::size_t e = 0; e < net.branches.size(); ++e) {
    m.p_idx[static_cast<int>(e)] = nv++;
    m.q_idx[static_cast<int>(e)] = nv++;
  }
  for (int i = 0; i < n; ++i) m.u_idx[i] = nv++;
  std::vector<int> pv_buses, mg_ids;
  for (int i = 0; i < n; ++i) {
    if (net.buses[i].pv && pv_has_q_headroom(hd.pv_p[i], hd.pv_s[i])) {
      pv_buses.push_back(i);
      m.qpv_idx[i] = nv++;
    }
    if (net.buses[i].kind == BusKind::MgPcc) {
      mg_ids.push_back(net.buses[i].mg);
      m.ppcc_idx[net.buses[i].mg] = nv++;
      m.qpcc_idx[net.buses[i].mg] = nv++;
    }
  }
  for (int i = 0; i < n; ++i) {
    sp_idx[i] = nv++;
    sn_idx[i] = nv++;
  }
  for (int z = 0; z < part.zone_count; ++z) m.phi_idx.push_back(nv++);

  cvx::ConvexProgram p = cvx::ConvexProgram::sized(nv);
  const double u_lo = (1.0 - net.eps_v) * (1.0 - net.eps_v);
  const double u_hi = (1.0 + net.eps_v) * (1.0 + net.eps_v);
  for (int i = 0; i < n; ++i) {
    p.lb(m.u_idx[i]) = u_lo;
    p.ub(m.u_idx[i]) = u_hi;
    p.lb(sp_idx[i]) = 0.0;
    p.lb(sn_idx[i]) = 0.0;
  }
  for (int bus : pv_buses) {
    double qmax = kPvTanLimit * hd.pv_p[bus];
    p.lb(m.qpv_idx[bus]) = -qmax;
    p.ub(m.qpv_idx[bus]) = qmax;
    cvx::QuadIneq qc;
    qc.P = Eigen::MatrixXd::Zero(nv, nv);
    qc.P(m.qpv_idx[bus], m.qpv_idx[bus]) = 2.0;
    qc.q = Eigen::VectorXd::Zero(nv);
    qc.r = hd.pv_p[bus] * hd.pv_p[bus] - hd.pv_s[bus] * hd.pv_s[bus];
    p.qineq.push_back(std::move(qc));
  }
  for (int mg : mg_ids) {
    p.lb(m.ppcc_idx[mg]) = hd.pcc[mg].p_min;
    p.ub(m.ppcc_idx[mg]) = hd.pcc[mg].p_max;
    p.lb(m.qpcc_idx[mg]) = -hd.pcc[mg].q_abs;
    p.ub(m.qpcc_idx[mg]) = hd.pcc[mg].q_abs;
  }
  for (int z = 0; z < part.zone_count; ++z) {
    p.lb(m.phi_idx[z]) = -cvx::kInf;  // open below, same as the zone subproblems
    p.ub(m.phi_idx[z]) = 1.0;
  }

  std::vector<Eigen::VectorXd> rows;
  std::vector<double> rhs;
  auto add_row = [&](Eigen::VectorXd r, double v) {
    rows.push_back(std::move(r));
    rhs.push_back(v);
  };
  for (int j = 0; j < n; ++j) {
    if (j == slack) continue;
    Eigen::VectorXd r = Eigen::VectorXd::Zero(nv);
    r(m.p_idx[tree.parent_branch[j]]) = 1.0;
    for (int cb : tree.child_branch[j]) r(m.p_idx[cb]) = -1.0;
    if (net.buses[j].kind == BusKind::MgPcc) r(m.ppcc_idx[net.buses[j].mg]) = 1.0;
    add_row(r, hd.load_p[j] - hd.pv_p[j]);
    Eigen::VectorXd rq = Eigen::VectorXd::Zero(nv);
    rq(m.q_idx[tree.parent_branch[j]]) = 1.0;
    for (int cb : tree.child_branch[j]) rq(m.q_idx[cb]) = -1.0;
    if (m.qpv_idx.count(j)) rq(m.qpv_idx[j]) = 1.0;
    if (net.buses[j].kind == BusKind::MgPcc) rq(m.qpcc_idx[net.buses[j].mg]) = 1.0;
    add_row(rq, hd.load_q[j]);
  }
  for (std::size_t e = 0; e < net.branches.size(); ++e) {
    const Branch& br = net.branches[e];
    int a = net.index_of(br.from_bus), b = net.index_of(br.to_bus);
    int child = tree.parent[a] == b ? a : b;
    int parent = child == a ? b : a;
    Eigen::VectorXd r = Eigen::VectorXd::Zero(nv);
    r(m.u_idx[child]) = 1.0;
    r(m.u_idx[parent]) = -1.0;
    r(m.p_idx[static_cast<int>(e)]) = 2.0 * br.r;
    r(m.q_idx[static_cast<int>(e)]) = 2.0 * br.x;
    add_row(r, 0.0);
  }
  {
    Eigen::VectorXd r = Eigen::VectorXd::Zero(nv);
    r(m.u_idx[slack]) = 1.0;
    add_row(r, net.v_ref * net.v_ref);
  }
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd r = Eigen::VectorXd::Zero(nv);
    r(m.u_idx[i]) = 1.0;
    r(sp_idx[i]) = -1.0;
    r(sn_idx[i]) = 1.0;
    add_row(r, u_spec);
  }
  p.A.resize(static_cast<int>(rows.size()), nv);
  p.b.resize(static_cast<int>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    p.A.row(static_cast<int>(k)) = rows[k];
    p.b(static_cast<int>(k)) = rhs[k];
  }

  // per-zone membership rows; an overlap branch contributes to both zones
  for (int z = 0; z < part.zone_count; ++z) {
    std::vector<int> zbranches;
    for (std::size_t e = 0; e < net.branches.size(); ++e) {
      int za = part.assignment[net.index_of(net.branches[e].from_bus)];
      int zb = part.assignment[net.index_of(net.branches[e].to_bus)];
      if (za == z || zb == z) zbranches.push_back(static_cast<int>(e));
    }
    double d1 = bounds[z].f1_max - bounds[z].f1_min;
    cvx::QuadIneq mu1;
    mu1.P = Eigen::MatrixXd::Zero(nv, nv);
    mu1.q = Eigen::VectorXd::Zero(nv);
    for (int e : zbranches) {
      const Branch& br = net.branches[e];
      mu1.P(m.p_idx[e], m.p_idx[e]) += 2.0 * br.r / d1;
      mu1.P(m.q_idx[e], m.q_idx[e]) += 2.0 * br.r / d1;
    }
    mu1.q(m.phi_idx[z]) = 1.0;
    mu1.r = -bounds[z].f1_max / d1;
    p.qineq.push_back(std::move(mu1));

    double d2 = bounds[z].f2_max - bounds[z].f2_min;
    int gr = static_cast<int>(p.G.rows());
    p.G.conservativeResize(gr + 1, nv);
    p.h.conservativeResize(gr + 1);
    p.G.row(gr).setZero();
    for (int i = 0; i < n; ++i)
      if (part.assignment[i] == z) {
        p.G(gr, sp_idx[i]) = 1.0 / d2;
        p.G(gr, sn_idx[i]) = 1.0 / d2;
      }
    p.G(gr, m.phi_idx[z]) = 1.0;
    p.h(gr) = bounds[z].f2_max / d2;
  }
  for (int z = 0; z < part.zone_count; ++z) p.c(m.phi_idx[z]) = -kPhiWeight;
  // same uniqueness ridge as the zone subproblems, so the two formulations
  // share one optimum
  p.Q.diagonal().array() += 2.0 * kRidge;
  for (int z = 0; z < part.zone_count; ++z) p.Q(m.phi_idx[z], m.phi_idx[z]) -= 2.0 * kRidge;
  for (int i = 0; i < n; ++i) p.c(m.u_idx[i]) -= 2.0 * kRidge * u_spec;
  m.prog = std::move(p);
  return m;
}

}  // namespace mgopt
