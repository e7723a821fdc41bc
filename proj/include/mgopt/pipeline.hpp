#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "mgopt/admm.hpp"
#include "mgopt/csv.hpp"
#include "mgopt/mg_dispatch.hpp"
#include "mgopt/power_flow.hpp"
#include "mgopt/upper_opf.hpp"
#include "mgopt/zoning.hpp"

namespace mgopt {

/// Tie-line capability windows for hour t, in p.u. on the DN side. MT and
/// DE contributions are ramp-aware (reachable from the initial power by
/// hour t); the BESS is kept as an intra-day buffer and excluded, which
/// guarantees the lower level can meet any schedule inside the window
/// hour by hour.
inline std::vector<PccLimit> pcc_limits_at(const Scenario& sc, int t) {
  std::vector<PccLimit> out;
  for (const auto& mg : sc.mgs) {
    double mt_max = std::min(mg.mt.p_max, mg.mt.p_init + (t + 1) * mg.mt.ramp_up);
    double mt_min = std::max(mg.mt.p_min, mg.mt.p_init - (t + 1) * mg.mt.ramp_down);
    double de_max = std::min(mg.de.p_max, mg.de.p_init + (t + 1) * mg.de.ramp_up);
    double de_min = std::max(mg.de.p_min, mg.de.p_init - (t + 1) * mg.de.ramp_down);
    double net_load = mg.load[t] - mg.pv[t] - mg.wind[t];
    double import_min = net_load - mt_max - de_max;  // deepest export
    double import_max = net_load - mt_min - de_min;  // deepest import
    PccLimit lim;
    lim.p_min = sc.net.to_pu(std::max(-import_max, -mg.pcc_cap));
    lim.p_max = sc.net.to_pu(std::min(-import_min, mg.pcc_cap));
    lim.q_abs = sc.net.to_pu(mg.q_env_frac * mg.pcc_cap);
    out.push_back(lim);
  }
  return out;
}

/// MG PCC bus indices ordered by MG id.
inline std::vector<int> mg_bus_indices(const Network& net) {
  std::vector<std::pair<int, int>> tagged;
  for (std::size_t i = 0; i < net.buses.size(); ++i)
    if (net.buses[i].kind == BusKind::MgPcc)
      tagged.push_back({net.buses[i].mg, static_cast<int>(i)});
  std::sort(tagged.begin(), tagged.end());
  std::vector<int> out;
  for (auto& [mg, bus] : tagged) out.push_back(bus);
  return out;
}

inline std::vector<int> pv_bus_indices(const Network& net) {
  std::vector<int> out;
  for (std::size_t i = 0; i < net.buses.size(); ++i)
    if (net.buses[i].pv) out.push_back(static_cast<int>(i));
  return out;
}

/// The per-hour upper level, ready for the ADMM coordinator.
struct HourModels {
  ZonePartition partition;
  SensitivityMatrix sens;
  std::vector<std::shared_ptr<ZoneModel>> models;
  std::vector<ObjectiveBounds> bounds;
  std::vector<cvx::ConvexProgram> subproblems;
  std::vector<admm::Zone> zones;
  std::vector<admm::Coupling> couplings;
  HourData hd;
  PfSolution pf_base;
};

inline admm::Zone make_admm_zone(const cvx::ConvexProgram& prog,
                                 const std::vector<std::array<int, 4>>& slots) {
  admm::Zone z;
  z.solve = [prog, slots](const std::vector<admm::PenaltyTerm>& terms) {
    cvx::ConvexProgram p = prog;
    for (const auto& term : terms) {
      const auto& idx = slots[term.slot];
      for (int k = 0; k < 4; ++k) {
        p.Q(idx[k], idx[k]) += term.rho;
        p.c(idx[k]) -= term.rho * term.target(k);
      }
    }
    // solved far tighter than the consensus tolerance: interior directions
    // carry only the small uniqueness ridge, so solver error is amplified
    // by its inverse before it reaches the boundary residuals; a stalled
    // endgame is acceptable as long as its best iterate is still tight
    cvx::KktSolution s = cvx::solve(p, 1e-12, 300);
    bool usable = s.status == cvx::Status::Optimal ||
                  (s.status == cvx::Status::IterationLimit && s.kkt_residual <= 1e-8);
    if (!usable)
      throw cvx::SolverError(std::string("zone subproblem: ") + cvx::to_string(s.status));
    return s.x;
  };
  z.boundary = [slots](const Eigen::VectorXd& x, int slot) {
    Eigen::VectorXd b(4);
    for (int k = 0; k < 4; ++k) b(k) = x(slots[slot][k]);
    return b;
  };
  return z;
}

/// Builds everything the coordinator needs for hour t: base power flow,
/// sensitivity partition, per-zone bounds and augmented subproblems.
inline HourModels build_hour(const Scenario& sc, int t) {
  HourModels hm;
  Injections inj = injections_at_hour(sc.net, t);
  hm.pf_base = solve_pf(sc.net, inj);
  std::vector<int> mg_buses = mg_bus_indices(sc.net);
  if (mg_buses.empty()) {
    hm.partition = single_zone_partition(sc.net);
  } else {
    hm.sens = sensitivity(sc.net, hm.pf_base, mg_buses);
    hm.partition = partition(hm.sens, sc.net);
  }
  hm.hd = hour_data(sc.net, t, pcc_limits_at(sc, t));

  for (int z = 0; z < hm.partition.zone_count; ++z) {
    auto model = std::make_shared<ZoneModel>(sc.net, hm.partition, z, hm.hd);
    hm.bounds.push_back(model->compute_objective_bounds());
    hm.subproblems.push_back(model->build_subproblem(hm.bounds.back()));
    hm.models.push_back(std::move(model));
  }
  for (int z = 0; z < hm.partition.zone_count; ++z) {
    std::vector<std::array<int, 4>> slots;
    for (std::size_t ov = 0; ov < hm.partition.overlaps.size(); ++ov)
      if (hm.models[z]->touches_overlap(static_cast<int>(ov)))
        slots.push_back(hm.models[z]->boundary_indices(static_cast<int>(ov)));
    hm.zones.push_back(make_admm_zone(hm.subproblems[z], slots));
  }
  // couplings follow the overlap ordering; slots count per zone in step
  std::vector<int> slot_count(hm.partition.zone_count, 0);
  for (const auto& ov : hm.partition.overlaps) {
    admm::Coupling c;
    c.zone_a = ov.zone_a;
    c.slot_a = slot_count[ov.zone_a]++;
    c.zone_b = ov.zone_b;
    c.slot_b = slot_count[ov.zone_b]++;
    hm.couplings.push_back(c);
  }
  return hm;
}

struct HourResult {
  int hour = 0;
  int partition_id = 0;
  ZonePartition partition;
  int admm_iterations = 0;
  bool converged = false;
  double phi_sum = 0.0;
  double losses_before = 0.0, losses_after = 0.0;  // [kW], AC oracle
  double dv_before = 0.0, dv_after = 0.0;          // mean |V - 1| [p.u.]
  std::vector<double> pv_q_kvar;                   // per PV bus
  std::vector<double> pcc_p_kw, pcc_q_kvar;        // per MG, DN-side injection
  std::vector<admm::TraceRow> trace;
  Eigen::MatrixXd sens_dvdp;
  std::vector<int> sens_rows;
};

struct RunReport {
  std::vector<HourResult> hours;
  std::vector<MgSchedule> schedules;  // per MG
  std::vector<std::string> mg_names;
  double total_losses_before = 0.0, total_losses_after = 0.0;
  double total_dv_before = 0.0, total_dv_after = 0.0;
  double loss_reduction_pct = 0.0, dv_reduction_pct = 0.0;
};

inline double mean_voltage_deviation(const Network& net, const PfSolution& pf) {
  const int slack = net.slack_index();
  double sum = 0.0;
  int count = 0;
  for (std::size_t i = 0; i < pf.v.size(); ++i) {
    if (static_cast<int>(i) == slack) continue;
    sum += std::abs(pf.v[i] - 1.0);
    ++count;
  }
  return count ? sum / count : 0.0;
}

/// Runs the upper level for hour t and verifies the optimized operating
/// point against the AC power flow.
inline HourResult solve_hour(const Scenario& sc, int t, const AdmmConfig& cfg,
                             bool record_duals = false) {
  HourModels hm = build_hour(sc, t);
  admm::Result ares = admm::run(hm.zones, hm.couplings, cfg, record_duals);

  HourResult hr;
  hr.hour = t;
  hr.partition = hm.partition;
  hr.admm_iterations = ares.iterations;
  hr.converged = ares.converged;
  hr.trace = ares.trace;
  hr.sens_dvdp = hm.sens.dv_dp;
  hr.sens_rows = hm.sens.row_buses;
  for (int z = 0; z < hm.partition.zone_count; ++z)
    hr.phi_sum += ares.solutions[z](hm.models[z]->phi_index());

  std::vector<int> pv_buses = pv_bus_indices(sc.net);
  std::vector<int> mg_buses = mg_bus_indices(sc.net);
  std::vector<double> pv_q(pv_buses.size(), 0.0);
  for (std::size_t k = 0; k < pv_buses.size(); ++k) {
    int bus = pv_buses[k];
    int z = hm.partition.assignment[bus];
    if (!hm.models[z]->has_pv_q(bus)) continue;  // no reactive headroom: q = 0
    pv_q[k] = sc.net.to_kw(ares.solutions[z](hm.models[z]->pv_q_index(bus)));
  }
  std::vector<double> mg_p(mg_buses.size(), 0.0), mg_q(mg_buses.size(), 0.0);
  for (std::size_t w = 0; w < mg_buses.size(); ++w) {
    int z = hm.partition.assignment[mg_buses[w]];
    mg_p[w] = sc.net.to_kw(ares.solutions[z](hm.models[z]->pcc_p_index(static_cast<int>(w))));
    mg_q[w] = sc.net.to_kw(ares.solutions[z](hm.models[z]->pcc_q_index(static_cast<int>(w))));
  }
  hr.pv_q_kvar = pv_q;
  hr.pcc_p_kw = mg_p;
  hr.pcc_q_kvar = mg_q;

  hr.losses_before = hm.pf_base.losses;
  hr.dv_before = mean_voltage_deviation(sc.net, hm.pf_base);
  Injections inj_after = injections_at_hour(sc.net, t, &pv_q, &mg_p, &mg_q);
  PfSolution pf_after = solve_pf(sc.net, inj_after);
  hr.losses_after = pf_after.losses;
  hr.dv_after = mean_voltage_deviation(sc.net, pf_after);
  return hr;
}

/// Full Fig.-4-style pipeline: hourly upper level, then one 24-hour
/// dispatch per MG against the converged tie-line schedule.
inline RunReport run_pipeline(const Scenario& sc, const AdmmConfig& cfg) {
  RunReport rep;
  std::vector<ZonePartition> distinct;
  for (int t = 0; t < sc.horizon; ++t) {
    HourResult hr = solve_hour(sc, t, cfg);
    int pid = -1;
    for (std::size_t k = 0; k < distinct.size(); ++k)
      if (distinct[k] == hr.partition) pid = static_cast<int>(k);
    if (pid < 0) {
      pid = static_cast<int>(distinct.size());
      distinct.push_back(hr.partition);
    }
    hr.partition_id = pid;
    rep.hours.push_back(std::move(hr));
  }
  for (std::size_t w = 0; w < sc.mgs.size(); ++w) {
    std::vector<double> pcc_import(sc.horizon);
    for (int t = 0; t < sc.horizon; ++t)
      pcc_import[t] = -rep.hours[t].pcc_p_kw[w];  // DN injection -> MG import
    DispatchProgram dp = build_dispatch(sc.mgs[w], pcc_import, sc.gas_price);
    rep.schedules.push_back(solve_dispatch(dp));
    rep.mg_names.push_back(sc.mgs[w].name);
  }
  for (const auto& h : rep.hours) {
    rep.total_losses_before += h.losses_before;
    rep.total_losses_after += h.losses_after;
    rep.total_dv_before += h.dv_before;
    rep.total_dv_after += h.dv_after;
  }
  if (rep.total_losses_before > 0.0)
    rep.loss_reduction_pct =
        100.0 * (rep.total_losses_before - rep.total_losses_after) / rep.total_losses_before;
  if (rep.total_dv_before > 0.0)
    rep.dv_reduction_pct =
        100.0 * (rep.total_dv_before - rep.total_dv_after) / rep.total_dv_before;
  return rep;
}

struct CentralizedGap {
  double distributed_objective = 0.0;
  double centralized_objective = 0.0;
  double relative_gap = 0.0;
  double max_voltage_deviation = 0.0;  // [p.u.] between the two solutions
  bool admm_converged = false;
};

/// Solves one hour both ways and reports the objective gap and the
/// largest per-bus voltage difference.
inline CentralizedGap compare_centralized(const Scenario& sc, int t, const AdmmConfig& cfg) {
  HourModels hm = build_hour(sc, t);
  admm::Result ares = admm::run(hm.zones, hm.couplings, cfg);
  CentralizedGap gap;
  gap.admm_converged = ares.converged;
  for (int z = 0; z < hm.partition.zone_count; ++z)
    gap.distributed_objective += ares.solutions[z](hm.models[z]->phi_index());

  CentralizedModel cm = build_centralized(sc.net, hm.partition, hm.hd, hm.bounds);
  cvx::KktSolution cs = cvx::solve(cm.prog);
  if (cs.status != cvx::Status::Optimal)
    throw cvx::SolverError(std::string("centralized problem: ") + cvx::to_string(cs.status));
  gap.centralized_objective = cm.objective(cs.x);
  gap.relative_gap = std::abs(gap.centralized_objective - gap.distributed_objective) /
                     std::max(std::abs(gap.centralized_objective), 1e-9);
  for (int z = 0; z < hm.partition.zone_count; ++z)
    for (int bus : hm.models[z]->member_nodes()) {
      double vd = std::sqrt(ares.solutions[z](hm.models[z]->u_index(bus)));
      double vc = std::sqrt(cs.x(cm.u_idx.at(bus)));
      gap.max_voltage_deviation = std::max(gap.max_voltage_deviation, std::abs(vd - vc));
    }
  return gap;
}

struct BenchmarkRow {
  int hour = 0;
  std::string strategy;
  int iterations = 0;
  bool converged = false;
  double wall_ms = 0.0;
  std::vector<admm::TraceRow> trace;
};

struct BenchmarkReport {
  std::vector<BenchmarkRow> rows;
  int total_fixed = 0, total_adaptive = 0, total_improved = 0;
  double improved_vs_adaptive_pct = 0.0;
};

/// Runs all three penalty strategies per hour from identical initial
/// states and tabulates iteration counts.
inline BenchmarkReport benchmark_penalty(const Scenario& sc, const AdmmConfig& base_cfg) {
  BenchmarkReport rep;
  for (int t = 0; t < sc.horizon; ++t) {
    HourModels hm = build_hour(sc, t);
    for (const char* strat : {"fixed", "adaptive", "improved"}) {
      AdmmConfig cfg = base_cfg;
      cfg.strategy = strat;
      auto t0 = std::chrono::steady_clock::now();
      admm::Result r = admm::run(hm.zones, hm.couplings, cfg);
      double ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - t0).count();
      rep.rows.push_back({t, strat, r.iterations, r.converged, ms, r.trace});
      if (cfg.strategy == "fixed") rep.total_fixed += r.iterations;
      if (cfg.strategy == "adaptive") rep.total_adaptive += r.iterations;
      if (cfg.strategy == "improved") rep.total_improved += r.iterations;
    }
  }
  if (rep.total_adaptive > 0)
    rep.improved_vs_adaptive_pct =
        100.0 * (rep.total_adaptive - rep.total_improved) / rep.total_adaptive;
  return rep;
}

// ---- result files ----

inline void write_report_csv(const RunReport& rep, const std::string& path) {
  CsvWriter w(path, {"hour", "partition_id", "admm_iterations", "converged", "losses_before_kw",
                     "losses_after_kw", "mean_dv_before_pu", "mean_dv_after_pu", "phi_sum"});
  for (const auto& h : rep.hours) {
    w.cell(h.hour).cell(h.partition_id).cell(h.admm_iterations).cell(h.converged ? 1 : 0);
    w.cell(h.losses_before).cell(h.losses_after).cell(h.dv_before).cell(h.dv_after);
    w.cell(h.phi_sum).endrow();
  }
}

inline void write_partition_csv(const RunReport& rep, const Network& net,
                                const std::string& path) {
  CsvWriter w(path, {"hour", "bus", "zone"});
  for (const auto& h : rep.hours)
    for (std::size_t i = 0; i < net.buses.size(); ++i)
      w.cell(h.hour).cell(net.buses[i].id).cell(h.partition.assignment[i]).endrow();
}

inline void write_schedule_csv(const MgSchedule& s, const std::string& path) {
  CsvWriter w(path, {"hour", "p_mt_kw", "p_de_kw", "p_bess_kw", "soc", "p_pcc_import_kw",
                     "cost_mt_op", "cost_mt_fu", "cost_de_op", "cost_de_fu", "cost_bess"});
  for (std::size_t t = 0; t < s.p_mt.size(); ++t) {
    w.cell(static_cast<int>(t)).cell(s.p_mt[t]).cell(s.p_de[t]);
    w.cell(s.p_bess_dis[t] - s.p_bess_ch[t]).cell(s.soc[t]).cell(s.p_pcc[t]);
    // per-hour cost shares are not tracked; totals go to the summary
    w.cell(0.0).cell(0.0).cell(0.0).cell(0.0).cell(0.0).endrow();
  }
}

/// Plot-data files for the report (sensitivities, before/after, PV
/// reactive power, tie lines, MG schedules, iteration counts, residuals).
inline void emit_plots(const RunReport& rep, const Network& net, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  auto at = [&out_dir](const char* name) { return (fs::path(out_dir) / name).string(); };

  {
    CsvWriter w(at("sensitivity_heat.csv"), {"hour", "bus", "mg", "dv_dp"});
    for (const auto& h : rep.hours)
      for (int r = 0; r < h.sens_dvdp.rows(); ++r)
        for (int c = 0; c < h.sens_dvdp.cols(); ++c)
          w.cell(h.hour).cell(net.buses[h.sens_rows[r]].id).cell(c).cell(h.sens_dvdp(r, c)).endrow();
  }
  {
    CsvWriter w(at("loss_voltage_before_after.csv"),
                {"hour", "losses_before_kw", "losses_after_kw", "mean_dv_before_pu",
                 "mean_dv_after_pu"});
    for (const auto& h : rep.hours)
      w.cell(h.hour).cell(h.losses_before).cell(h.losses_after).cell(h.dv_before)
          .cell(h.dv_after).endrow();
  }
  {
    CsvWriter w(at("pv_reactive.csv"), {"hour", "pv_bus", "q_kvar"});
    std::vector<int> pv_buses = pv_bus_indices(net);
    for (const auto& h : rep.hours)
      for (std::size_t k = 0; k < h.pv_q_kvar.size(); ++k)
        w.cell(h.hour).cell(net.buses[pv_buses[k]].id).cell(h.pv_q_kvar[k]).endrow();
  }
  {
    CsvWriter w(at("tie_line_power.csv"), {"hour", "mg", "p_kw", "q_kvar"});
    for (const auto& h : rep.hours)
      for (std::size_t wdx = 0; wdx < h.pcc_p_kw.size(); ++wdx)
        w.cell(h.hour).cell(static_cast<int>(wdx)).cell(h.pcc_p_kw[wdx])
            .cell(h.pcc_q_kvar[wdx]).endrow();
  }
  {
    CsvWriter w(at("mg_schedules.csv"),
                {"mg", "hour", "p_mt_kw", "p_de_kw", "p_bess_kw", "soc", "p_pcc_import_kw"});
    for (std::size_t m = 0; m < rep.schedules.size(); ++m) {
      const auto& s = rep.schedules[m];
      for (std::size_t t = 0; t < s.p_mt.size(); ++t)
        w.cell(rep.mg_names[m]).cell(static_cast<int>(t)).cell(s.p_mt[t]).cell(s.p_de[t])
            .cell(s.p_bess_dis[t] - s.p_bess_ch[t]).cell(s.soc[t]).cell(s.p_pcc[t]).endrow();
    }
  }
  {
    CsvWriter w(at("admm_iterations.csv"), {"hour", "iterations", "converged"});
    for (const auto& h : rep.hours)
      w.cell(h.hour).cell(h.admm_iterations).cell(h.converged ? 1 : 0).endrow();
  }
  {
    // residuals floored at 1e-16 for log plotting; floored cells flagged
    CsvWriter w(at("admm_residuals.csv"), {"hour", "iter", "coupling", "r", "d", "rho", "floored"});
    for (const auto& h : rep.hours)
      for (const auto& row : h.trace) {
        bool floored = row.r < 1e-16 || row.d < 1e-16;
        w.cell(h.hour).cell(row.iter).cell(row.coupling).cell(std::max(row.r, 1e-16))
            .cell(std::max(row.d, 1e-16)).cell(row.rho).cell(floored ? 1 : 0).endrow();
      }
  }
}

inline void write_run_outputs(const RunReport& rep, const Scenario& sc,
                              const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  write_report_csv(rep, (fs::path(out_dir) / "report.csv").string());
  write_partition_csv(rep, sc.net, (fs::path(out_dir) / "partition.csv").string());
  for (std::size_t m = 0; m < rep.schedules.size(); ++m)
    write_schedule_csv(rep.schedules[m],
                       (fs::path(out_dir) / ("schedule_" + rep.mg_names[m] + ".csv")).string());
  emit_plots(rep, sc.net, out_dir);

  nlohmann::json summary;
  summary["horizon"] = sc.horizon;
  summary["admm"] = {{"rho0", sc.admm.rho0},      {"eps", sc.admm.eps},
                     {"max_iter", sc.admm.max_iter}, {"strategy", sc.admm.strategy},
                     {"sigma", sc.admm.sigma},    {"mu_ratio", sc.admm.mu_ratio}};
  summary["total_losses_before_kwh"] = rep.total_losses_before;
  summary["total_losses_after_kwh"] = rep.total_losses_after;
  summary["loss_reduction_pct"] = rep.loss_reduction_pct;
  summary["mean_dv_reduction_pct"] = rep.dv_reduction_pct;
  nlohmann::json costs = nlohmann::json::array();
  for (std::size_t m = 0; m < rep.schedules.size(); ++m)
    costs.push_back({{"mg", rep.mg_names[m]},
                     {"total", rep.schedules[m].cost.total()},
                     {"mt_op", rep.schedules[m].cost.mt_op},
                     {"mt_fu", rep.schedules[m].cost.mt_fu},
                     {"de_op", rep.schedules[m].cost.de_op},
                     {"de_fu", rep.schedules[m].cost.de_fu},
                     {"bess", rep.schedules[m].cost.bess}});
  summary["mg_costs"] = costs;
  std::ofstream out(fs::path(out_dir) / "summary.json");
  out << summary.dump(1) << "\n";
}

}  // namespace mgopt
