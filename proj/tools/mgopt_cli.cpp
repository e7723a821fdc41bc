// Command-line front end: runs the full 24-hour scheduling pipeline and
// hosts the analysis commands (partitioning, power flow, centralized
// comparison, penalty-strategy benchmark, plot-data export).
//
// Exit codes: 0 success, 2 validation failure, 3 optimization infeasible,
// 4 non-convergence.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <string>

#include <CLI11.hpp>

#include "mgopt/ieee33.hpp"
#include "mgopt/pipeline.hpp"
#include "mgopt/scenario_io.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitNonConvergence = 4;

struct GlobalOpts {
  std::string scenario;     // empty -> bundled 33-bus case
  std::string out = "out";
  int hour = -1;
  std::string strategy;     // empty -> scenario default
  int sigma = -1;
  double rho0 = -1.0;
  double eps = -1.0;
};

mgopt::Scenario load_or_builtin(const GlobalOpts& g) {
  if (g.scenario.empty()) return mgopt::ieee33_case();
  return mgopt::load_scenario(g.scenario);
}

mgopt::AdmmConfig effective_config(const mgopt::Scenario& sc, const GlobalOpts& g) {
  mgopt::AdmmConfig cfg = sc.admm;
  if (!g.strategy.empty()) cfg.strategy = g.strategy;
  if (g.sigma >= 0) cfg.sigma = g.sigma;
  if (g.rho0 > 0.0) cfg.rho0 = g.rho0;
  if (g.eps > 0.0) cfg.eps = g.eps;
  return cfg;
}

int cmd_run(const GlobalOpts& g) {
  mgopt::Scenario sc = load_or_builtin(g);
  mgopt::AdmmConfig cfg = effective_config(sc, g);
  mgopt::RunReport rep = mgopt::run_pipeline(sc, cfg);
  mgopt::write_run_outputs(rep, sc, g.out);
  int unconverged = 0;
  for (const auto& h : rep.hours)
    if (!h.converged) ++unconverged;
  std::printf("run: %zu hours, losses %.2f -> %.2f kWh (-%.2f%%), mean |dV| -%.2f%%\n",
              rep.hours.size(), rep.total_losses_before, rep.total_losses_after,
              rep.loss_reduction_pct, rep.dv_reduction_pct);
  for (std::size_t m = 0; m < rep.schedules.size(); ++m)
    std::printf("  %s dispatch cost %.2f $\n", rep.mg_names[m].c_str(),
                rep.schedules[m].cost.total());
  if (unconverged) {
    std::fprintf(stderr, "run: %d hour(s) hit the iteration limit\n", unconverged);
    return kExitNonConvergence;
  }
  std::printf("results written to %s\n", g.out.c_str());
  return kExitOk;
}

int cmd_partition(const GlobalOpts& g) {
  mgopt::Scenario sc = load_or_builtin(g);
  namespace fs = std::filesystem;
  fs::create_directories(g.out);
  mgopt::CsvWriter w((fs::path(g.out) / "partition.csv").string(), {"hour", "bus", "zone"});
  int t0 = g.hour >= 0 ? g.hour : 0;
  int t1 = g.hour >= 0 ? g.hour + 1 : sc.horizon;
  for (int t = t0; t < t1; ++t) {
    mgopt::Injections inj = mgopt::injections_at_hour(sc.net, t);
    mgopt::PfSolution pf = mgopt::solve_pf(sc.net, inj);
    std::vector<int> mg_buses = mgopt::mg_bus_indices(sc.net);
    mgopt::ZonePartition part =
        mg_buses.empty() ? mgopt::single_zone_partition(sc.net)
                         : mgopt::partition(mgopt::sensitivity(sc.net, pf, mg_buses), sc.net);
    for (std::size_t i = 0; i < sc.net.buses.size(); ++i)
      w.cell(t).cell(sc.net.buses[i].id).cell(part.assignment[i]).endrow();
  }
  std::printf("partition table written to %s/partition.csv\n", g.out.c_str());
  return kExitOk;
}

int cmd_pf(const GlobalOpts& g) {
  mgopt::Scenario sc = load_or_builtin(g);
  int t = g.hour >= 0 ? g.hour : 0;
  if (t >= sc.horizon) throw mgopt::ValidationError("--hour beyond scenario horizon");
  mgopt::Injections inj = mgopt::injections_at_hour(sc.net, t);
  mgopt::PfSolution pf = mgopt::solve_pf(sc.net, inj);
  double vmin = 2.0;
  int vmin_bus = 0;
  for (std::size_t i = 0; i < pf.v.size(); ++i)
    if (pf.v[i] < vmin) {
      vmin = pf.v[i];
      vmin_bus = sc.net.buses[i].id;
    }
  std::printf("pf hour %d: %d iterations, losses %.3f kW, min V %.6f p.u. at bus %d\n", t,
              pf.iterations, pf.losses, vmin, vmin_bus);
  namespace fs = std::filesystem;
  fs::create_directories(g.out);
  {
    mgopt::CsvWriter w((fs::path(g.out) / "pf_buses.csv").string(),
                       {"bus", "v_pu", "delta_rad"});
    for (std::size_t i = 0; i < pf.v.size(); ++i)
      w.cell(sc.net.buses[i].id).cell(pf.v[i]).cell(pf.delta[i]).endrow();
  }
  {
    mgopt::CsvWriter w((fs::path(g.out) / "pf_branches.csv").string(),
                       {"from", "to", "p_kw", "q_kvar"});
    for (std::size_t e = 0; e < sc.net.branches.size(); ++e)
      w.cell(sc.net.branches[e].from_bus).cell(sc.net.branches[e].to_bus)
          .cell(pf.branch_p[e]).cell(pf.branch_q[e]).endrow();
  }
  return kExitOk;
}

int cmd_compare(const GlobalOpts& g) {
  mgopt::Scenario sc = load_or_builtin(g);
  mgopt::AdmmConfig cfg = effective_config(sc, g);
  int t = g.hour >= 0 ? g.hour : 0;
  if (t >= sc.horizon) throw mgopt::ValidationError("--hour beyond scenario horizon");
  mgopt::CentralizedGap gap = mgopt::compare_centralized(sc, t, cfg);
  std::printf("hour %d: distributed %.8f, centralized %.8f, gap %.3e, max |dV| %.3e p.u.%s\n",
              t, gap.distributed_objective, gap.centralized_objective, gap.relative_gap,
              gap.max_voltage_deviation, gap.admm_converged ? "" : " [ADMM not converged]");
  return gap.admm_converged ? kExitOk : kExitNonConvergence;
}

int cmd_benchmark(const GlobalOpts& g) {
  mgopt::Scenario sc = load_or_builtin(g);
  mgopt::AdmmConfig cfg = effective_config(sc, g);
  mgopt::BenchmarkReport rep = mgopt::benchmark_penalty(sc, cfg);
  namespace fs = std::filesystem;
  fs::create_directories(g.out);
  mgopt::CsvWriter w((fs::path(g.out) / "benchmark.csv").string(),
                     {"hour", "strategy", "iterations", "converged", "wall_ms"});
  for (const auto& row : rep.rows)
    w.cell(row.hour).cell(row.strategy).cell(row.iterations).cell(row.converged ? 1 : 0)
        .cell(row.wall_ms).endrow();
  std::printf("totals: fixed %d, adaptive %d, improved %d (improved %.1f%% below adaptive)\n",
              rep.total_fixed, rep.total_adaptive, rep.total_improved,
              rep.improved_vs_adaptive_pct);
  std::printf("benchmark table written to %s/benchmark.csv\n", g.out.c_str());
  return kExitOk;
}

int cmd_emit_plots(const GlobalOpts& g) {
  mgopt::Scenario sc = load_or_builtin(g);
  mgopt::AdmmConfig cfg = effective_config(sc, g);
  mgopt::RunReport rep = mgopt::run_pipeline(sc, cfg);
  mgopt::emit_plots(rep, sc.net, g.out);
  std::printf("plot data written to %s\n", g.out.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed volt-var scheduling for radial feeders with microgrids"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--scenario", g.scenario, "Scenario JSON file (default: bundled 33-bus case)");
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_option("--hour", g.hour, "Hour index for single-hour commands");
  app.add_option("--strategy", g.strategy, "Penalty strategy: fixed | adaptive | improved");
  app.add_option("--sigma", g.sigma, "Consecutive-judgment threshold of the improved strategy");
  app.add_option("--rho0", g.rho0, "Initial penalty parameter");
  app.add_option("--eps", g.eps, "Consensus convergence tolerance");

  auto* c_run = app.add_subcommand("run", "Full 24-hour scheduling pipeline");
  auto* c_part = app.add_subcommand("partition", "Hourly sensitivity-based zone assignment");
  auto* c_pf = app.add_subcommand("pf", "AC power flow of the base case at one hour");
  auto* c_cmp = app.add_subcommand("compare-centralized",
                                   "Distributed vs centralized solution at one hour");
  auto* c_bench = app.add_subcommand("benchmark-penalty",
                                     "Iteration counts of all three penalty strategies");
  auto* c_plots = app.add_subcommand("emit-plots", "Run the pipeline and export plot data");

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_run->parsed()) return cmd_run(g);
    if (c_part->parsed()) return cmd_partition(g);
    if (c_pf->parsed()) return cmd_pf(g);
    if (c_cmp->parsed()) return cmd_compare(g);
    if (c_bench->parsed()) return cmd_benchmark(g);
    if (c_plots->parsed()) return cmd_emit_plots(g);
  } catch (const mgopt::ValidationError& e) {
    std::fprintf(stderr, "validation error: %s\n", e.what());
    return kExitValidation;
  } catch (const mgopt::ParseError& e) {
    std::fprintf(stderr, "scenario error: %s\n", e.what());
    return kExitValidation;
  } catch (const mgopt::cvx::SolverError& e) {
    std::fprintf(stderr, "optimization error: %s\n", e.what());
    return kExitInfeasible;
  } catch (const mgopt::DispatchError& e) {
    std::fprintf(stderr, "dispatch error: %s\n", e.what());
    return kExitInfeasible;
  } catch (const mgopt::PowerFlowError& e) {
    std::fprintf(stderr, "power flow error: %s\n", e.what());
    return kExitNonConvergence;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return kExitOk;
}
