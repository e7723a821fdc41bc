#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "mgopt/ieee33.hpp"
#include "mgopt/pipeline.hpp"
#include "mgopt/power_flow.hpp"

using namespace mgopt;

namespace {

// Two-bus feeder with a closed-form solution: slack at 1.0 p.u., one load
// behind an impedance. V solves V^4 + V^2 (2(Pr+Qx) - 1) + (P^2+Q^2)(r^2+x^2) = 0.
Network two_bus(double r_pu, double x_pu, double p_kw, double q_kvar) {
  Network net;
  net.base_mva = 10.0;
  net.base_kv = 12.66;
  Bus slack;
  slack.id = 1;
  slack.kind = BusKind::Slack;
  slack.load_p.assign(24, 0.0);
  slack.load_q.assign(24, 0.0);
  Bus load;
  load.id = 2;
  load.kind = BusKind::Pq;
  load.load_p.assign(24, p_kw);
  load.load_q.assign(24, q_kvar);
  net.buses = {slack, load};
  net.branches = {{1, 2, r_pu, x_pu}};
  return net;
}

double two_bus_voltage(double r, double x, double p_pu, double q_pu) {
  // larger root of the biquadratic (the physical high-voltage solution)
  double b = 2.0 * (p_pu * r + q_pu * x) - 1.0;
  double c = (p_pu * p_pu + q_pu * q_pu) * (r * r + x * x);
  double u = (-b + std::sqrt(b * b - 4.0 * c)) / 2.0;
  return std::sqrt(u);
}

}  // namespace

TEST_CASE("two-bus feeder matches the closed-form voltage") {
  double r = 0.02, x = 0.04, p = 2000.0, q = 1000.0;
  Network net = two_bus(r, x, p, q);
  PfSolution pf = solve_pf(net, injections_at_hour(net, 0));
  double v_exact = two_bus_voltage(r, x, net.to_pu(p), net.to_pu(q));
  REQUIRE(pf.v[1] == Catch::Approx(v_exact).margin(1e-8));
  // losses = (P^2 + Q^2) / V^2 * r
  double v2 = v_exact * v_exact;
  double loss_pu = (net.to_pu(p) * net.to_pu(p) + net.to_pu(q) * net.to_pu(q)) / v2 * r;
  REQUIRE(pf.losses == Catch::Approx(net.to_kw(loss_pu)).epsilon(1e-6));
  REQUIRE(pf.mismatch < 1e-8);
}

TEST_CASE("33-bus nominal loading reproduces the canonical base case") {
  // Nominal = every load at its rated value (the bundled profiles are
  // scaled shapes, so pin them to 1.0 here).
  Scenario sc = ieee33_case();
  Network net = sc.net;
  Injections inj;
  int n = static_cast<int>(net.buses.size());
  inj.p_kw.assign(n, 0.0);
  inj.q_kvar.assign(n, 0.0);
  double total_p = 0.0;
  for (const auto& row : detail::bw33_rows()) {
    int i = net.index_of(row.to);
    inj.p_kw[i] -= row.p_kw;
    inj.q_kvar[i] -= row.q_kvar;
    total_p += row.p_kw;
  }
  REQUIRE(total_p == Catch::Approx(3715.0));
  PfSolution pf = solve_pf(net, inj);

  double vmin = 2.0;
  int vmin_bus = -1;
  for (int i = 0; i < n; ++i)
    if (pf.v[i] < vmin) {
      vmin = pf.v[i];
      vmin_bus = net.buses[i].id;
    }
  // canonical figures for this feeder: ~202.7 kW losses, min voltage
  // ~0.913 p.u. at bus 18
  REQUIRE(pf.losses == Catch::Approx(202.677).epsilon(0.005));
  REQUIRE(vmin == Catch::Approx(0.913090).epsilon(0.005));
  REQUIRE(vmin_bus == 18);
}

TEST_CASE("power flow raises on an unsolvable loading") {
  Network net = two_bus(0.05, 0.1, 60000.0, 30000.0);  // far beyond loadability
  REQUIRE_THROWS_AS(solve_pf(net, injections_at_hour(net, 0)), PowerFlowError);
}

TEST_CASE("analytic sensitivity matches central differences") {
  Scenario sc = ieee33_case();
  std::vector<int> mg_buses = mg_bus_indices(sc.net);
  REQUIRE(mg_buses.size() == 3);
  for (int t : {3, 11, 19}) {
    Injections inj = injections_at_hour(sc.net, t);
    PfSolution pf = solve_pf(sc.net, inj);
    SensitivityMatrix an = sensitivity(sc.net, pf, mg_buses);
    SensitivityMatrix fd = fd_sensitivity_oracle(sc.net, inj, mg_buses, 1e-5);
    for (int i = 0; i < an.dv_dp.rows(); ++i)
      for (int j = 0; j < an.dv_dp.cols(); ++j) {
        if (std::abs(fd.dv_dp(i, j)) > 1e-8) {
          REQUIRE(an.dv_dp(i, j) ==
                  Catch::Approx(fd.dv_dp(i, j)).epsilon(1e-4));
        }
        if (std::abs(fd.dv_dq(i, j)) > 1e-8) {
          REQUIRE(an.dv_dq(i, j) ==
                  Catch::Approx(fd.dv_dq(i, j)).epsilon(1e-4));
        }
      }
  }
}

TEST_CASE("sensitivity entries are positive for a radial feeder under load") {
  // injecting power at any PCC raises voltages everywhere downstream of the
  // slack; on a passive radial feeder all entries are positive
  Scenario sc = ieee33_case();
  Injections inj = injections_at_hour(sc.net, 12);
  PfSolution pf = solve_pf(sc.net, inj);
  SensitivityMatrix s = sensitivity(sc.net, pf, mg_bus_indices(sc.net));
  REQUIRE((s.dv_dp.array() > 0.0).all());
  REQUIRE((s.dv_dq.array() > 0.0).all());
}
