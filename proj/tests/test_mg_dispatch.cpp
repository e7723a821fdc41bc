#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>

#include "mgopt/ieee33.hpp"
#include "mgopt/mg_dispatch.hpp"

using namespace mgopt;

namespace {

// Minimal MG with only an MT and an ideal battery: optimum computable by hand.
MgConfig hand_mg(int T) {
  MgConfig cfg;
  cfg.name = "hand";
  cfg.mt.p_min = 0.0;
  cfg.mt.p_max = 300.0;
  cfg.mt.ramp_up = cfg.mt.ramp_down = 300.0;
  cfg.mt.p_init = 0.0;
  cfg.mt.k_op = 0.0126;
  cfg.mt.eta = 0.3;
  cfg.mt.l_g = 9.7;
  cfg.de.p_min = cfg.de.p_max = 0.0;  // diesel disabled
  cfg.de.k_fu = 0.0;
  cfg.bess.capacity = 250.0;
  cfg.bess.p_max = 100.0;
  cfg.bess.eta_ch = cfg.bess.eta_dis = 1.0;
  cfg.bess.soc_min = 0.2;
  cfg.bess.soc_max = 0.9;
  cfg.bess.soc0 = 0.5;
  cfg.bess.zeta = 0.01;
  cfg.load.assign(T, 100.0);
  cfg.pv.assign(T, 0.0);
  cfg.wind.assign(T, 0.0);
  return cfg;
}

void check_schedule(const MgSchedule& s, const MgConfig& cfg,
                    const std::vector<double>& pcc_import,
                    const std::vector<double>& gas_price) {
  int T = static_cast<int>(s.p_mt.size());
  for (int t = 0; t < T; ++t) {
    double balance = s.p_mt[t] + s.p_de[t] + s.p_bess_dis[t] - s.p_bess_ch[t] +
                     pcc_import[t] - (cfg.load[t] - cfg.pv[t] - cfg.wind[t]);
    CAPTURE(t);
    REQUIRE(std::abs(balance) <= 1e-6);
    REQUIRE(s.soc[t] >= cfg.bess.soc_min - 1e-7);
    REQUIRE(s.soc[t] <= cfg.bess.soc_max + 1e-7);
    REQUIRE(s.p_bess_ch[t] * s.p_bess_dis[t] <= 1e-6);
    double prev_mt = t ? s.p_mt[t - 1] : cfg.mt.p_init;
    double prev_de = t ? s.p_de[t - 1] : cfg.de.p_init;
    REQUIRE(s.p_mt[t] - prev_mt <= cfg.mt.ramp_up + 1e-6);
    REQUIRE(prev_mt - s.p_mt[t] <= cfg.mt.ramp_down + 1e-6);
    REQUIRE(s.p_de[t] - prev_de <= cfg.de.ramp_up + 1e-6);
    REQUIRE(prev_de - s.p_de[t] <= cfg.de.ramp_down + 1e-6);
  }
  CostBreakdown c = evaluate_cost(s, cfg, gas_price);
  REQUIRE(std::abs(c.total() - s.objective) <= 1e-6);
}

}  // namespace

TEST_CASE("SOC recursion and cost terms have the expected hand values") {
  // one hour, forced charge: MT covers load + charging
  MgConfig cfg = hand_mg(1);
  cfg.load = {100.0};
  // import nothing; make charging attractive by a negative-price hour? simpler:
  // drive the battery by construction, checking the recursion on the solution
  std::vector<double> price = {0.291};
  MgSchedule s = solve_dispatch(build_dispatch(cfg, {0.0}, price));
  // no incentive to cycle in a single hour
  REQUIRE(s.p_bess_ch[0] == Catch::Approx(0.0).margin(1e-6));
  REQUIRE(s.p_bess_dis[0] == Catch::Approx(0.0).margin(1e-6));
  REQUIRE(s.soc[0] == Catch::Approx(0.5).margin(1e-7));
  // MT at 100 kW for 1 h: O&M = 0.0126 * 100 = 1.26 $, fuel = 0.291*100/(0.3*9.7) = 10 $
  REQUIRE(s.cost.mt_op == Catch::Approx(1.26).margin(1e-6));
  REQUIRE(s.cost.mt_fu == Catch::Approx(10.0).margin(1e-6));
}

TEST_CASE("SOC step matches the efficiency model") {
  // eta_ch = 0.92: charging 100 kW into 250 kWh moves SOC by 0.368
  MgConfig cfg = hand_mg(2);
  cfg.bess.eta_ch = 0.92;
  cfg.bess.soc0 = 0.5;
  // cheap hour then expensive hour: arbitrage charges in hour 0
  std::vector<double> price = {0.0291, 2.91};
  MgSchedule s = solve_dispatch(build_dispatch(cfg, {0.0, 0.0}, price));
  REQUIRE(s.p_bess_ch[0] == Catch::Approx(100.0).margin(1e-5));
  REQUIRE(s.soc[0] == Catch::Approx(0.5 + 0.92 * 100.0 / 250.0).margin(1e-6));
}

TEST_CASE("two-period arbitrage reaches the hand optimum") {
  // marginal MT cost 0.1126 $/kWh in hour 0 and 0.2126 in hour 1; cycling
  // costs 2 * zeta = 0.02 $/kWh; SOC headroom allows 25 kWh of extra charge.
  // Optimum: charge 25 in hour 0, discharge 100 in hour 1.
  MgConfig cfg = hand_mg(2);
  std::vector<double> price = {0.291, 0.582};
  MgSchedule s = solve_dispatch(build_dispatch(cfg, {0.0, 0.0}, price));
  REQUIRE(s.p_mt[0] == Catch::Approx(125.0).margin(1e-4));
  REQUIRE(s.p_mt[1] == Catch::Approx(0.0).margin(1e-4));
  REQUIRE(s.p_bess_ch[0] == Catch::Approx(25.0).margin(1e-4));
  REQUIRE(s.p_bess_dis[1] == Catch::Approx(100.0).margin(1e-4));
  REQUIRE(s.soc[0] == Catch::Approx(0.6).margin(1e-6));
  REQUIRE(s.soc[1] == Catch::Approx(0.2).margin(1e-6));
  REQUIRE(s.cost.total() == Catch::Approx(15.325).margin(1e-4));
  // battery cost term alone: zeta * (25 + 100) = 1.25 $
  REQUIRE(s.cost.bess == Catch::Approx(1.25).margin(1e-6));
  check_schedule(s, cfg, {0.0, 0.0}, price);
}

TEST_CASE("infeasible tie-line schedule is reported") {
  MgConfig cfg = hand_mg(2);
  // export far beyond every local source
  std::vector<double> pcc = {-5000.0, -5000.0};
  REQUIRE_THROWS_AS(solve_dispatch(build_dispatch(cfg, pcc, {0.291, 0.291})),
                    DispatchError);
}

TEST_CASE("seeded dispatch instances satisfy all operating constraints") {
  std::mt19937 rng(4242);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> price = ieee33_gas_prices(24);
  for (int seed = 0; seed < 25; ++seed) {
    MgConfig cfg = detail::default_mg("fuzz", 400.0 + 400.0 * unif(rng),
                                      80.0 + 60.0 * unif(rng), 260.0,
                                      100.0 + 60.0 * unif(rng),
                                      60.0 + 60.0 * unif(rng), 24);
    // ramp-feasible random generation target; the tie-line absorbs the rest
    std::vector<double> pcc(24);
    double g = 0.5 * (cfg.mt.p_min + cfg.de.p_min + 200.0);
    for (int t = 0; t < 24; ++t) {
      g = std::clamp(g + 120.0 * (unif(rng) - 0.5),
                     cfg.mt.p_min + cfg.de.p_min + 1.0, 280.0);
      pcc[t] = cfg.load[t] - cfg.pv[t] - cfg.wind[t] - g;
    }
    CAPTURE(seed);
    MgSchedule s = solve_dispatch(build_dispatch(cfg, pcc, price));
    check_schedule(s, cfg, pcc, price);
  }
}
