#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>

#include "mgopt/ieee33.hpp"
#include "mgopt/network.hpp"
#include "mgopt/scenario_io.hpp"

using namespace mgopt;

TEST_CASE("33-bus case passes validation") {
  Scenario sc = ieee33_case();
  REQUIRE_NOTHROW(require_valid(sc));
  REQUIRE(sc.net.buses.size() == 33);
  REQUIRE(sc.net.branches.size() == 32);
  REQUIRE(sc.mgs.size() == 3);
  REQUIRE(sc.horizon == 24);
}

TEST_CASE("validation rejects malformed networks") {
  Scenario sc = ieee33_case();

  SECTION("duplicate bus id") {
    sc.net.buses[5].id = sc.net.buses[4].id;
    REQUIRE_THROWS_AS(require_valid(sc), ValidationError);
  }
  SECTION("disconnected bus") {
    sc.net.branches.pop_back();
    Bus b;
    b.id = 99;
    b.kind = BusKind::Pq;
    sc.net.buses.push_back(b);
    sc.net.branches.push_back({99, sc.net.buses[0].id, 0.1, 0.1});
    sc.net.branches.push_back({99, sc.net.buses[1].id, 0.1, 0.1});
    // still 33 branches over 34 buses but with a cycle through bus 99
    REQUIRE_THROWS_AS(require_valid(sc), ValidationError);
  }
  SECTION("loop breaks radiality") {
    sc.net.branches.push_back({sc.net.buses[10].id, sc.net.buses[20].id, 0.1, 0.1});
    REQUIRE_THROWS_AS(require_valid(sc), ValidationError);
  }
  SECTION("profile length mismatch") {
    sc.net.buses[3].load_p.pop_back();
    REQUIRE_THROWS_AS(require_valid(sc), ValidationError);
  }
  SECTION("pv rating above inverter capacity") {
    REQUIRE(!sc.net.pvs.empty());
    sc.net.pvs[0].s_inv_kva = 0.5 * sc.net.pvs[0].p_rated_kw;
    REQUIRE_THROWS_AS(require_valid(sc), ValidationError);
  }
}

TEST_CASE("rooted tree orients every branch away from the slack") {
  Scenario sc = ieee33_case();
  RootedTree tree = root_at_slack(sc.net);
  int slack = sc.net.slack_index();
  REQUIRE(tree.parent[slack] == -1);
  int reached = 0;
  for (std::size_t i = 0; i < sc.net.buses.size(); ++i) {
    if (static_cast<int>(i) == slack) continue;
    REQUIRE(tree.parent[i] >= 0);
    ++reached;
  }
  REQUIRE(reached == 32);
  // depth is consistent: child depth = parent depth + 1
  for (std::size_t i = 0; i < sc.net.buses.size(); ++i)
    if (tree.parent[i] >= 0) REQUIRE(tree.depth[i] == tree.depth[tree.parent[i]] + 1);
}

TEST_CASE("scenario JSON round trip preserves the case") {
  Scenario sc = ieee33_case();
  namespace fs = std::filesystem;
  fs::path tmp = fs::temp_directory_path() / "mgopt_roundtrip.json";
  save_scenario(sc, tmp.string());
  Scenario back = load_scenario(tmp.string());
  fs::remove(tmp);

  REQUIRE(back.net.buses.size() == sc.net.buses.size());
  REQUIRE(back.net.branches.size() == sc.net.branches.size());
  REQUIRE(back.mgs.size() == sc.mgs.size());
  REQUIRE(back.horizon == sc.horizon);
  for (std::size_t i = 0; i < sc.net.buses.size(); ++i) {
    REQUIRE(back.net.buses[i].id == sc.net.buses[i].id);
    REQUIRE(back.net.buses[i].load_p == sc.net.buses[i].load_p);
    REQUIRE(back.net.buses[i].load_q == sc.net.buses[i].load_q);
  }
  for (std::size_t e = 0; e < sc.net.branches.size(); ++e) {
    REQUIRE(back.net.branches[e].r_ohm == sc.net.branches[e].r_ohm);
    REQUIRE(back.net.branches[e].x_ohm == sc.net.branches[e].x_ohm);
  }
  for (std::size_t m = 0; m < sc.mgs.size(); ++m) {
    REQUIRE(back.mgs[m].pcc_bus == sc.mgs[m].pcc_bus);
    REQUIRE(back.mgs[m].bess.capacity_kwh == sc.mgs[m].bess.capacity_kwh);
    REQUIRE(back.mgs[m].load == sc.mgs[m].load);
  }
  REQUIRE(back.admm.rho0 == sc.admm.rho0);
  REQUIRE(back.admm.strategy == sc.admm.strategy);
}

TEST_CASE("loading a missing file reports a parse error") {
  REQUIRE_THROWS_AS(load_scenario("/nonexistent/nowhere.json"), ParseError);
}

TEST_CASE("per-unit conversions are inverses") {
  Network net = ieee33_case().net;
  double p = 1234.5;
  REQUIRE(net.to_kw(net.to_pu(p)) == Catch::Approx(p).epsilon(1e-12));
}
