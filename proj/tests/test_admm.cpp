#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "mgopt/admm.hpp"

using namespace mgopt;
using Eigen::VectorXd;

namespace {

// 1-D quadratic zone min (x - c)^2: augmented solve has a closed form
admm::Zone quad_zone(double c) {
  return admm::Zone{
      [c](const std::vector<admm::PenaltyTerm>& terms) {
        double num = 2.0 * c, den = 2.0;
        for (const auto& t : terms) {
          num += t.rho * t.target(0);
          den += t.rho;
        }
        VectorXd x(1);
        x(0) = num / den;
        return x;
      },
      [](const VectorXd& x, int) { return x; }};
}

AdmmConfig toy_config(const std::string& strategy) {
  AdmmConfig cfg;
  cfg.strategy = strategy;
  cfg.rho0 = 250.0;
  cfg.eps = 1e-6;
  cfg.max_iter = 500;
  return cfg;
}

}  // namespace

TEST_CASE("penalty update arithmetic matches hand values") {
  // increase branch: 250 * (1 + log10(1/0.05)) = 575.2575...
  REQUIRE(admm::update_penalty_adaptive(250.0, 1.0, 0.05, 10.0) ==
          Catch::Approx(575.257498916).margin(1e-6));
  // decrease branch: 250 / (1 + log10(1/0.05)) = 108.6473...
  REQUIRE(admm::update_penalty_adaptive(250.0, 0.05, 1.0, 10.0) ==
          Catch::Approx(108.647287744).margin(1e-6));
  // hold band: ratio within [1/mu, mu]
  REQUIRE(admm::update_penalty_adaptive(250.0, 1.0, 0.5, 10.0) == 250.0);
  REQUIRE(admm::update_penalty_adaptive(250.0, 0.5, 1.0, 10.0) == 250.0);
  // zero residuals are a hold, not a division by zero
  REQUIRE(admm::update_penalty_adaptive(250.0, 0.0, 1.0, 10.0) == 250.0);
  REQUIRE(admm::update_penalty_adaptive(250.0, 1.0, 0.0, 10.0) == 250.0);
  // suppressed increase leaves rho untouched
  REQUIRE(admm::update_penalty_adaptive(250.0, 1.0, 0.05, 10.0, false) == 250.0);
  // clamp guards both extremes
  REQUIRE(admm::update_penalty_adaptive(admm::kRhoMax, 1.0, 1e-12, 10.0) == admm::kRhoMax);
  REQUIRE(admm::update_penalty_adaptive(admm::kRhoMin, 1e-12, 1.0, 10.0) == admm::kRhoMin);
}

TEST_CASE("counter-gated update fires only after sigma identical judgments") {
  AdmmConfig cfg = toy_config("improved");
  cfg.sigma = 3;
  admm::ConsensusState st;
  st.rho = 250.0;
  auto feed_inc = [&]() { admm::update_penalty_improved(st, 1.0, 0.05, cfg); };
  auto feed_hold = [&]() { admm::update_penalty_improved(st, 1.0, 0.5, cfg); };

  SECTION("inc, inc, hold, inc, inc, inc fires exactly once, at the sixth") {
    feed_inc();
    feed_inc();
    REQUIRE(st.rho == 250.0);  // two in a row: not yet
    feed_hold();
    REQUIRE(st.tau1 == 0);     // hold resets
    feed_inc();
    feed_inc();
    REQUIRE(st.rho == 250.0);
    feed_inc();                // third consecutive: fires
    REQUIRE(st.rho == Catch::Approx(575.257498916).margin(1e-6));
    REQUIRE(st.omega == Catch::Approx(250.0 / st.rho).margin(1e-12));
    REQUIRE(st.tau1 == 0);     // counters reset after firing
  }

  SECTION("alternating judgments never fire") {
    for (int k = 0; k < 50; ++k) {
      admm::update_penalty_improved(st, 1.0, 0.05, cfg);  // increase vote
      admm::update_penalty_improved(st, 0.05, 1.0, cfg);  // decrease vote
    }
    REQUIRE(st.rho == 250.0);
  }
}

TEST_CASE("two-zone consensus drives the boundary to the barycenter") {
  // (x-1)^2 and (x-3)^2 agree at x = 2
  std::vector<admm::Zone> zones = {quad_zone(1.0), quad_zone(3.0)};
  std::vector<admm::Coupling> couplings = {{0, 0, 1, 0}};
  for (const char* strat : {"fixed", "adaptive", "improved"}) {
    AdmmConfig cfg = toy_config(strat);
    admm::Result res = admm::run(zones, couplings, cfg);
    CAPTURE(strat);
    REQUIRE(res.converged);
    REQUIRE(res.solutions[0](0) == Catch::Approx(2.0).margin(1e-5));
    REQUIRE(res.solutions[1](0) == Catch::Approx(2.0).margin(1e-5));
    // consensus fixpoint invariant of the scaled form
    REQUIRE((res.states[0].u_a + res.states[0].u_b).norm() < 1e-12);
  }
}

TEST_CASE("already-consistent zones converge in one iteration") {
  std::vector<admm::Zone> zones = {quad_zone(2.0), quad_zone(2.0)};
  std::vector<admm::Coupling> couplings = {{0, 0, 1, 0}};
  admm::Result res = admm::run(zones, couplings, toy_config("improved"));
  REQUIRE(res.converged);
  REQUIRE(res.iterations == 1);
}

TEST_CASE("no couplings means a single coordination round") {
  std::vector<admm::Zone> zones = {quad_zone(1.0)};
  admm::Result res = admm::run(zones, {}, toy_config("fixed"));
  REQUIRE(res.converged);
  REQUIRE(res.iterations == 1);
  REQUIRE(res.solutions[0](0) == Catch::Approx(1.0));
}

TEST_CASE("sigma = 1 reduces the counter-gated strategy to the adaptive one") {
  std::vector<admm::Zone> zones = {quad_zone(0.5), quad_zone(2.75)};
  std::vector<admm::Coupling> couplings = {{0, 0, 1, 0}};
  AdmmConfig ca = toy_config("adaptive");
  AdmmConfig ci = toy_config("improved");
  ci.sigma = 1;
  admm::Result ra = admm::run(zones, couplings, ca);
  admm::Result ri = admm::run(zones, couplings, ci);
  REQUIRE(ra.iterations == ri.iterations);
  REQUIRE(ra.trace.size() == ri.trace.size());
  for (std::size_t k = 0; k < ra.trace.size(); ++k) {
    REQUIRE(ra.trace[k].rho == ri.trace[k].rho);
    REQUIRE(ra.trace[k].r == ri.trace[k].r);
    REQUIRE(ra.trace[k].d == ri.trace[k].d);
  }
}

TEST_CASE("scaled iteration matches an unscaled reference to 1e-9") {
  // unscaled form: lambda^{m+1} = lambda^m + rho (x_hat - X_K^{m+1}), zone
  // solve min (x-c)^2 + lambda x + rho/2 (x - X_K)^2
  const double ca = 1.0, cb = 3.5, rho = 250.0, alpha_relax = 1.7;
  std::vector<admm::Zone> zones = {quad_zone(ca), quad_zone(cb)};
  std::vector<admm::Coupling> couplings = {{0, 0, 1, 0}};
  AdmmConfig cfg = toy_config("fixed");
  cfg.relaxation = alpha_relax;
  admm::Result res = admm::run(zones, couplings, cfg, true);
  REQUIRE(res.converged);

  auto solve_unscaled = [rho](double c, double lambda, double xk) {
    return (2.0 * c + rho * xk - lambda) / (2.0 + rho);
  };
  double xk = 0.5 * (ca + cb);  // averaged unpenalized optima
  double la = 0.0, lb = 0.0;
  for (const auto& rec : res.duals) {
    double xa = solve_unscaled(ca, la, xk);
    double xb = solve_unscaled(cb, lb, xk);
    REQUIRE(xa == Catch::Approx(rec.x_a(0)).margin(1e-9));
    REQUIRE(xb == Catch::Approx(rec.x_b(0)).margin(1e-9));
    double xra = alpha_relax * xa + (1.0 - alpha_relax) * xk;
    double xrb = alpha_relax * xb + (1.0 - alpha_relax) * xk;
    xk = 0.5 * (xra + xrb);
    la += rho * (xra - xk);
    lb += rho * (xrb - xk);
    // the scaled dual times rho is the unscaled multiplier
    REQUIRE(la == Catch::Approx(rho * rec.u_a(0)).margin(1e-9));
    REQUIRE(lb == Catch::Approx(rho * rec.u_b(0)).margin(1e-9));
  }
}

TEST_CASE("unscaled multiplier is continuous across penalty changes") {
  // replay the recorded penalty schedule in unscaled form and verify
  // rho * u tracks the unscaled multiplier recursion exactly
  const double ca = -1.0, cb = 4.0;
  std::vector<admm::Zone> zones = {quad_zone(ca), quad_zone(cb)};
  std::vector<admm::Coupling> couplings = {{0, 0, 1, 0}};
  AdmmConfig cfg = toy_config("adaptive");
  cfg.relaxation = 1.7;
  admm::Result res = admm::run(zones, couplings, cfg, true);
  REQUIRE(res.converged);

  bool saw_change = false;
  double xk = 0.5 * (ca + cb);
  double la = 0.0, lb = 0.0;
  for (const auto& rec : res.duals) {
    double rho = rec.rho_used;
    if (rec.omega != 1.0) saw_change = true;
    double xa = (2.0 * ca + rho * xk - la) / (2.0 + rho);
    double xb = (2.0 * cb + rho * xk - lb) / (2.0 + rho);
    REQUIRE(xa == Catch::Approx(rec.x_a(0)).margin(1e-9));
    REQUIRE(xb == Catch::Approx(rec.x_b(0)).margin(1e-9));
    double a = rec.omega == 1.0 ? cfg.relaxation
                                : std::min(cfg.relaxation, admm::kFireRelaxation);
    double xra = a * xa + (1.0 - a) * xk;
    double xrb = a * xb + (1.0 - a) * xk;
    xk = 0.5 * (xra + xrb);
    la += rho * (xra - xk);
    lb += rho * (xrb - xk);
    double rho_next = rec.omega == 1.0 ? rho : rho / rec.omega;
    REQUIRE(la == Catch::Approx(rho_next * rec.u_a(0)).margin(1e-9));
    REQUIRE(lb == Catch::Approx(rho_next * rec.u_b(0)).margin(1e-9));
  }
  REQUIRE(saw_change);  // the toy must actually exercise a penalty change
}
