#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "stiction/model.hpp"
#include "stiction/ode.hpp"
#include "stiction/pws.hpp"

using namespace stiction;

namespace {

const Params kRef{5.0, 1.1, 0.4};

// Independent oracle: integrate the smooth slip field Z^sigma with the
// adaptive stepper, bypassing the closed form entirely.
State integrate_slip_oracle(const State& z0, int sigma, const Params& p,
                            double t) {
  ode::Rhs rhs = [&](double, const Eigen::VectorXd& y, Eigen::VectorXd& d) {
    State z(y[0], y[1], y[2]);
    StateDerivative dz =
        vector_field(z, p, sigma > 0 ? Branch::Plus : Branch::Minus);
    d[0] = dz.dx;
    d[1] = dz.dy;
    d[2] = dz.dtheta;
  };
  Eigen::VectorXd y(3);
  y << z0.x, z0.y, z0.theta;
  ode::Options opt;
  opt.abs_tol = opt.rel_tol = 1e-12;
  y = ode::integrate(rhs, 0.0, t, y, opt);
  return State(y[0], y[1], y[2]);
}

}  // namespace

TEST_CASE("closed-form slip flow reproduces the initial condition at t = 0") {
  State z0(0.2, -0.5, 1.0);
  State z = slip_flow_closed_form(z0, -1, kRef, 0.0);
  CHECK(z.x == doctest::Approx(z0.x).epsilon(1e-14));
  CHECK(z.y == doctest::Approx(z0.y).epsilon(1e-14));
  CHECK(z.theta == doctest::Approx(z0.theta).epsilon(1e-14));
}

TEST_CASE("closed-form slip flow matches an adaptive integrator to 1e-9") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> coord(-1.0, 1.0);
  std::uniform_real_distribution<double> angle(0.0, kTwoPi);
  std::uniform_real_distribution<double> gam(0.2, 5.0);
  int tested = 0;
  while (tested < 100) {
    double g = gam(rng);
    if (std::abs(g - 1.0) < 0.05) continue;  // resonance guard band
    Params p{g, 1.1, 0.4};
    State z0(coord(rng), coord(rng), angle(rng));
    int sigma = coord(rng) > 0.0 ? 1 : -1;
    for (double t : {0.7, 2.0, kTwoPi}) {
      State a = slip_flow_closed_form(z0, sigma, p, t);
      State b = integrate_slip_oracle(z0, sigma, p, t);
      CHECK(std::abs(a.x - b.x) < 1e-9);
      CHECK(std::abs(a.y - b.y) < 1e-9);
    }
    ++tested;
  }
}

TEST_CASE("resonance guard rejects gamma near 1") {
  Params p{1.0 + 1e-4, 1.1, 0.4};
  CHECK_THROWS_AS(slip_flow_closed_form(State(0, 0, 0), -1, p, 1.0),
                  ResonanceGuard);
}

TEST_CASE("stick-arc events come from the closed-form onset root") {
  // gamma^2 x0 = 0.2, mu_s = 1.1: onset when sin theta = 0.9
  State z0(0.2 / 25.0, 0.0, 0.0);
  Event ev = next_event(z0, 0.0, Branch::Stick, kRef);
  CHECK(ev.kind == EventKind::StickToSlipOnset);
  CHECK(ev.time == doctest::Approx(std::asin(0.9)).epsilon(1e-10));
  // |gamma^2 x0| < mu_s - 1: |xi| <= |gamma^2 x0| + 1 < mu_s, no escape ever
  State center(0.05 / 25.0, 0.0, 0.0);
  CHECK_THROWS_AS(next_event(center, 0.0, Branch::Stick, kRef),
                  NoEventWithinHorizon);
}

TEST_CASE("sticking leaves: escape iff |gamma^2 x0| >= mu_s - 1") {
  const double horizon = 50.0 * kTwoPi;
  for (double w : {0.0, 0.04, 0.09}) {
    State z0(w / 25.0, 0.0, 0.0);
    auto trajs = integrate_stiction(z0, horizon, BranchPolicy::StickFirst, kRef);
    REQUIRE(trajs.size() == 1);
    for (const auto& ev : trajs[0].events)
      CHECK(ev.kind == EventKind::HorizonEnd);
    CHECK(trajs[0].t_end() == doctest::Approx(horizon));
  }
  for (double w : {0.11, 0.5, 1.0}) {
    State z0(w / 25.0, 0.0, 0.2);
    Event ev = next_event(z0, 0.0, Branch::Stick, kRef, horizon);
    CHECK(ev.time < horizon);  // finite-time escape
  }
  // with mu_s < 1 no stick arc survives one forcing period
  Params weak{5.0, 0.9, 0.4};
  for (double w : {0.0, 0.3, -0.6}) {
    Event ev = next_event(State(w / 25.0, 0.0, 0.0), 0.0, Branch::Stick, weak);
    CHECK(ev.time < kTwoPi);
  }
}

TEST_CASE("pure-stick circle is periodic and regular") {
  auto trajs =
      integrate_stiction(State(0, 0, 0), kTwoPi, BranchPolicy::StickFirst, kRef);
  REQUIRE(trajs.size() == 1);
  CHECK(is_regular(trajs[0]));
  State zT = trajs[0].eval(kTwoPi, kRef);
  CHECK(zT.x == doctest::Approx(0.0));
  CHECK(zT.y == doctest::Approx(0.0));
}

TEST_CASE("trajectory from a downward crossing enters G minus") {
  // xi > mu_s on Sigma: passes straight through with y' < 0
  State z0((1.5 - 0.0) / 25.0, 0.0, 0.0);
  auto trajs = integrate_stiction(z0, 0.5, BranchPolicy::StickFirst, kRef);
  REQUIRE(trajs.size() == 1);
  State z = trajs[0].eval(0.1, kRef);
  CHECK(z.y < 0.0);
}

TEST_CASE("forward non-uniqueness: a stick arc into I^- forks under EnumerateBoth") {
  // A stick arc reaches xi = mu_s inside the window cos theta <= 0 only by
  // grazing it: with gamma^2 x0 = mu_s - 1 the arc touches the boundary
  // exactly at theta = pi/2, where the stick flow turns xi back inward yet
  // the slip field Z^- already points into G^-. Both continuations are
  // genuine forward solutions.
  State z1((1.1 - 1.0) / 25.0, 0.0, 0.0);
  auto trajs = integrate_stiction(z1, kTwoPi, BranchPolicy::EnumerateBoth, kRef);
  REQUIRE(trajs.size() == 2);
  bool forked = false;
  for (const auto& ev : trajs[0].events)
    if (ev.kind == EventKind::SingularHitIMinus) forked = true;
  CHECK(forked);
  CHECK_FALSE(is_regular(trajs[0]));
  // the two forward branches separate to O(1) within a period
  double dist = 0.0;
  for (double t = 0.0; t <= kTwoPi; t += 0.01) {
    double te = std::min({t, trajs[0].t_end(), trajs[1].t_end()});
    State a = trajs[0].eval(trajs[0].t_begin() + te, kRef);
    State b = trajs[1].eval(trajs[1].t_begin() + te, kRef);
    dist = std::max(dist, std::hypot(a.x - b.x, a.y - b.y));
  }
  CHECK(dist > 0.1);
  // a regular initial condition yields exactly one branch
  auto reg = integrate_stiction(State(0, 0, 0), kTwoPi,
                                BranchPolicy::EnumerateBoth, kRef);
  CHECK(reg.size() == 1);
}

TEST_CASE("Caratheodory residual vanishes on every arc") {
  State z0((1.5 - 0.0) / 25.0, 0.0, 0.0);
  auto trajs = integrate_stiction(z0, 3 * kTwoPi, BranchPolicy::StickFirst, kRef);
  REQUIRE(trajs.size() == 1);
  REQUIRE(trajs[0].arcs.size() > 2);  // slip and stick arcs both present
  for (const auto& arc : trajs[0].arcs)
    CHECK(caratheodory_residual(arc, kRef) < 1e-8);
}

TEST_CASE("symmetry closure of regular trajectories") {
  State z0((1.5 - 0.0) / 25.0, 0.0, 0.3);
  auto fwd = integrate_stiction(z0, kTwoPi, BranchPolicy::StickFirst, kRef);
  auto mir = integrate_stiction(symmetry_map(z0), kTwoPi,
                                BranchPolicy::StickFirst, kRef);
  REQUIRE(fwd.size() == 1);
  REQUIRE(mir.size() == 1);
  for (double t = 0.0; t < kTwoPi; t += 0.37) {
    State a = symmetry_map(fwd[0].eval(fwd[0].t_begin() + t, kRef));
    State b = mir[0].eval(mir[0].t_begin() + t, kRef);
    CHECK(a.x == doctest::Approx(b.x).epsilon(1e-9));
    CHECK(a.y == doctest::Approx(b.y).epsilon(1e-9));
  }
}
