#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "stiction/model.hpp"
#include "stiction/orbits.hpp"
#include "stiction/pws.hpp"
#include "stiction/regularization.hpp"

using namespace stiction;

namespace {

const Params kRef{5.0, 1.1, 0.4};

SlipStickSolution ref_solution() { return solve_slipstick(5.0, 0.05, 2.4, kRef); }

}  // namespace

TEST_CASE("slip-stick orbit at gamma = 5: algebraic solution and closure") {
  SlipStickSolution s = ref_solution();
  CHECK(s.residual_norm < 1e-12);
  CHECK(s.admissible());
  // reference values for the gamma = 5 orbit
  CHECK(s.theta0 == doctest::Approx(0.05156379066813532).epsilon(1e-12));
  CHECK(s.theta_star == doctest::Approx(2.4148607088295377).epsilon(1e-12));
  CHECK(s.x0 == doctest::Approx(0.04193836224557721).epsilon(1e-12));
  // onset sits exactly on the boundary
  CHECK(xi(s.x0, s.theta0, kRef) == doctest::Approx(1.1).epsilon(1e-13));
  CHECK(s.x0 == doctest::Approx((1.1 - std::sin(s.theta0)) / 25.0));
  // half-period closure of the closed-form slip arc: u(pi) = -u(0)
  State land = slip_flow_closed_form(State(s.x0, 0.0, s.theta0), -1, kRef,
                                     kPi - s.theta_star);
  CHECK(land.x == doctest::Approx(-s.x0).epsilon(1e-11));
  CHECK(std::abs(land.y) < 1e-11);

  CHECK_THROWS_AS(solve_slipstick(5.0, 3.0, 0.1, kRef), NewtonDivergence);
}

TEST_CASE("assembled orbit: periodic, regular, correct event census") {
  SlipStickSolution s = ref_solution();
  Trajectory tr = assemble_full_orbit(s, kRef);
  State z0 = tr.eval(tr.t_begin(), kRef);
  State zT = tr.eval(tr.t_begin() + kTwoPi, kRef);
  CHECK(std::hypot(zT.x - z0.x, zT.y - z0.y) < 1e-9);
  CHECK(is_regular(tr));
  int onsets = 0, landings = 0;
  for (const auto& ev : tr.events) {
    if (ev.kind == EventKind::StickToSlipOnset) ++onsets;
    if (ev.kind == EventKind::SlipToStickLanding) ++landings;
  }
  // two slip arcs and two stick arcs per period; the closing onset coincides
  // with the horizon, so only the interior one is recorded as an event
  CHECK(onsets == 1);
  CHECK(landings == 2);
  REQUIRE(tr.arcs.size() == 4);
  CHECK(tr.arcs[0].branch != Branch::Stick);
  CHECK(tr.arcs[1].branch == Branch::Stick);
  CHECK(tr.arcs[2].branch != Branch::Stick);
  CHECK(tr.arcs[3].branch == Branch::Stick);
}

TEST_CASE("Floquet spectrum {1, 0, lambda} with an independent lambda oracle") {
  SlipStickSolution s = ref_solution();
  FloquetData f = floquet_discontinuous(s, kRef);
  CHECK(std::abs(f.multipliers[0] - 1.0) < 1e-12);
  CHECK(std::abs(f.multipliers[1]) < 1e-12);
  const double lam = f.multipliers[2].real();
  CHECK(lam == doctest::Approx(0.5997156436922978).epsilon(1e-10));
  CHECK(f.classification == OrbitStability::Attracting);
  // oracle: finite-difference the period map of the event-driven integrator
  // at a mid-slip point; its 2x2 Jacobian has eigenvalues {0, lambda}, so
  // trace = lambda and det = 0
  Trajectory tr = assemble_full_orbit(s, kRef);
  State zm = tr.eval(tr.t_begin() + 0.4 * (kPi - s.theta_star), kRef);
  const double h = 1e-7;
  double J[2][2];
  for (int j = 0; j < 2; ++j) {
    State zp = zm, zn = zm;
    (j == 0 ? zp.x : zp.y) += h;
    (j == 0 ? zn.x : zn.y) -= h;
    auto tp = integrate_stiction(zp, kTwoPi, BranchPolicy::StickFirst, kRef);
    auto tn = integrate_stiction(zn, kTwoPi, BranchPolicy::StickFirst, kRef);
    State ap = tp[0].eval(tp[0].t_begin() + kTwoPi, kRef);
    State an = tn[0].eval(tn[0].t_begin() + kTwoPi, kRef);
    J[0][j] = (ap.x - an.x) / (2.0 * h);
    J[1][j] = (ap.y - an.y) / (2.0 * h);
  }
  CHECK(J[0][0] + J[1][1] == doctest::Approx(lam).epsilon(1e-6));
  CHECK(std::abs(J[0][0] * J[1][1] - J[0][1] * J[1][0]) < 1e-6);
}

TEST_CASE("right branch: theta* grows toward pi in the rigid-body direction") {
  SlipStickSolution seed = ref_solution();
  PwsBranch br = continue_branch_pws(5.0, 15.0, seed, kRef);
  CHECK(br.label == BranchLabel::Pi0Right);
  REQUIRE(br.points.size() > 5);
  const auto& first = br.points.front().sol;
  const auto& last = br.points.back().sol;
  CHECK(last.gamma == doctest::Approx(15.0).epsilon(1e-6));
  CHECK(last.theta_star > first.theta_star);
  CHECK(last.theta_star > 2.8);  // approaching pi
  CHECK(last.theta_star < kPi);
  for (const auto& pt : br.points) {
    CHECK(pt.sol.admissible());
    CHECK(std::abs(pt.floquet.multipliers[0] - 1.0) < 1e-8);
    CHECK(std::abs(pt.floquet.multipliers[1]) < 1e-8);
    CHECK(pt.floquet.classification == OrbitStability::Attracting);
  }
  // toward the resonance the stick phase shrinks (pure-slip limit)
  PwsBranch down = continue_branch_pws(5.0, 1.0, seed, kRef);
  REQUIRE(down.points.size() > 3);
  CHECK(down.points.back().sol.theta_star < first.theta_star);
  CHECK(down.points.back().sol.gamma > 1.0);  // guard or family end first
}

TEST_CASE("left branch: stability flips near the visible tangency") {
  // lower sub-branch: admissible, attracting
  Params p_low{0.478, 1.1, 0.4};
  SlipStickSolution low = solve_slipstick(0.478, 1.30, 0.45, p_low);
  CHECK(low.admissible());
  CHECK(low.theta0 < kPi / 2);
  FloquetData fl = floquet_discontinuous(low, p_low);
  CHECK(std::abs(fl.multipliers[2]) < 1.0);
  CHECK(fl.classification == OrbitStability::Attracting);
  // past the tangency (theta0 > pi/2) the orbit is repelling, and its stick
  // phase has crossed the onset boundary early (formal family member)
  Params p_hi{0.6, 1.1, 0.4};
  SlipStickSolution hi = solve_slipstick(0.6, 0.8, 0.5, p_hi);
  CHECK(hi.theta0 > kPi / 2);
  CHECK_FALSE(hi.stick_no_early_onset);
  FloquetData fh = floquet_discontinuous(hi, p_hi);
  CHECK(std::abs(fh.multipliers[2]) > 1.0);
  // left family pure-slip end: theta* -> 0 slightly above the fold
  Params p_end{0.518, 1.1, 0.4};
  SlipStickSolution end = solve_slipstick(0.518, 0.96, 0.04, p_end);
  CHECK(end.theta_star < 0.05);
  CHECK(end.admissible());
}

TEST_CASE("regularized orbit at gamma = 5 shadows the slip-stick orbit") {
  SlipStickSolution s = ref_solution();
  RegParams rp = build_phi(0.6, 1.1, 0.4, 1e-3);
  RegOrbit seed = reg_seed_from_pws(s, kRef, rp);
  std::vector<std::string> warnings;
  RegOrbit orb = shoot_periodic_regularized(seed, kRef, rp, &warnings);
  CHECK(orb.residual < 1e-8);
  CHECK(warnings.empty());
  // multiplier structure {1, e^{-c/eps}, lambda_eps}: the stick phase crushes
  // one direction exponentially, the slip multiplier stays O(eps^{2/3})-close
  // to the discontinuous one
  CHECK(orb.log_mu2 < -1e3);
  CHECK(std::exp(orb.log_mu3) ==
        doctest::Approx(0.5997156436922978).epsilon(0.05));
  // amplitude matches the PWS orbit to the regularization error
  Trajectory tr = assemble_full_orbit(s, kRef);
  double maxy_pws = 0.0;
  for (double t = 0.0; t < kTwoPi; t += 1e-3)
    maxy_pws = std::max(maxy_pws, std::abs(tr.eval(tr.t_begin() + t, kRef).y));
  CHECK(orb.max_abs_y == doctest::Approx(maxy_pws).epsilon(0.01));
  // dense samples close up and respect the half-period symmetry
  SampledTrajectory den = sample_reg_orbit(orb, kRef, rp);
  REQUIRE(den.t.size() > 100);
  CHECK(den.t.back() == doctest::Approx(kTwoPi).epsilon(1e-12));
  State a = den.z.front(), b = den.z.back();
  CHECK(std::hypot(a.x - b.x, a.y - b.y) < 1e-6);
}

TEST_CASE("multiplier scaling in eps at fixed gamma") {
  SlipStickSolution s = ref_solution();
  RegParams rp = build_phi(0.6, 1.1, 0.4, 1e-3);
  RegOrbit orb = shoot_periodic_regularized(reg_seed_from_pws(s, kRef, rp),
                                            kRef, rp);
  RegOrbit wide = reconverge_at_eps(orb, 2e-3, kRef, rp);
  CHECK(wide.eps == doctest::Approx(2e-3));
  CHECK(wide.gamma == doctest::Approx(orb.gamma));
  // log|mu2| ~ -c/eps: doubling eps halves the exponent
  CHECK(wide.log_mu2 / orb.log_mu2 == doctest::Approx(0.5).epsilon(0.1));
  // returning to the original eps reproduces the orbit
  RegOrbit back = reconverge_at_eps(wide, 1e-3, kRef, rp);
  CHECK(back.state0()[0] == doctest::Approx(orb.state0()[0]).epsilon(1e-6));
  CHECK(back.log_mu3 == doctest::Approx(orb.log_mu3).epsilon(1e-3));
}

TEST_CASE("global return crosses the singular canard transversally") {
  RegParams rp = build_phi(0.6, 1.1, 0.4, 1e-3);
  for (double g : {5.0, 15.0}) {
    Params p{g, 1.1, 0.4};
    TransversalityData td = transversality_check(g, p, rp);
    CHECK(std::abs(td.angle) > 1e-3);
    CHECK(std::abs(td.yhat_in) < 0.6);  // lands on the attracting sheet
  }
}
