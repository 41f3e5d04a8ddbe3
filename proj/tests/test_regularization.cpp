#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "stiction/model.hpp"
#include "stiction/regularization.hpp"

using namespace stiction;

namespace {

const Params kRef{5.0, 1.1, 0.4};

RegParams ref_phi(double eps = 1e-3) { return build_phi(0.6, 1.1, 0.4, eps); }

}  // namespace

TEST_CASE("build_phi satisfies its four defining conditions") {
  RegParams rp = ref_phi();
  CHECK(rp.phi(1.0 - 1e-12) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(rp.dphi(1.0 - 1e-12) == doctest::Approx(0.0).scale(1.0).epsilon(1e-8));
  CHECK(rp.phi(0.6) == doctest::Approx(1.1 / 0.4).epsilon(1e-12));
  CHECK(rp.dphi(0.6) == doctest::Approx(0.0).scale(1.0).epsilon(1e-10));
  // reference coefficients for delta = 0.6, mu_s/mu_d = 2.75
  CHECK(rp.a == doctest::Approx(10.57660138).epsilon(1e-7));
  CHECK(rp.b == doctest::Approx(-16.99365686).epsilon(1e-7));
  CHECK(rp.c == doctest::Approx(1.75750958).epsilon(1e-6));
  CHECK(rp.d == doctest::Approx(5.65954590).epsilon(1e-7));
  // odd, saturated outside [-1, 1] with flat derivative (global C^1)
  for (double y : {0.1, 0.35, 0.6, 0.8, 0.99}) {
    CHECK(rp.phi(-y) == doctest::Approx(-rp.phi(y)).epsilon(1e-14));
  }
  CHECK(rp.phi(1.5) == 1.0);
  CHECK(rp.phi(-2.0) == -1.0);
  CHECK(rp.dphi(1.5) == 0.0);
  // interior extremum at delta: increasing before, decreasing after
  CHECK(rp.dphi(0.3) > 0.0);
  CHECK(rp.dphi(0.8) < 0.0);
  CHECK(rp.ddphi(0.6) < 0.0);

  CHECK_THROWS_AS(build_phi(0.0, 1.1, 0.4, 1e-3), ModelError);
  CHECK_THROWS_AS(build_phi(1.0, 1.1, 0.4, 1e-3), ModelError);
  CHECK_THROWS_AS(build_phi(0.6, 0.4, 0.4, 1e-3), ModelError);
}

TEST_CASE("regularized field equals the slip fields outside the layer") {
  RegParams rp = ref_phi();
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> coord(-1.0, 1.0);
  std::uniform_real_distribution<double> yout(rp.eps, 0.5);
  for (int k = 0; k < 100; ++k) {
    for (int side = -1; side <= 1; side += 2) {
      State z(coord(rng), side * yout(rng), kTwoPi * 0.5 * (coord(rng) + 1.0));
      StateDerivative dr = regularized_rhs(z, kRef, rp);
      StateDerivative ds =
          vector_field(z, kRef, side > 0 ? Branch::Plus : Branch::Minus);
      CHECK(dr.dx == doctest::Approx(ds.dx).epsilon(1e-14));
      CHECK(dr.dy == doctest::Approx(ds.dy).epsilon(1e-14));
      CHECK(dr.dtheta == doctest::Approx(ds.dtheta).epsilon(1e-14));
    }
  }
  // at y = 0 the friction term vanishes (phi odd)
  State z0(0.1, 0.0, 0.3);
  CHECK(regularized_rhs(z0, kRef, rp).dy ==
        doctest::Approx(-xi(z0, kRef)).epsilon(1e-14));
}

TEST_CASE("layer problem: equilibria are the critical-manifold roots") {
  RegParams rp = ref_phi();
  double dx, dyh, dth;
  fast_rhs(0.1, 0.25, 0.7, kRef, rp, 0.0, &dx, &dyh, &dth);
  CHECK(dx == 0.0);   // x frozen in the layer
  CHECK(dth == 0.0);  // theta frozen in the layer
  CHECK(dyh == doctest::Approx(-xi(0.1, 0.7, kRef) - 0.4 * rp.phi(0.25)));
  const double x = 0.7 / 25.0, th = 0.0;  // xi = 0.7
  for (const auto& rt : critical_manifold_roots(xi(x, th, kRef), kRef, rp)) {
    fast_rhs(x, rt.yhat, th, kRef, rp, 0.0, &dx, &dyh, &dth);
    CHECK(std::abs(dyh) < 1e-9);
    // attracting iff d(dyhat)/dyhat = -mu_d phi' < 0, i.e. on C_a
    double grad = -kRef.mu_d * rp.dphi(rt.yhat);
    if (rt.branch == ManifoldBranch::CA) CHECK(grad < 0.0);
    else CHECK(grad > 0.0);
  }
}

TEST_CASE("critical manifold root count: 1 inside, 2 in the stiction bands") {
  RegParams rp = ref_phi();
  auto count = [&](double v) { return critical_manifold_roots(v, kRef, rp).size(); };
  CHECK(count(0.0) == 1);
  CHECK(count(0.3) == 1);
  CHECK(count(-0.39) == 1);
  CHECK(count(0.7) == 2);
  CHECK(count(-0.7) == 2);
  CHECK(count(1.2) == 0);
  CHECK(count(-1.2) == 0);
  // branch bookkeeping: the repelling companion lives on the side that is a
  // graph over the stiction band of the same xi sign
  auto roots = critical_manifold_roots(0.7, kRef, rp);
  REQUIRE(roots.size() == 2);
  CHECK(roots[0].branch == ManifoldBranch::CRMinus);
  CHECK(roots[1].branch == ManifoldBranch::CA);
  for (const auto& rt : roots)
    CHECK(rp.phi(rt.yhat) == doctest::Approx(-0.7 / 0.4).epsilon(1e-10));
  // fold: double root at yhat = -delta when xi = +mu_s
  auto fold = critical_manifold_roots(1.1, kRef, rp);
  REQUIRE(fold.size() == 2);
  for (const auto& rt : fold) CHECK(rt.yhat == doctest::Approx(-0.6).epsilon(1e-5));
}

TEST_CASE("monotone control shape has no repelling branches") {
  RegParams st = build_phi_st(1e-3);
  CHECK(st.phi(1.0) == doctest::Approx(1.0));
  CHECK(st.phi(-1.0) == doctest::Approx(-1.0));
  for (double y = -0.99; y < 1.0; y += 0.01) CHECK(st.dphi(y) > 0.0);
  // a single root collapsing onto the Filippov sliding region, and nothing
  // at all over the stiction bands
  auto inside = critical_manifold_roots(0.3, kRef, st);
  REQUIRE(inside.size() == 1);
  CHECK(inside[0].branch == ManifoldBranch::CA);
  CHECK(critical_manifold_roots(0.7, kRef, st).empty());
  CHECK(critical_manifold_roots(-0.9, kRef, st).empty());
}

TEST_CASE("reduced flow projects to the stick field and reverses time on C_r") {
  RegParams rp = ref_phi();
  ReducedRates r = reduced_flow(0.2, 0.9, kRef, rp, 0.0);
  CHECK(r.reduced_defined);
  CHECK(r.dtheta_reduced == 1.0);
  CHECK(r.dyhat_desing == doctest::Approx(-std::cos(0.9)));
  CHECK(r.dtheta_desing == doctest::Approx(0.4 * rp.dphi(0.2)));
  CHECK(r.dyhat_reduced ==
        doctest::Approx(r.dyhat_desing / (0.4 * rp.dphi(0.2))));
  // Gamma > 0 adds the -Gamma yhat drift
  ReducedRates rg = reduced_flow(0.2, 0.9, kRef, rp, 0.5);
  CHECK(rg.dyhat_desing == doctest::Approx(-0.5 * 0.2 - std::cos(0.9)));
  // undefined exactly on the fold lines
  CHECK_FALSE(reduced_flow(0.6, 0.9, kRef, rp, 0.0).reduced_defined);
  CHECK_FALSE(reduced_flow(-0.6, 0.9, kRef, rp, 0.0).reduced_defined);
  // desingularized time runs backward where phi' < 0: dtheta flips sign
  CHECK(reduced_flow(0.8, 0.9, kRef, rp, 0.0).dtheta_desing < 0.0);
  CHECK(reduced_flow(0.2, 0.9, kRef, rp, 0.0).dtheta_desing > 0.0);
}

TEST_CASE("folded singularities match a finite-difference linearization") {
  RegParams rp = ref_phi();
  for (double Gamma : {0.0, 0.5, 1.2}) {
    auto pts = folded_singularities(kRef, rp, Gamma);
    REQUIRE(pts.size() == 4);
    int saddles = 0;
    for (const auto& cp : pts) {
      CHECK(std::abs(std::abs(cp.yhat) - 0.6) < 1e-12);
      // fixed point of the desingularized flow
      ReducedRates r0 = reduced_flow(cp.yhat, cp.theta, kRef, rp, Gamma);
      CHECK(std::abs(r0.dyhat_desing) < 1e-9);
      CHECK(std::abs(r0.dtheta_desing) < 1e-9);
      // finite-difference Jacobian of (dyhat_desing, dtheta_desing)
      const double h = 1e-6;
      Eigen::Matrix2d J;
      auto rates = [&](double yh, double th) {
        ReducedRates r = reduced_flow(yh, th, kRef, rp, Gamma);
        return Eigen::Vector2d(r.dyhat_desing, r.dtheta_desing);
      };
      J.col(0) = (rates(cp.yhat + h, cp.theta) - rates(cp.yhat - h, cp.theta)) /
                 (2.0 * h);
      J.col(1) = (rates(cp.yhat, cp.theta + h) - rates(cp.yhat, cp.theta - h)) /
                 (2.0 * h);
      Eigen::EigenSolver<Eigen::Matrix2d> es(J);
      // match eigenvalues as unordered pairs
      for (int i = 0; i < 2; ++i) {
        double best = 1e9;
        for (int j = 0; j < 2; ++j)
          best = std::min(best,
                          std::hypot(es.eigenvalues()[j].real() - cp.eig_re[i],
                                     es.eigenvalues()[j].imag() - cp.eig_im[i]));
        CHECK(best < 1e-6);
      }
      if (cp.cls == CriticalPointClass::FoldedSaddle) {
        ++saddles;
        CHECK(cp.eig_re[0] * cp.eig_re[1] < 0.0);
      } else if (Gamma == 0.0) {
        CHECK(cp.cls == CriticalPointClass::FoldedCenter);
        CHECK(cp.eig_im[0] != 0.0);
      } else {
        CHECK(cp.cls == CriticalPointClass::FoldedFocusStable);
        CHECK(cp.eig_re[0] == doctest::Approx(-0.5 * Gamma));
      }
    }
    CHECK(saddles == 2);
  }
}

TEST_CASE("folded saddles disappear past Gamma delta = 1") {
  RegParams rp = ref_phi();
  // Gamma = gamma^2 eps; the saddle and focus merge where Gamma delta = 1,
  // i.e. gamma = 1/sqrt(eps delta)
  const double gamma_c = 1.0 / std::sqrt(1e-3 * 0.6);
  CHECK(gamma_c == doctest::Approx(40.824829046386306).epsilon(1e-14));
  CHECK(folded_singularities(kRef, rp, 40.8 * 40.8 * 1e-3).size() == 4);
  CHECK_THROWS_AS(folded_singularities(kRef, rp, 40.9 * 40.9 * 1e-3),
                  NoSingularities);
  // bisect the count change onto the analytic bound
  double lo = 40.0, hi = 41.0;
  for (int it = 0; it < 50; ++it) {
    double mid = 0.5 * (lo + hi);
    bool ok = true;
    try {
      folded_singularities(kRef, rp, mid * mid * 1e-3);
    } catch (const NoSingularities&) {
      ok = false;
    }
    (ok ? lo : hi) = mid;
  }
  CHECK(lo == doctest::Approx(gamma_c).epsilon(1e-10));
}

TEST_CASE("the vrai canard closes over one period and crosses onto C_r") {
  RegParams rp = ref_phi();
  auto pts = folded_singularities(kRef, rp, 0.0);
  int checked = 0;
  for (const auto& cp : pts) {
    if (cp.cls != CriticalPointClass::FoldedSaddle) {
      CHECK_THROWS_AS(singular_canard(cp, CanardKind::Vrai, kRef, rp), ModelError);
      continue;
    }
    ++checked;
    CanardSegment vrai = singular_canard(cp, CanardKind::Vrai, kRef, rp);
    CHECK(vrai.closure_error < 1e-6);
    // visits the attracting sheet, then leaves through the fold to |yhat| >= 1
    double span_lo = 1e9, span_hi = -1e9, tail = 0.0;
    for (double yh : vrai.yhat) {
      span_lo = std::min(span_lo, yh);
      span_hi = std::max(span_hi, yh);
    }
    tail = vrai.yhat.back();
    if (cp.yhat < 0) {
      CHECK(span_hi > 0.4);   // the loop on C_a
      CHECK(tail <= -1.0);    // ends past the repelling sheet C_r^-
    } else {
      CHECK(span_lo < -0.4);
      CHECK(tail >= 1.0);
    }
    // theta winds forward by one period and onward through the fold leg
    CHECK(vrai.theta.back() > cp.theta + kTwoPi - 1e-6);
    // the faux canard is the time-reversed twin: same endpoints, flipped order
    CanardSegment faux = singular_canard(cp, CanardKind::Faux, kRef, rp);
    CHECK(faux.closure_error < 1e-6);
    CHECK(std::abs(faux.yhat.front()) >= 1.0);
  }
  CHECK(checked == 2);
}

TEST_CASE("stiff integration tracks a regular stiction solution") {
  // slip-stick initial condition whose PWS solution is regular
  State z0(1.5 / 25.0, 0.0, 0.0);
  ClosenessStudy st = closeness_study(z0, kTwoPi, kRef, 0.6, {4e-3, 2e-3, 1e-3});
  REQUIRE(st.rows.size() == 3);
  CHECK(st.rows[0].sup_distance > st.rows[1].sup_distance);
  CHECK(st.rows[1].sup_distance > st.rows[2].sup_distance);
  // the bound d <= c eps^(2/3): fitted slope at least 2/3 (minus slack)
  CHECK(st.loglog_slope > 0.6);
  CHECK(st.loglog_slope < 1.5);
  CHECK(st.rows[2].sup_distance < 0.05);
  CHECK_THROWS_AS(stiff_integrate(z0, 1.0, kRef, RegParams{0.0, 0.6, 0, 0, 0, 1}),
                  ModelError);
}

TEST_CASE("sticking limit cycle: O(eps) offset, attracting, gone for mu_s <= 1") {
  double x_prev = 0.0;
  for (double e : {2e-3, 1e-3}) {
    RegParams rp = ref_phi(e);
    StickingCycle cyc = sticking_limit_cycle(kRef, rp);
    CHECK(std::abs(cyc.x0) < 1.0 * e);          // |x(0)| = O(eps)
    CHECK(std::abs(cyc.map_derivative) < 1.0);  // attracting
    CHECK_FALSE(cyc.samples.empty());
    // the cycle hugs the attracting sheet: |y| < eps delta throughout
    for (const auto& z : cyc.samples) CHECK(std::abs(z.y) < e * 0.6);
    if (x_prev != 0.0)  // x0 scales linearly in eps
      CHECK(x_prev / cyc.x0 == doctest::Approx(2.0).epsilon(0.01));
    x_prev = cyc.x0;
  }
  Params weak{5.0, 0.9, 0.4};
  CHECK_THROWS_AS(sticking_limit_cycle(weak, ref_phi()), NoStick);
}
