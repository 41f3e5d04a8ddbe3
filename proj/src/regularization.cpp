#include "stiction/regularization.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

namespace stiction {

namespace {

double bisect(const std::function<double(double)>& f, double a, double b,
              double tol = 1e-13) {
  double fa = f(a);
  for (int it = 0; it < 200 && b - a > tol; ++it) {
    double m = 0.5 * (a + b);
    double fm = f(m);
    if (fm == 0.0) return m;
    if ((fa < 0) == (fm < 0)) { a = m; fa = fm; } else { b = m; }
  }
  return 0.5 * (a + b);
}

}  // namespace

RegParams build_phi(double delta, double mu_s, double mu_d, double eps) {
  if (!(delta > 0.0 && delta < 1.0)) throw ModelError("need 0 < delta < 1");
  if (!(mu_s > mu_d && mu_d > 0.0)) throw ModelError("need mu_s > mu_d > 0");
  const double r = mu_s / mu_d;
  Eigen::Matrix4d A;
  const double d2 = delta * delta;
  A << 1, 1, 1, 1,
       7, 5, 3, 1,
       d2 * d2 * d2 * delta, d2 * d2 * delta, d2 * delta, delta,
       7 * d2 * d2 * d2, 5 * d2 * d2, 3 * d2, 1;
  Eigen::Vector4d rhs(1.0, 0.0, r, 0.0);
  Eigen::FullPivLU<Eigen::Matrix4d> lu(A);
  if (!lu.isInvertible())
    throw SingularSystem("phi conditions are linearly dependent for this delta");
  Eigen::Vector4d coef = lu.solve(rhs);
  RegParams rp{eps, delta, coef[0], coef[1], coef[2], coef[3]};
  // Shape checks: the four conditions, and the sign pattern of phi'.
  if (std::abs(rp.phi(1.0 - 1e-16) - 1.0) > 1e-10 ||
      std::abs(rp.phi(delta) - r) > 1e-10 ||
      std::abs(rp.dphi(delta)) > 1e-10)
    throw SingularSystem("phi conditions not satisfied after solve");
  for (int i = 1; i < 200; ++i) {
    double y = delta * i / 200.0;
    if (rp.dphi(y) <= 0.0)
      throw ShapeViolation("phi' not positive on (0, delta)");
  }
  for (int i = 1; i < 200; ++i) {
    double y = delta + (1.0 - delta) * i / 200.0;
    if (y < 1.0 && rp.dphi(y) >= 0.0)
      throw ShapeViolation("phi' not negative on (delta, 1)");
  }
  if (!(rp.ddphi(delta) < 0.0)) throw ShapeViolation("phi''(delta) not negative");
  return rp;
}

RegParams build_phi_st(double eps) {
  // (3y - y^3)/2: C^1 match to sign(y), strictly increasing on (-1, 1).
  return RegParams{eps, 1.0, 0.0, 0.0, -0.5, 1.5};
}

StateDerivative regularized_rhs(const State& z, const Params& p,
                                const RegParams& rp) {
  StateDerivative d;
  d.dx = z.y;
  d.dy = -xi(z, p) - p.mu_d * rp.phi(z.y / rp.eps);
  d.dtheta = 1.0;
  return d;
}

void fast_rhs(double x, double yhat, double theta, const Params& p,
              const RegParams& rp, double eps, double* dx, double* dyhat,
              double* dtheta) {
  *dx = eps * eps * yhat;
  *dyhat = -xi(x, theta, p) - p.mu_d * rp.phi(yhat);
  *dtheta = eps;
}

std::vector<ManifoldRoot> critical_manifold_roots(double xi_value, const Params& p,
                                                  const RegParams& rp) {
  const double target = -xi_value / p.mu_d;
  auto f = [&](double y) { return rp.phi(y) - target; };
  std::vector<ManifoldRoot> roots;
  struct Interval { double a, b; ManifoldBranch br; };
  const double dl = rp.delta;
  const Interval ivs[3] = {{-1.0, -dl, ManifoldBranch::CRMinus},
                           {-dl, dl, ManifoldBranch::CA},
                           {dl, 1.0, ManifoldBranch::CRPlus}};
  for (const auto& iv : ivs) {
    double fa = f(iv.a), fb = f(iv.b);
    if (fa == 0.0) {
      // endpoint roots belong to the branch whose closure contains them;
      // report folds (y = +-delta) once, on the repelling side
      if (iv.br != ManifoldBranch::CA || std::abs(iv.a) != dl)
        roots.push_back({iv.a, iv.br});
      continue;
    }
    if (fb == 0.0) {
      if (iv.br != ManifoldBranch::CA || std::abs(iv.b) != dl)
        roots.push_back({iv.b, iv.br});
      continue;
    }
    if ((fa < 0) != (fb < 0)) roots.push_back({bisect(f, iv.a, iv.b), iv.br});
  }
  // Dedup near-identical roots (fold double roots found from both sides).
  std::sort(roots.begin(), roots.end(),
            [](const ManifoldRoot& l, const ManifoldRoot& r) { return l.yhat < r.yhat; });
  std::vector<ManifoldRoot> out;
  for (const auto& rt : roots) {
    if (!out.empty() && std::abs(rt.yhat - out.back().yhat) < 1e-10) continue;
    out.push_back(rt);
  }
  return out;
}

ReducedRates reduced_flow(double yhat, double theta, const Params& p,
                          const RegParams& rp, double Gamma) {
  ReducedRates r{};
  const double dp = rp.dphi(yhat);
  r.dyhat_desing = -Gamma * yhat - std::cos(theta);
  r.dtheta_desing = p.mu_d * dp;
  r.dtheta_reduced = 1.0;
  r.reduced_defined = std::abs(dp) > 1e-14;
  r.dyhat_reduced = r.reduced_defined
                        ? r.dyhat_desing / (p.mu_d * dp)
                        : std::numeric_limits<double>::quiet_NaN();
  return r;
}

std::vector<CriticalPoint> folded_singularities(const Params& p, const RegParams& rp,
                                                double Gamma) {
  const double dl = rp.delta;
  if (std::abs(Gamma * dl) > 1.0)
    throw NoSingularities("no folded singularities: |Gamma delta| > 1");
  std::vector<CriticalPoint> pts;
  for (int side = 0; side < 2; ++side) {
    const double yh = side == 0 ? dl : -dl;
    const double c = -Gamma * yh;  // cos(theta) at the singularity
    const double th0 = std::acos(std::clamp(c, -1.0, 1.0));
    for (double th : {th0, kTwoPi - th0}) {
      CriticalPoint cp{};
      cp.yhat = yh;
      cp.theta = wrap_angle(th);
      // Desingularized Jacobian [[-Gamma, sin th], [mu_d phi''(yh), 0]].
      const double det = -std::sin(th) * p.mu_d * rp.ddphi(yh);
      const double disc = Gamma * Gamma - 4.0 * det;
      if (disc >= 0.0) {
        const double s = std::sqrt(disc);
        cp.eig_re[0] = 0.5 * (-Gamma + s);
        cp.eig_re[1] = 0.5 * (-Gamma - s);
        cp.eig_im[0] = cp.eig_im[1] = 0.0;
        if (det < 0.0) cp.cls = CriticalPointClass::FoldedSaddle;
        else cp.cls = CriticalPointClass::FoldedNodeStable;
      } else {
        const double s = std::sqrt(-disc);
        cp.eig_re[0] = cp.eig_re[1] = -0.5 * Gamma;
        cp.eig_im[0] = 0.5 * s;
        cp.eig_im[1] = -0.5 * s;
        cp.cls = (Gamma == 0.0) ? CriticalPointClass::FoldedCenter
                                : CriticalPointClass::FoldedFocusStable;
      }
      pts.push_back(cp);
    }
  }
  // Deduplicate theta = 0 / 2 pi coincidences at |Gamma delta| = 1.
  std::vector<CriticalPoint> out;
  for (const auto& cp : pts) {
    bool dup = false;
    for (const auto& q : out)
      if (std::abs(q.yhat - cp.yhat) < 1e-12 &&
          std::abs(wrap_angle(q.theta - cp.theta + kPi) - kPi) < 1e-9)
        dup = true;
    if (!dup) out.push_back(cp);
  }
  return out;
}

namespace {

// Integrate the Gamma = 0 desingularized flow (times `dir`) from u, appending
// samples, until `stop(u)` returns true or the time cap is hit.
void desing_trace(Eigen::VectorXd& u, double dir, const Params& p,
                  const RegParams& rp,
                  const std::function<bool(const Eigen::VectorXd&)>& stop,
                  std::vector<double>* yhat, std::vector<double>* theta) {
  ode::Rhs rhs = [dir, &p, &rp](double, const Eigen::VectorXd& w,
                                Eigen::VectorXd& dw) {
    dw.resize(2);
    dw[0] = dir * (-std::cos(w[1]));
    dw[1] = dir * (p.mu_d * rp.dphi(w[0]));
  };
  ode::Options opt;
  // The canard loop is a saddle connection: local error picked up along the
  // loop is amplified exponentially near the return, so integrate much
  // tighter than the 1e-6 closure target.
  opt.abs_tol = opt.rel_tol = 1e-14;
  opt.max_step = 0.02;
  ode::DormandPrince stepper(rhs, opt);
  stepper.set_observer([&](double, const Eigen::VectorXd& w) {
    yhat->push_back(w[0]);
    theta->push_back(w[1]);
  });
  double t = 0.0;
  const double dt = 0.05;
  while (t < 2000.0 && !stop(u)) {
    stepper.integrate(t, t + dt, u);
    t += dt;
  }
}

}  // namespace

CanardSegment singular_canard(const CriticalPoint& saddle, CanardKind kind,
                              const Params& p, const RegParams& rp) {
  if (saddle.cls != CriticalPointClass::FoldedSaddle)
    throw ModelError("singular_canard requires a folded saddle");
  const double ph2 = p.mu_d * rp.ddphi(saddle.yhat);
  const double lam_u = std::max(saddle.eig_re[0], saddle.eig_re[1]);
  const double lam_s = std::min(saddle.eig_re[0], saddle.eig_re[1]);
  // The faux canard is the vrai canard of the time-reversed flow: flip the
  // flow direction and swap the roles of the two eigendirections
  // (eigenvector for eigenvalue lam is (lam, mu_d phi''(yhat))).
  const double dir = (kind == CanardKind::Vrai) ? 1.0 : -1.0;
  const double lam_grow = (dir > 0) ? lam_u : lam_s;   // expanding for dir * flow
  const double lam_decay = (dir > 0) ? lam_s : lam_u;  // contracting for dir * flow
  auto unit_ray = [&](double lam, bool into_attracting) {
    double vy = lam, vt = ph2;
    const bool inward = (saddle.yhat < 0) == (vy > 0);
    if (inward != into_attracting) { vy = -vy; vt = -vt; }
    const double n = std::hypot(vy, vt);
    return std::pair<double, double>{vy / n, vt / n};
  };

  CanardSegment seg;
  seg.kind = kind;
  const double h0 = 1e-8;

  // Leg 1: the loop on the attracting sheet C_a. Leaving the saddle along the
  // expanding eigendirection, theta winds once around and the orbit returns
  // to the saddle along the contracting one (the level set of
  // sin(theta) + mu_d phi(yhat) through the saddle restricted to |yhat| < delta).
  auto [uy, ut] = unit_ray(lam_grow, true);
  Eigen::VectorXd u(2);
  u << saddle.yhat + h0 * uy, saddle.theta + h0 * ut;
  // The loop is a saddle connection: the trace approaches the return point
  // asymptotically and is eventually ejected along the unstable direction
  // (numerically it exits through the fold). Run until ejection is clear,
  // then take the pass closest to the return point -- the creeping flow makes
  // the samples dense exactly there -- and drop the ejection spur.
  const double theta_return = saddle.theta + dir * kTwoPi;
  auto ejected = [&](const Eigen::VectorXd& w) {
    return dir * (w[1] - theta_return) >= 0.0 ||
           std::abs(w[0]) > rp.delta + 1e-3;
  };
  desing_trace(u, dir, p, rp, ejected, &seg.yhat, &seg.theta);
  std::size_t best = seg.yhat.size() - 1;
  seg.closure_error = std::hypot(u[0] - saddle.yhat, u[1] - theta_return);
  for (std::size_t i = 0; i < seg.yhat.size(); ++i) {
    if (dir * (seg.theta[i] - saddle.theta) <= kPi) continue;
    double d = std::hypot(seg.yhat[i] - saddle.yhat, seg.theta[i] - theta_return);
    if (d < seg.closure_error) { seg.closure_error = d; best = i; }
  }
  seg.yhat.resize(best + 1);
  seg.theta.resize(best + 1);

  // Leg 2: through the fold onto the repelling sheet. In real time the orbit
  // leaves the saddle into |yhat| > delta, which is the contracting ray of the
  // desingularized flow run backward (time runs backward on C_r). Follow it to
  // the edge of the layer, |yhat| = 1, where phi saturates.
  auto [sy, st] = unit_ray(lam_decay, false);
  u << saddle.yhat + h0 * sy, saddle.theta + h0 * st;
  std::vector<double> yh2, th2;
  desing_trace(u, -dir, p, rp,
               [](const Eigen::VectorXd& w) { return std::abs(w[0]) >= 1.0; },
               &yh2, &th2);
  for (std::size_t i = 0; i < yh2.size(); ++i) {
    seg.yhat.push_back(yh2[i]);
    seg.theta.push_back(th2[i] + dir * kTwoPi);  // continue past the winding
  }
  if (kind == CanardKind::Faux) {
    // Real-time orientation: the faux canard runs from C_r to C_a.
    std::reverse(seg.yhat.begin(), seg.yhat.end());
    std::reverse(seg.theta.begin(), seg.theta.end());
  }
  return seg;
}

namespace {

ode::SpectralRadius layer_rate(const Params& p, const RegParams& rp) {
  return [p, rp](double, const Eigen::VectorXd& u) {
    return p.mu_d * std::abs(rp.dphi(u[1] / rp.eps)) / rp.eps + p.gamma;
  };
}

ode::Rhs reg_rhs_2d(const Params& p, const RegParams& rp, double theta0) {
  return [p, rp, theta0](double t, const Eigen::VectorXd& u, Eigen::VectorXd& du) {
    du.resize(2);
    du[0] = u[1];
    du[1] = -xi(u[0], theta0 + t, p) - p.mu_d * rp.phi(u[1] / rp.eps);
  };
}

}  // namespace

SampledTrajectory stiff_integrate(const State& z0, double T, const Params& p,
                                  const RegParams& rp, double tol) {
  if (!(rp.eps > 0.0)) throw ModelError("stiff_integrate requires eps > 0");
  SampledTrajectory out;
  ode::Options opt;
  opt.abs_tol = opt.rel_tol = tol;
  ode::DormandPrince stepper(reg_rhs_2d(p, rp, z0.theta), opt);
  stepper.set_spectral_radius(layer_rate(p, rp));
  stepper.set_observer([&](double t, const Eigen::VectorXd& u) {
    out.t.push_back(t);
    out.z.push_back(State(u[0], u[1], z0.theta + t));
  });
  Eigen::VectorXd u(2);
  u << z0.x, z0.y;
  stepper.integrate(0.0, T, u);
  return out;
}

State stiff_flow(const State& z0, double T, const Params& p, const RegParams& rp,
                 double tol) {
  ode::Options opt;
  opt.abs_tol = opt.rel_tol = tol;
  Eigen::VectorXd u(2);
  u << z0.x, z0.y;
  u = ode::integrate(reg_rhs_2d(p, rp, z0.theta), 0.0, T, u, opt,
                     layer_rate(p, rp));
  return State(u[0], u[1], z0.theta + T);
}

ClosenessStudy closeness_study(const State& z0, double T, const Params& p,
                               double delta, const std::vector<double>& eps_list) {
  auto trajs = integrate_stiction(z0, T, BranchPolicy::StickFirst, p);
  const Trajectory& ref = trajs.front();
  if (!is_regular(ref))
    throw ModelError("closeness study undefined for singular stiction solutions");
  ClosenessStudy st;
  const int nsamp = std::max(2000, int(400.0 * T / kTwoPi));
  for (double e : eps_list) {
    RegParams rp = build_phi(delta, p.mu_s, p.mu_d, e);
    SampledTrajectory reg = stiff_integrate(z0, T, p, rp, 1e-10);
    double d = 0.0;
    // piecewise-linear interpolation of the dense adaptive output
    std::size_t k = 0;
    for (int i = 0; i <= nsamp; ++i) {
      double t = T * i / nsamp;
      while (k + 1 < reg.t.size() && reg.t[k + 1] < t) ++k;
      double t0 = reg.t[k], t1 = reg.t[std::min(k + 1, reg.t.size() - 1)];
      double w = (t1 > t0) ? (t - t0) / (t1 - t0) : 0.0;
      w = std::clamp(w, 0.0, 1.0);
      const State& a = reg.z[k];
      const State& b = reg.z[std::min(k + 1, reg.z.size() - 1)];
      State zr(a.x + w * (b.x - a.x), a.y + w * (b.y - a.y), 0.0);
      State zp = ref.eval(t, p);
      d = std::max(d, std::hypot(zr.x - zp.x, zr.y - zp.y));
    }
    st.rows.push_back({e, d});
  }
  // least-squares slope of log d vs log eps
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const int n = int(st.rows.size());
  for (const auto& row : st.rows) {
    double lx = std::log(row.eps), ly = std::log(row.sup_distance);
    sx += lx; sy += ly; sxx += lx * lx; sxy += lx * ly;
  }
  st.loglog_slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return st;
}

StickingCycle sticking_limit_cycle(const Params& p, const RegParams& rp) {
  if (!(p.mu_s > 1.0))
    throw NoStick("no sticking periodic orbit for mu_s <= 1");
  auto yhat_on_ca = [&](double x, double theta) {
    double v = std::clamp(-xi(x, theta, p) / p.mu_d, rp.phi(-rp.delta) + 1e-12,
                          rp.phi(rp.delta) - 1e-12);
    return bisect([&](double yh) { return rp.phi(yh) - v; }, -rp.delta, rp.delta,
                  1e-14);
  };
  auto poincare = [&](double x0) {
    State z(x0, rp.eps * yhat_on_ca(x0, 0.0), 0.0);
    return stiff_flow(z, kTwoPi, p, rp, 1e-11).x;
  };
  double x = 0.0;
  double fx = poincare(x) - x;
  const double hfd = std::max(1e-7, 10 * rp.eps * 1e-4);
  double deriv = 0.0;
  for (int it = 0; it < 50; ++it) {
    if (std::abs(fx) < 1e-12) break;
    double f1 = poincare(x + hfd) - (x + hfd);
    deriv = (f1 - fx) / hfd;
    x -= fx / deriv;
    fx = poincare(x) - x;
  }
  StickingCycle cyc;
  cyc.x0 = x;
  cyc.map_derivative = (poincare(x + hfd) - poincare(x)) / hfd;
  SampledTrajectory tr =
      stiff_integrate(State(x, rp.eps * yhat_on_ca(x, 0.0), 0.0), kTwoPi, p, rp,
                      1e-11);
  for (std::size_t i = 0; i < tr.z.size(); i += std::max<std::size_t>(1, tr.z.size() / 256))
    cyc.samples.push_back(tr.z[i]);
  return cyc;
}

}  // namespace stiction
