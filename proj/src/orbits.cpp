#include "stiction/orbits.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <sstream>

namespace stiction {

namespace {

double bisect_phi_inverse(const RegParams& rp, double target, double lo, double hi) {
  // phi is strictly monotone on [lo, hi] subintervals of [-1, 1] by shape.
  double flo = rp.phi(lo) - target;
  for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
    double mid = 0.5 * (lo + hi);
    double fm = rp.phi(mid) - target;
    if ((fm < 0) == (flo < 0)) { lo = mid; flo = fm; } else { hi = mid; }
  }
  return 0.5 * (lo + hi);
}

Eigen::Vector2d slipstick_residual(double theta0, double theta_star,
                                   const Params& p) {
  const double g2 = p.gamma * p.gamma;
  const double x0 = (p.mu_s - std::sin(theta0)) / g2;
  const double tau = kPi - theta_star;
  State ze = slip_flow_closed_form(State(x0, 0.0, theta0), -1, p, tau);
  return {ze.x + x0, ze.y};
}

}  // namespace

SlipStickSolution solve_slipstick(double gamma, double theta0_guess,
                                  double theta_star_guess, const Params& p) {
  Params q = p;
  q.gamma = gamma;
  q.validate();
  if (!(q.mu_s > 1.0))
    throw ModelError("slip-stick orbits require mu_s > 1 (no stick phase otherwise)");
  if (std::abs(gamma - 1.0) < kResonanceBand) throw ResonanceGuard(gamma);

  Eigen::Vector2d v(theta0_guess, theta_star_guess);
  Eigen::Vector2d r = slipstick_residual(v[0], v[1], q);
  bool converged = false;
  for (int it = 0; it < 40; ++it) {
    if (r.cwiseAbs().maxCoeff() < 1e-12) { converged = true; break; }
    Eigen::Matrix2d J;
    const double h = 1e-8;
    J.col(0) = (slipstick_residual(v[0] + h, v[1], q) - r) / h;
    J.col(1) = (slipstick_residual(v[0], v[1] + h, q) - r) / h;
    Eigen::Vector2d dv = J.fullPivLu().solve(-r);
    // damped update: keep theta_star inside (0, pi)
    double lam = 1.0;
    for (int k = 0; k < 20; ++k) {
      Eigen::Vector2d vn = v + lam * dv;
      if (vn[1] > 0.0 && vn[1] < kPi) {
        Eigen::Vector2d rn = slipstick_residual(vn[0], vn[1], q);
        if (rn.cwiseAbs().maxCoeff() < r.cwiseAbs().maxCoeff() || lam < 1e-3) {
          v = vn; r = rn;
          break;
        }
      }
      lam *= 0.5;
    }
  }
  if (!converged)
    throw NewtonDivergence("slip-stick Newton did not converge at gamma = " +
                           std::to_string(gamma));

  SlipStickSolution sol{};
  sol.gamma = gamma;
  sol.theta0 = wrap_angle(v[0]);
  sol.theta_star = v[1];
  sol.x0 = (q.mu_s - std::sin(v[0])) / (gamma * gamma);
  sol.residual_norm = r.cwiseAbs().maxCoeff();

  // Admissibility: y < 0 strictly inside the slip arc; the stick arc
  // (phases theta0 - theta_star .. theta0 at x = x0) stays strictly inside
  // |xi| < mu_s before its endpoint.
  const double tau = kPi - sol.theta_star;
  sol.slip_interior_negative = true;
  const int n = 400;
  State z0(sol.x0, 0.0, sol.theta0);
  for (int i = 1; i < n; ++i) {
    double t = tau * i / n;
    if (slip_flow_closed_form(z0, -1, q, t).y >= 0.0) {
      sol.slip_interior_negative = false;
      break;
    }
  }
  sol.stick_no_early_onset = true;
  sol.stick_avoids_opposite_onset = true;
  for (int i = 1; i < n; ++i) {
    double th = sol.theta0 - sol.theta_star * i / n;
    double x = xi(sol.x0, th, q);
    if (x >= q.mu_s) sol.stick_no_early_onset = false;
    if (x <= -q.mu_s) sol.stick_avoids_opposite_onset = false;
  }
  return sol;
}

Trajectory assemble_full_orbit(const SlipStickSolution& sol, const Params& p) {
  Params q = p;
  q.gamma = sol.gamma;
  State z0(sol.x0, 0.0, sol.theta0);
  auto trajs = integrate_stiction(z0, kTwoPi, BranchPolicy::StickFirst, q);
  const Trajectory& traj = trajs.front();
  State ze = traj.eval(traj.t_begin() + kTwoPi, q);
  double err = std::max(std::abs(ze.x - z0.x), std::abs(ze.y - z0.y));
  if (err > 1e-9)
    throw ClosureFailure("periodic orbit closure error " + std::to_string(err));
  return traj;
}

FloquetData floquet_discontinuous(const SlipStickSolution& sol, const Params& p) {
  Params q = p;
  q.gamma = sol.gamma;
  const double g = sol.gamma;
  const double tau = kPi - sol.theta_star;
  const double c0 = std::cos(sol.theta0);
  if (std::abs(c0) < 1e-8)
    throw DegenerateTransition("tangential stick-to-slip transition (cos theta0 = 0)");
  const double xi_land =
      xi(slip_flow_closed_form(State(sol.x0, 0.0, sol.theta0), -1, q, tau), q);
  if (std::abs(xi_land - q.mu_d) < 1e-8)
    throw DegenerateTransition("grazing slip-to-stick landing (xi = mu_d)");

  // Half-period monodromy in (x, y), starting on the stick phase:
  //  - stick transport: identity on the surviving (x) direction,
  //  - exit saltation at xi = mu_s: S_e = I + (Z_slip - Z_s) n^T / (n . Z_s)
  //    with n = (gamma^2, 0) and jump (0, mu_d - mu_s) in (x', y'), giving
  //    S_e = [[1, 0], [gamma^2 (mu_d - mu_s)/cos theta0, 1]],
  //  - analytic slip fundamental matrix Phi(tau),
  //  - landing saltation onto y = 0: rows project out y, S_l = [[1,0],[0,0]]
  //    (the backward non-uniqueness of sticking: the structural zero).
  // The two halves have identical linearizations (the symmetry commutes), so
  // the full monodromy eigenvalue is the square of the half-map's.
  const double m11 = std::cos(g * tau) +
                     std::sin(g * tau) * g * (q.mu_d - q.mu_s) / c0;
  const double lambda = m11 * m11;

  FloquetData fd{};
  fd.multipliers[0] = 1.0;
  fd.multipliers[1] = 0.0;
  fd.multipliers[2] = lambda;
  if (std::abs(lambda - 1.0) < 1e-8) fd.classification = OrbitStability::Degenerate;
  else if (lambda < 1.0) fd.classification = OrbitStability::Attracting;
  else fd.classification = OrbitStability::Repelling;
  return fd;
}

namespace {

double pws_max_abs_y(const SlipStickSolution& sol, const Params& p) {
  Params q = p;
  q.gamma = sol.gamma;
  const double tau = kPi - sol.theta_star;
  State z0(sol.x0, 0.0, sol.theta0);
  double m = 0.0;
  for (int i = 0; i <= 400; ++i)
    m = std::max(m, std::abs(slip_flow_closed_form(z0, -1, q, tau * i / 400).y));
  return m;
}

}  // namespace

PwsBranch continue_branch_pws(double gamma_start, double gamma_end,
                              const SlipStickSolution& seed, const Params& p) {
  PwsBranch branch;
  branch.label = gamma_start < 1.0 ? BranchLabel::Pi0Left : BranchLabel::Pi0Right;
  branch.termination = BranchTermination::RangeEnd;
  const double dir = gamma_end > gamma_start ? 1.0 : -1.0;
  double gamma = gamma_start;
  SlipStickSolution sol = seed;
  if (std::abs(seed.gamma - gamma_start) > 1e-12)
    sol = solve_slipstick(gamma_start, seed.theta0, seed.theta_star, p);
  auto push = [&](const SlipStickSolution& s) {
    branch.points.push_back({s, floquet_discontinuous(s, p), pws_max_abs_y(s, p)});
  };
  push(sol);
  double step = std::min(0.05, std::abs(gamma_end - gamma_start));
  while (dir * (gamma_end - gamma) > 1e-9) {
    if (sol.theta_star < 0.03) { branch.termination = BranchTermination::PureSlipLimit; break; }
    if (sol.theta_star > kPi - 0.03) { branch.termination = BranchTermination::FullStickLimit; break; }
    if (std::abs(sol.theta0 - kPi / 2) < 0.03) { branch.termination = BranchTermination::TangencyLimit; break; }
    double g_next = gamma + dir * step;
    if (dir * (g_next - gamma_end) > 0) g_next = gamma_end;
    if (std::abs(g_next - 1.0) < kResonanceBand ||
        (gamma - 1.0) * (g_next - 1.0) < 0.0) {
      branch.termination = BranchTermination::ResonanceGuardHit;
      break;
    }
    try {
      SlipStickSolution next =
          solve_slipstick(g_next, sol.theta0, sol.theta_star, p);
      if (!next.admissible()) throw NewtonDivergence("inadmissible");
      sol = next;
      gamma = g_next;
      push(sol);
      step = std::min(step * 1.5, 0.5);
    } catch (const ModelError&) {
      step *= 0.5;
      if (step < 1e-6) {
        branch.termination = BranchTermination::ContinuationStall;
        break;
      }
    }
  }
  return branch;
}

// ---------------------------------------------------------------------------
// Regularized orbits: multiple shooting over the half period with the
// symmetric closure u(pi) = -u(0). The mesh is refined so each segment's
// variational expansion stays modest, which keeps the block Newton system
// well conditioned even on canard segments where the full monodromy reaches
// e^{c/eps}. The node vector is also what makes the fold continuable: members
// of the canard family are exponentially close over the stick phase (a single
// anchor state cannot tell them apart in double precision) but O(1) apart
// after the delayed slip departure, which the post-departure nodes resolve.
// ---------------------------------------------------------------------------

namespace {

struct SegResult {
  Eigen::Vector2d u_end;
  Eigen::Matrix2d Phi;      // variational transport over the segment
  Eigen::Vector2d dudg;     // gamma-sensitivity of the endpoint
  double log_det;           // int tr J dt (Abel), for the contracted multiplier
  double max_abs_y;
};

SegResult propagate_reg(const Eigen::Vector2d& u0, double gamma,
                        const Params& p, const RegParams& rp, double t0,
                        double t1, double tol = 1e-12,
                        std::vector<double>* sample_t = nullptr,
                        std::vector<Eigen::Vector2d>* sample_u = nullptr) {
  Params q = p;
  q.gamma = gamma;
  const double g2 = gamma * gamma;
  // joint system: state, variational matrix, Abel integral, and the
  // gamma-sensitivity (computed variationally rather than by differencing,
  // which would amplify the integrator's accumulated noise)
  ode::Rhs rhs = [&q, &rp, g2, gamma](double t, const Eigen::VectorXd& w,
                                      Eigen::VectorXd& dw) {
    dw.resize(9);
    const double jy = -(q.mu_d / rp.eps) * rp.dphi(w[1] / rp.eps);
    dw[0] = w[1];
    dw[1] = -(g2 * w[0] + std::sin(t)) - q.mu_d * rp.phi(w[1] / rp.eps);
    // variational: d(Phi)/dt = [[0,1],[-g2, jy]] Phi, plus Abel integral
    dw[2] = w[4];             // Phi11' = Phi21
    dw[3] = w[5];             // Phi12' = Phi22
    dw[4] = -g2 * w[2] + jy * w[4];
    dw[5] = -g2 * w[3] + jy * w[5];
    dw[6] = jy;
    // sensitivity: v' = J v + df/dgamma, df/dgamma = (0, -2 gamma x)
    dw[7] = w[8];
    dw[8] = -g2 * w[7] + jy * w[8] - 2.0 * gamma * w[0];
  };
  ode::SpectralRadius rho = [&q, &rp](double, const Eigen::VectorXd& w) {
    return q.mu_d * std::abs(rp.dphi(w[1] / rp.eps)) / rp.eps + q.gamma;
  };
  ode::Options opt;
  opt.abs_tol = opt.rel_tol = tol;
  opt.max_step = 0.02;
  // Step well inside the stability interval: at the boundary the scheme's
  // damping of the layer mode deviates from the exact exponential by ~1e-3,
  // an error the embedded estimator cannot see, which would poison the
  // variational matrices (shooting Jacobians) at that level.
  opt.stability_extent = 0.5;
  ode::DormandPrince stepper(rhs, opt);
  stepper.set_spectral_radius(rho);
  SegResult res;
  res.max_abs_y = std::abs(u0[1]);
  if (sample_t) {
    sample_t->push_back(t0);
    sample_u->push_back(u0);
  }
  stepper.set_observer([&](double t, const Eigen::VectorXd& w) {
    res.max_abs_y = std::max(res.max_abs_y, std::abs(w[1]));
    if (sample_t && t > sample_t->back()) {
      sample_t->push_back(t);
      sample_u->push_back(Eigen::Vector2d(w[0], w[1]));
    }
  });
  Eigen::VectorXd w(9);
  w << u0[0], u0[1], 1, 0, 0, 1, 0, 0, 0;
  stepper.integrate(t0, t1, w);
  res.u_end = {w[0], w[1]};
  res.Phi << w[2], w[3], w[4], w[5];
  res.log_det = w[6];
  res.dudg = {w[7], w[8]};
  if (sample_t && t1 > sample_t->back()) {
    sample_t->push_back(t1);
    sample_u->push_back(res.u_end);
  }
  return res;
}

// Evaluation of the multiple-shooting map: F_i = flow(u_i; t_i -> t_{i+1})
// minus the next node (the last segment closes against -u_0).
struct MsEval {
  std::vector<SegResult> seg;
  Eigen::VectorXd F;
  double rnorm = 0.0;
  double log_det_sum = 0.0;  // over the half period
  double max_abs_y = 0.0;
  double amp_max = 1.0;      // largest segment |Phi| entry
};

MsEval ms_eval(const std::vector<double>& ts,
               const std::vector<Eigen::Vector2d>& u, double gamma,
               const Params& p, const RegParams& rp, double tol = 1e-12) {
  const int m = int(u.size());
  MsEval ev;
  ev.seg.resize(m);
  ev.F.resize(2 * m);
  for (int i = 0; i < m; ++i) {
    ev.seg[i] = propagate_reg(u[i], gamma, p, rp, ts[i], ts[i + 1], tol);
    Eigen::Vector2d target = (i + 1 < m) ? u[i + 1] : Eigen::Vector2d(-u[0]);
    ev.F.segment<2>(2 * i) = ev.seg[i].u_end - target;
    ev.log_det_sum += ev.seg[i].log_det;
    ev.max_abs_y = std::max(ev.max_abs_y, ev.seg[i].max_abs_y);
    ev.amp_max = std::max(ev.amp_max, ev.seg[i].Phi.cwiseAbs().maxCoeff());
  }
  ev.rnorm = ev.F.cwiseAbs().maxCoeff();
  return ev;
}

// Block-bidiagonal Jacobian of the shooting map with respect to the nodes.
Eigen::MatrixXd ms_jac(const MsEval& ev) {
  const int m = int(ev.seg.size());
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(2 * m, 2 * m);
  for (int i = 0; i < m; ++i) {
    J.block<2, 2>(2 * i, 2 * i) = ev.seg[i].Phi;
    if (i + 1 < m)
      J.block<2, 2>(2 * i, 2 * (i + 1)) = -Eigen::Matrix2d::Identity();
    else
      J.block<2, 2>(2 * i, 0) += Eigen::Matrix2d::Identity();
  }
  return J;
}

void fill_multipliers(const MsEval& ev, RegOrbit* orb) {
  // Full monodromy M = Phi_half^2 (the symmetry conjugates the two halves by
  // -I, which commutes with everything). The half-period matrix is assembled
  // as a log-scaled product of segment matrices, and its determinant from the
  // Abel integral, so nothing overflows or underflows on canard segments.
  Eigen::Matrix2d M = Eigen::Matrix2d::Identity();
  double log_scale = 0.0;
  for (const auto& s : ev.seg) {
    M = s.Phi * M;
    double sc = M.cwiseAbs().maxCoeff();
    if (sc > 0) { M /= sc; log_scale += std::log(sc); }
  }
  const double tr = M.trace();
  const double det_scaled = std::exp(ev.log_det_sum - 2.0 * log_scale);
  const double disc = tr * tr - 4.0 * det_scaled;
  if (disc >= 0.0) {
    const double a1 = 0.5 * (std::abs(tr) + std::sqrt(std::max(disc, 0.0)));
    const double log_l1 = log_scale + std::log(std::max(a1, 1e-300));
    orb->log_mu3 = 2.0 * log_l1;
    orb->log_mu2 = 2.0 * (ev.log_det_sum - log_l1);
  } else {
    orb->log_mu3 = orb->log_mu2 = ev.log_det_sum;  // complex, |lambda|^2 = det
  }
  orb->max_abs_y = ev.max_abs_y;
}

// Mesh over [0, pi] that caps each segment's plain length and, separately,
// its accumulated repelling-layer expansion (trapezoid of the layer
// stiffness bound along the current orbit). The layer budget is tight
// (well under e per segment): a segment spanning a transit of the repelling
// band has a flow map whose curvature grows exponentially with the transit
// amplification, and a single such segment shrinks Newton's validity radius
// below the distance to the orbit, flattening it to an unconditional stall.
std::vector<double> mesh_from_samples(const std::vector<double>& st,
                                      const std::vector<Eigen::Vector2d>& su,
                                      double gamma, double mu_d,
                                      const RegParams& rp,
                                      double refine = 1.0,
                                      double layer_budget = 0.7) {
  const double cap = 4.0 / refine, max_dt = 0.35 / refine,
               layer_cap = layer_budget / refine;
  auto layer_rate = [&](double y) {
    return (mu_d / rp.eps) * std::max(-rp.dphi(y / rp.eps), 0.0);
  };
  std::vector<double> ts{0.0};
  double acc = 0.0, lacc = 0.0;
  for (std::size_t k = 1; k < st.size(); ++k) {
    const double dt = st[k] - st[k - 1];
    const bool slip = std::min(std::abs(su[k - 1][1]), std::abs(su[k][1])) >
                      4.0 * rp.eps;
    acc += gamma * dt * (slip ? 5.0 : 1.0);  // several nodes per slip arc
    lacc += 0.5 * (layer_rate(su[k - 1][1]) + layer_rate(su[k][1])) * dt;
    if ((acc >= cap || lacc >= layer_cap || st[k] - ts.back() >= max_dt) &&
        st[k] < kPi - 0.02) {
      ts.push_back(st[k]);
      acc = lacc = 0.0;
    }
  }
  ts.push_back(kPi);
  // pad short meshes so the node vector has enough post-departure resolution
  while (int(ts.size()) - 1 < 12) {
    std::vector<double> fine;
    for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
      fine.push_back(ts[i]);
      fine.push_back(0.5 * (ts[i] + ts[i + 1]));
    }
    fine.push_back(kPi);
    ts = fine;
  }
  return ts;
}

std::vector<Eigen::Vector2d> nodes_from_samples(
    const std::vector<double>& st, const std::vector<Eigen::Vector2d>& su,
    const std::vector<double>& ts) {
  std::vector<Eigen::Vector2d> u;
  std::size_t k = 0;
  for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
    while (k + 1 < st.size() && st[k + 1] <= ts[i]) ++k;
    double w = (st[k + 1] > st[k]) ? (ts[i] - st[k]) / (st[k + 1] - st[k]) : 0.0;
    u.push_back((1.0 - w) * su[k] + w * su[k + 1]);
  }
  return u;
}

// Node states exactly on the current shooting solution: each new node is
// reached by integrating from the last old node at or before it, so the
// re-meshed nodes sit on the orbit to integrator tolerance rather than the
// O(h^2) interpolation error of the dense samples. On canard legs the
// distinction decides convergence: neighboring members of the family differ
// by less than interpolation error over the stick phase, and a re-mesh that
// steps off the orbit hands the polish to a shorter-leg neighbor.
std::vector<Eigen::Vector2d> nodes_on_orbit(const std::vector<double>& ts_old,
                                            const std::vector<Eigen::Vector2d>& u_old,
                                            double gamma, const Params& p,
                                            const RegParams& rp,
                                            const std::vector<double>& ts_new) {
  std::vector<Eigen::Vector2d> u;
  u.reserve(ts_new.size() - 1);
  std::size_t i = 0;  // old segment owning the running state
  Eigen::Vector2d w = u_old[0];
  double tw = ts_old[0];
  for (std::size_t j = 0; j + 1 < ts_new.size(); ++j) {
    const double tau = ts_new[j];
    while (i + 1 < u_old.size() && ts_old[i + 1] <= tau + 1e-15) {
      ++i;
      w = u_old[i];
      tw = ts_old[i];
    }
    if (tau > tw + 1e-15) {
      w = propagate_reg(w, gamma, p, rp, tw, tau).u_end;
      tw = tau;
    }
    u.push_back(w);
  }
  return u;
}

// Dense samples of the current half orbit, stitched segment by segment (a
// single sweep from u_0 would leave the orbit after the canard departure).
void dense_half(const std::vector<double>& ts,
                const std::vector<Eigen::Vector2d>& u, double gamma,
                const Params& p, const RegParams& rp, std::vector<double>* st,
                std::vector<Eigen::Vector2d>* su) {
  st->clear();
  su->clear();
  for (std::size_t i = 0; i + 1 < ts.size(); ++i)
    propagate_reg(u[i], gamma, p, rp, ts[i], ts[i + 1], 1e-12, st, su);
}

constexpr double kMsResidualFloor = 1e-9;

double ms_floor_tol(const MsEval& ev) {
  return std::max(kMsResidualFloor, 500.0 * 1e-12 * ev.amp_max);
}

// Column-scaled Levenberg-Marquardt with a geodesic (second-order) step
// correction. The shooting system near canard segments has a narrow curved
// valley: one soft direction (sigma_min ~ 1e-3) mixing O(1) motion of the
// slip-arc nodes with O(eps) motion of the layer nodes, whose residual is
// quadratic already at eps-scale steps. Marquardt scaling (damping by the
// column norms of A) shapes the trust region to that anisotropy, and the
// acceleration term - the damped solve against the directional second
// derivative of the residual - lets the iteration follow the valley floor
// instead of stalling against its walls.
struct LmFactors {
  Eigen::VectorXd D;  // column scales
  Eigen::JacobiSVD<Eigen::MatrixXd> svd;
  explicit LmFactors(const Eigen::MatrixXd& A) {
    D = A.colwise().norm();
    const double dmax = D.maxCoeff();
    for (Eigen::Index i = 0; i < D.size(); ++i)
      D[i] = std::max(D[i], 1e-10 * std::max(dmax, 1.0));
    svd.compute(A * D.cwiseInverse().asDiagonal(),
                Eigen::ComputeThinU | Eigen::ComputeThinV);
  }
  // argmin |A dx + R|^2 + mu^2 |D dx|^2, from the SVD of the scaled matrix
  // (never forms A^T A, whose squared condition number would wash out the
  // step at small mu)
  Eigen::VectorXd step(const Eigen::VectorXd& R, double mu) const {
    Eigen::VectorXd c = svd.matrixU().transpose() * (-R);
    const auto& s = svd.singularValues();
    for (Eigen::Index i = 0; i < c.size(); ++i)
      c[i] *= s[i] / (s[i] * s[i] + mu * mu);
    return D.cwiseInverse().asDiagonal() * (svd.matrixV() * c);
  }
};

// Damped Newton on the shooting system. With free_gamma the system is
// underdetermined (gamma joins the unknowns): either the minimum-norm LM
// step converges to the nearest point of the branch, or an optional linear
// constraint row crow . (u, gamma) = crhs squares the system. Pinning the
// polish to the plane through the corrected point orthogonal to the secant
// from the previous branch point keeps it regular through the fold (where
// the fixed-gamma problem is singular, two orbits coalescing) without
// letting it slide along the orbit family.
bool ms_newton(const std::vector<double>& ts, std::vector<Eigen::Vector2d>* u,
               double* gamma_io, const Params& p, const RegParams& rp,
               MsEval* out, bool free_gamma = false,
               const Eigen::VectorXd* crow = nullptr, double crhs = 0.0) {
  const bool trace = std::getenv("STICTION_TRACE") != nullptr;
  const int m = int(u->size());
  double gamma = *gamma_io;
  MsEval ev = ms_eval(ts, *u, gamma, p, rp);
  const int n = 2 * m + (free_gamma ? 1 : 0);
  const int nr = 2 * m + (crow ? 1 : 0);
  auto cval = [&](const std::vector<Eigen::Vector2d>& uu, double gg) {
    double c = (*crow)[2 * m] * gg - crhs;
    for (int i = 0; i < m; ++i)
      c += crow->segment<2>(2 * i).dot(uu[i]);
    return c;
  };
  auto resid = [&](const MsEval& e, const std::vector<Eigen::Vector2d>& uu,
                   double gg) {
    Eigen::VectorXd R(nr);
    R.head(2 * m) = e.F;
    if (crow) R[2 * m] = cval(uu, gg);
    return R;
  };
  auto converged = [&](const MsEval& e, const std::vector<Eigen::Vector2d>& uu,
                       double gg) {
    return e.rnorm < ms_floor_tol(e) &&
           (!crow || std::abs(cval(uu, gg)) < 1e-9);
  };
  double mu = 1e-3;
  for (int it = 0; it < 120; ++it) {
    if (converged(ev, *u, gamma)) {
      *gamma_io = gamma;
      *out = std::move(ev);
      return true;
    }
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(nr, n);
    A.topLeftCorner(2 * m, 2 * m) = ms_jac(ev);
    if (free_gamma)
      for (int i = 0; i < m; ++i)
        A.block<2, 1>(2 * i, 2 * m) = ev.seg[i].dudg;
    if (crow) A.row(2 * m) = crow->transpose();
    Eigen::VectorXd R = resid(ev, *u, gamma);
    LmFactors lf(A);
    bool accepted = false;
    double dun = 0.0;
    for (int k = 0; k < 16; ++k) {
      Eigen::VectorXd v = lf.step(R, mu);
      if (!v.allFinite()) return false;
      dun = v.cwiseAbs().maxCoeff();
      if (dun < 1e-13 && mu < 1e-6) {
        *gamma_io = gamma;
        const bool tiny_ok = ev.rnorm < 10.0 * ms_floor_tol(ev) &&
                             (!crow || std::abs(cval(*u, gamma)) < 1e-9);
        *out = std::move(ev);
        return tiny_ok;
      }
      // directional second derivative of the shooting map along v (the
      // constraint row is linear, so its contribution cancels exactly)
      const double hg = 0.5;
      std::vector<Eigen::Vector2d> uh(*u);
      for (int i = 0; i < m; ++i) uh[i] += hg * v.segment<2>(2 * i);
      double gh = gamma + (free_gamma ? hg * v[2 * m] : 0.0);
      MsEval evh = ms_eval(ts, uh, gh, p, rp);
      Eigen::VectorXd fvv =
          (2.0 / (hg * hg)) * (resid(evh, uh, gh) - R - hg * (A * v));
      Eigen::VectorXd acc = lf.step(fvv, mu);
      if (acc.norm() > 1.5 * v.norm()) {  // curvature beyond the model
        mu *= 4.0;
        continue;
      }
      Eigen::VectorXd dU = v + 0.5 * acc;
      std::vector<Eigen::Vector2d> un(*u);
      for (int i = 0; i < m; ++i) un[i] += dU.segment<2>(2 * i);
      double gn = gamma + (free_gamma ? dU[2 * m] : 0.0);
      MsEval evn = ms_eval(ts, un, gn, p, rp);
      const double f0 = R.squaredNorm();
      const double pred = f0 - (R + A * v).squaredNorm();
      const double rho =
          (f0 - resid(evn, un, gn).squaredNorm()) / std::max(pred, 1e-300);
      if (rho > 1e-3 || converged(evn, un, gn)) {
        *u = std::move(un);
        gamma = gn;
        ev = std::move(evn);
        if (rho > 0.75) mu = std::max(mu / 3.0, 1e-10);
        else if (rho < 0.25) mu *= 2.0;
        accepted = true;
        break;
      }
      mu *= 4.0;
    }
    if (trace)
      std::fprintf(stderr, "[msn] it=%d mu=%.3g rnorm=%.3e du=%.3e\n", it, mu,
                   ev.rnorm, dun);
    if (!accepted) break;
  }
  *gamma_io = gamma;
  if (trace && ev.rnorm >= 10.0 * ms_floor_tol(ev)) {
    for (int i = 0; i < m; ++i)
      std::fprintf(stderr,
                   "[msn]   seg %2d t=[%.4f,%.4f] |F|=%.3e |Phi|=%.3e u=(%.6g,%.6g)\n",
                   i, ts[i], ts[i + 1],
                   ev.F.segment<2>(2 * i).cwiseAbs().maxCoeff(),
                   ev.seg[i].Phi.cwiseAbs().maxCoeff(), (*u)[i][0], (*u)[i][1]);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(ms_jac(ev),
                                          Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    Eigen::VectorXd proj = svd.matrixU().transpose() * ev.F;
    const int n = int(s.size());
    for (int i = std::max(0, n - 4); i < n; ++i)
      std::fprintf(stderr, "[msn]   sigma[%d]=%.3e  |u^T F|=%.3e  needed dX=%.3e\n",
                   i, s[i], std::abs(proj[i]), std::abs(proj[i]) / s[i]);
    // where does the soft mode live?
    Eigen::VectorXd vmin = svd.matrixV().col(n - 1);
    for (int i = 0; i < m; ++i)
      std::fprintf(stderr, "[msn]   vmin node %2d: (%.3e, %.3e)\n", i,
                   vmin[2 * i], vmin[2 * i + 1]);
    // probe the residual along the soft mode: fractional steps toward the
    // linear-model optimum, reporting predicted vs actual
    const double dstar = -proj[n - 1] / s[n - 1];
    for (double alpha : {0.01, 0.03, 0.1, 0.3, 1.0}) {
      std::vector<Eigen::Vector2d> up(*u);
      for (int i = 0; i < m; ++i)
        up[i] += alpha * dstar * vmin.segment<2>(2 * i);
      MsEval evp = ms_eval(ts, up, gamma, p, rp);
      Eigen::VectorXd pred = ev.F + alpha * dstar * s[n - 1] *
                                        svd.matrixU().col(n - 1);
      Eigen::VectorXd dev = (evp.F - pred).cwiseAbs();
      int imax = 0;
      dev.maxCoeff(&imax);
      std::fprintf(stderr,
                   "[msn]   probe a=%.2f |F|2=%.3e (pred %.3e) rnorm=%.3e "
                   "dev_max=%.3e at F[%d] (seg %d)\n",
                   alpha, evp.F.norm(), pred.norm(), evp.rnorm, dev[imax],
                   imax, imax / 2);
    }
  }
  const bool ok = ev.rnorm < 10.0 * ms_floor_tol(ev) &&
                  (!crow || std::abs(cval(*u, gamma)) < 1e-8);
  *out = std::move(ev);
  return ok;
}

// Re-mesh the converged orbit onto an expansion-equilibrated mesh and polish
// with gamma free, so the polish stays regular at the fold. Without an
// anchor the polish takes the minimum-norm step onto the nearest branch
// point; with dense samples of a previous branch point (pst, psu, pg) it is
// instead pinned to the plane through the resampled orbit orthogonal to the
// secant from that point, which keeps the polish from sliding along the
// orbit family where members are nearly indistinguishable.
bool remesh_and_polish(std::vector<double>* ts, std::vector<Eigen::Vector2d>* u,
                       double* gamma, const Params& p, const RegParams& rp,
                       MsEval* out, std::vector<double>* st = nullptr,
                       std::vector<Eigen::Vector2d>* su = nullptr,
                       const std::vector<double>* pst = nullptr,
                       const std::vector<Eigen::Vector2d>* psu = nullptr,
                       double pg = 0.0, double refine = 1.0,
                       double layer_budget = 0.7) {
  std::vector<double> st_loc;
  std::vector<Eigen::Vector2d> su_loc;
  if (!st) { st = &st_loc; su = &su_loc; }
  dense_half(*ts, *u, *gamma, p, rp, st, su);
  std::vector<double> ts_new =
      mesh_from_samples(*st, *su, *gamma, p.mu_d, rp, refine, layer_budget);
  std::vector<Eigen::Vector2d> u_new = nodes_on_orbit(*ts, *u, *gamma, p, rp, ts_new);
  MsEval ev;
  double g = *gamma;
  const int m = int(u_new.size());
  Eigen::VectorXd crow;
  double crhs = 0.0;
  bool have_anchor = false;
  if (pst && !pst->empty()) {
    std::vector<Eigen::Vector2d> u_prev = nodes_from_samples(*pst, *psu, ts_new);
    crow.resize(2 * m + 1);
    for (int i = 0; i < m; ++i)
      crow.segment<2>(2 * i) = u_new[i] - u_prev[i];
    crow[2 * m] = g - pg;
    const double nn = crow.norm();
    if (nn > 1e-14) {
      crow /= nn;
      crhs = crow[2 * m] * g;
      for (int i = 0; i < m; ++i)
        crhs += crow.segment<2>(2 * i).dot(u_new[i]);
      have_anchor = true;
    }
  }
  // without an anchor there is nothing to pay for the extra unknown, and a
  // free gamma would let the polish drift along the family
  if (!ms_newton(ts_new, &u_new, &g, p, rp, &ev,
                 /*free_gamma=*/have_anchor, have_anchor ? &crow : nullptr,
                 crhs))
    return false;
  *ts = std::move(ts_new);
  *u = std::move(u_new);
  *gamma = g;
  *out = std::move(ev);
  return true;
}

RegOrbit make_orbit(const std::vector<double>& ts,
                    const std::vector<Eigen::Vector2d>& u, double gamma,
                    const RegParams& rp, const MsEval& ev) {
  RegOrbit orb;
  orb.gamma = gamma;
  orb.eps = rp.eps;
  orb.ts = ts;
  orb.u = u;
  orb.residual = ev.rnorm;
  fill_multipliers(ev, &orb);
  return orb;
}

// Walk the family from the regular branch around its fold and down the
// connecting canard segment in the departure-delay chart. Near the fold,
// pseudo-arclength in (nodes, gamma) degenerates: members of the canard
// family are exponentially close over the stick phase, so the sheets that
// meet at the fold are separated by less than the corrector's attainable
// residual and every sloppy step risks hopping between them. The family's
// honest coordinate is the delay of the slip departure. It is probed by
// pinning the y-value of the first node past the departure -- a phase where
// neighboring members differ at O(1) -- and letting gamma float: in that
// chart the fold in gamma is a regular point. The pinned value s is walked
// toward the slow-sheet scale, and the pin is moved to a later phase each
// time the delayed departure overtakes it.
// Deep on the canard segment -- once the leg reaches the landing fold of
// the repelling sheet -- gamma is a regular parameter again and the
// coexisting members at fixed gamma are O(1) apart in node space, so the
// branch is walked down by plain square Newton solves at stepped-down
// gamma values. Advances *ts/*u/*gamma in place; returns false if not even
// the first step could be taken (the segment is still too close to its
// fold), so the caller can keep walking in the departure-delay chart from
// wherever the march left off and try again later.
bool canard_gamma_march(RegBranch* branch, std::vector<double>* ts,
                        std::vector<Eigen::Vector2d>* u, double* gamma,
                        double gamma_stop, const Params& p,
                        const RegParams& rp) {
  const bool trace = std::getenv("STICTION_TRACE") != nullptr;
  double dg = 0.25;
  int bad_streak = 0;
  bool advanced = false;
  double lmu3_peak = branch->points.back().orbit.log_mu3;
  for (int it = 0; it < 300 && *gamma > gamma_stop; ++it) {
    double g_try = std::max(*gamma - dg, gamma_stop - 0.05);
    std::vector<double> ts_try = *ts;
    std::vector<Eigen::Vector2d> u_try = *u;
    MsEval ev;
    bool ok = ms_newton(ts_try, &u_try, &g_try, p, rp, &ev);
    const RegOrbit& prev = branch->points.back().orbit;
    if (ok) {
      std::vector<double> st;
      std::vector<Eigen::Vector2d> su;
      dense_half(ts_try, u_try, g_try, p, rp, &st, &su);
      std::vector<double> ts_new =
          mesh_from_samples(st, su, g_try, p.mu_d, rp, 1.0, 4.0);
      std::vector<Eigen::Vector2d> u_new =
          nodes_on_orbit(ts_try, u_try, g_try, p, rp, ts_new);
      MsEval ev2;
      double g2 = g_try;
      if (ms_newton(ts_new, &u_new, &g2, p, rp, &ev2)) {
        ts_try = std::move(ts_new);
        u_try = std::move(u_new);
        ev = std::move(ev2);
      } else {
        ok = false;
      }
      RegOrbit pt = make_orbit(ts_try, u_try, g_try, rp, ev);
      // the leg depth eps*log|mu3| varies slowly along this stretch of the
      // segment and does not fall off before the junction with the left
      // branch, while the corrector's basin around the member is
      // exponentially narrow in the layer nodes: a sustained drop from the
      // deepest member seen means the solve slid to a shallower coexisting
      // member, so reject the step and retry shorter
      if (!ok || pt.log_mu3 < 0.85 * lmu3_peak ||
          pt.max_abs_y < 0.5 * prev.max_abs_y ||
          pt.max_abs_y > 2.0 * prev.max_abs_y)
        ok = false;
      if (ok) {
        *ts = std::move(ts_try);
        *u = std::move(u_try);
        *gamma = g_try;
        if (pt.log_mu3 > std::log(1e12))
          branch->warnings.push_back(
              "log|mu3| = " + std::to_string(pt.log_mu3) + " at gamma = " +
              std::to_string(pt.gamma) + "; reported from accumulated logs");
        branch->points.push_back({pt, BranchLabel::PiEpsCenter});
        if (trace)
          std::fprintf(stderr,
                       "[march] it=%d g=%.6f m=%d maxy=%.5f lmu3=%.1f\n", it,
                       *gamma, int(u->size()), pt.max_abs_y, pt.log_mu3);
        advanced = true;
        bad_streak = 0;
        lmu3_peak = std::max(lmu3_peak, pt.log_mu3);
        // cap the step so the family stays densely enough sampled for
        // nearest-point queries downstream
        dg = std::min(dg * 1.5, 0.75);
        continue;
      }
    }
    if (!advanced) return false;  // not past the corner yet
    dg *= 0.5;
    if (trace)
      std::fprintf(stderr, "[march] it=%d reject (dg -> %.4f)\n", it, dg);
    if (++bad_streak > 10 || dg < 1e-3) return true;
  }
  return true;
}

void canard_chart_descent(RegBranch* branch, std::vector<double> ts,
                          std::vector<Eigen::Vector2d> u, double gamma,
                          double gamma_stop, const Params& p,
                          const RegParams& rp) {
  const bool trace = std::getenv("STICTION_TRACE") != nullptr;
  const double eps = rp.eps;
  // the entry orbit comes from the arclength stage and its first pinned
  // solve can shift gamma by a transient; the fold is judged only against
  // the running maximum over the chart's own accepted points
  double gamma_max = -std::numeric_limits<double>::infinity();
  double g_prev = gamma;
  int folds = std::isnan(branch->gamma_fold) ? 0 : 1;
  double fac = 0.7;  // multiplicative step on the pinned value
  int bad_streak = 0;
  int since_march = 0;  // chart accepts since the last march probe
  for (int it = 0; it < 1200 && gamma > gamma_stop; ++it) {
    // pin the first node clearly out of the layer, just past the current
    // departure: walking its value back toward the slow-sheet scale delays
    // the departure by about one transition width per solve, and after the
    // re-mesh the pin advances with it
    int k = -1;
    for (std::size_t i = 0; i + 1 < ts.size(); ++i)
      if (std::abs(u[i][1]) > 6.0 * eps) { k = int(i); break; }
    if (k < 0 || ts[k] > kPi - 0.1) {
      branch->warnings.push_back("canard chart lost the slip arc at gamma = " +
                                 std::to_string(gamma));
      return;
    }
    const int m = int(u.size());
    const double s_cur = u[k][1];
    const double s_next = s_cur * fac;
    Eigen::VectorXd pin = Eigen::VectorXd::Zero(2 * m + 1);
    pin[2 * k + 1] = 1.0;

    std::vector<double> ts_try = ts;
    std::vector<Eigen::Vector2d> u_try = u;
    double g_try = gamma;
    MsEval ev;
    bool ok = ms_newton(ts_try, &u_try, &g_try, p, rp, &ev,
                        /*free_gamma=*/true, &pin, s_next);
    if (ok) {
      // re-mesh for the grown leg and polish holding the same node fixed
      std::vector<double> st;
      std::vector<Eigen::Vector2d> su;
      dense_half(ts_try, u_try, g_try, p, rp, &st, &su);
      const double lmu3_prev = branch->points.back().orbit.log_mu3;
      // the pin keeps the system well conditioned, so the layer budget can
      // be relaxed relative to the arclength stage (whose e^0.7 budget
      // would put log|mu3|/0.7 nodes on the leg and make every solve cost
      // minutes) -- but only up to the point where the resample/polish
      // round trip still converges and the pinned solves still locate
      // gamma sharply: the residual floor scales like e^budget and the
      // resample error like floor*e^budget, and budgets beyond ~e^4 were
      // observed to smear the solved gamma by a few tenths
      std::vector<double> ts_new =
          mesh_from_samples(st, su, g_try, p.mu_d, rp, 1.0, 4.0);
      std::vector<Eigen::Vector2d> u_new =
          nodes_on_orbit(ts_try, u_try, g_try, p, rp, ts_new);
      int k2 = -1;
      for (std::size_t i = 0; i + 1 < ts_new.size(); ++i)
        if (std::abs(u_new[i][1]) > 6.0 * eps) { k2 = int(i); break; }
      if (k2 >= 0) {
        const int m2 = int(u_new.size());
        Eigen::VectorXd pin2 = Eigen::VectorXd::Zero(2 * m2 + 1);
        pin2[2 * k2 + 1] = 1.0;
        MsEval ev2;
        double g2 = g_try;
        if (ms_newton(ts_new, &u_new, &g2, p, rp, &ev2, /*free_gamma=*/true,
                      &pin2, u_new[k2][1])) {
          ts_try = std::move(ts_new);
          u_try = std::move(u_new);
          g_try = g2;
          ev = std::move(ev2);
        } else {
          // an orbit that cannot be re-polished on its own proper mesh is
          // not trustworthy enough to continue from
          if (trace)
            std::fprintf(stderr, "[chart]   polish failed on remesh (m=%d)\n",
                         m2);
          ok = false;
        }
      } else {
        if (trace) std::fprintf(stderr, "[chart]   no pin node on remesh\n");
        ok = false;
      }
      RegOrbit pt = make_orbit(ts_try, u_try, g_try, rp, ev);
      // a fall back to the regular sheet collapses log|mu3| by orders of
      // magnitude; anything milder is either mesh bias in the accumulated
      // log (about a percent) or a small legitimate retreat along the
      // family, both of which the next step recovers from
      if (!ok || pt.log_mu3 < 0.9 * lmu3_prev - 1.5 ||
          std::abs(g_try - gamma) > 0.5 ||
          pt.max_abs_y < 0.4 * branch->points.back().orbit.max_abs_y ||
          pt.max_abs_y > 2.5 * branch->points.back().orbit.max_abs_y) {
        ok = false;
        if (trace)
          std::fprintf(stderr,
                       "[chart]   guard: lmu3 %.2f -> %.2f maxy %.5f -> %.5f "
                       "g=%.6f\n",
                       lmu3_prev, pt.log_mu3,
                       branch->points.back().orbit.max_abs_y, pt.max_abs_y,
                       g_try);
      }
      if (ok) {
        ts = std::move(ts_try);
        u = std::move(u_try);
        gamma = g_try;
        if (pt.log_mu3 > std::log(1e12))
          branch->warnings.push_back(
              "log|mu3| = " + std::to_string(pt.log_mu3) + " at gamma = " +
              std::to_string(pt.gamma) + "; reported from accumulated logs");
        if (gamma > gamma_max) gamma_max = gamma;
        if (folds == 0 && gamma < gamma_max - 0.1) {
          folds = 1;
          branch->gamma_fold = gamma_max;
        }
        branch->points.push_back(
            {pt, folds == 0 ? BranchLabel::PiEpsRight : BranchLabel::PiEpsCenter});
        if (trace)
          std::fprintf(stderr,
                       "[chart] it=%d g=%.8f s=%.3e->%.3e k=%d t=%.4f m=%d "
                       "lmu3=%.2f folds=%d\n",
                       it, gamma, s_cur, s_next, k, ts[k], int(u.size()),
                       pt.log_mu3, folds);
        bad_streak = 0;
        // recover the stride after reject-driven shortening, and keep the
        // per-step gamma motion moderate so the fold stays resolved
        const double dgam = std::abs(gamma - g_prev);
        g_prev = gamma;
        fac = std::min(fac, 0.7);
        if (dgam > 0.35)
          fac = std::min(0.9, std::sqrt(fac));
        // past the fold, probe whether the direct gamma march can take
        // over: it can once the leg has grown clear of the corner (a failed
        // probe costs one Newton solve). The leg bottom nearing the edge of
        // the repelling sheet is a strong hint. When the march later runs
        // out of room it hands its state back, and the chart resumes
        // walking the delay from there.
        double yhat_bot = 0.0;
        for (const auto& w : u)
          if (std::abs(w[1]) < 2.0 * eps)
            yhat_bot = std::min(yhat_bot, w[1] / eps);
        ++since_march;
        if (folds == 1 && (yhat_bot < -0.9 || since_march >= 8)) {
          since_march = 0;
          if (canard_gamma_march(branch, &ts, &u, &gamma, gamma_stop, p,
                                 rp)) {
            if (gamma <= gamma_stop) return;
            // the march advanced and stalled: re-enter the delay chart at
            // its final point
            g_prev = gamma;
            fac = 0.7;
            bad_streak = 0;
            if (trace)
              std::fprintf(stderr, "[chart] resume after march at g=%.6f\n",
                           gamma);
          }
        }
        continue;
      }
    }
    fac = std::sqrt(fac);
    if (trace)
      std::fprintf(stderr, "[chart] it=%d reject (fac -> %.3f)\n", it, fac);
    if (++bad_streak > 8) {
      branch->warnings.push_back("canard chart stalled at gamma = " +
                                 std::to_string(gamma));
      return;
    }
  }
}

}  // namespace

RegOrbit shoot_periodic_regularized(const RegOrbit& seed, const Params& p,
                                    const RegParams& rp,
                                    std::vector<std::string>* warnings) {
  if (seed.u.empty() || seed.ts.size() != seed.u.size() + 1)
    throw ModelError("regularized shooting seed has no mesh");
  std::vector<double> ts = seed.ts;
  std::vector<Eigen::Vector2d> u = seed.u;
  MsEval ev;
  double g = seed.gamma;
  if (!ms_newton(ts, &u, &g, p, rp, &ev))
    throw NewtonDivergence("regularized shooting stalled at gamma = " +
                           std::to_string(seed.gamma) +
                           ", residual = " + std::to_string(ev.rnorm));
  // canard-segment seeds carry huge multipliers; relax the leg's mesh
  // budget accordingly or the re-mesh would produce thousands of nodes
  const double budget =
      std::clamp(0.7 + std::max(0.0, seed.log_mu3) / 40.0, 0.7, 4.0);
  if (!remesh_and_polish(&ts, &u, &g, p, rp, &ev, nullptr, nullptr, nullptr,
                         nullptr, 0.0, 1.0, budget)) {
    // deep canard members sit at their conditioning-limited residual floor,
    // and re-sampling that floor onto a fresh mesh can exceed what the
    // polish recovers from; the orbit converged on its own mesh is still
    // the best available answer, so keep it rather than fail
    if (warnings)
      warnings->push_back("re-mesh polish failed at gamma = " +
                          std::to_string(g) + "; orbit kept on its seed mesh");
  }
  RegOrbit orb = make_orbit(ts, u, g, rp, ev);
  if (orb.log_mu3 > std::log(1e8) && warnings) {
    std::ostringstream os;
    os << "|mu3| > 1e8 at gamma = " << orb.gamma << " (log|mu3| = "
       << orb.log_mu3 << "); multiplier reported from accumulated logs";
    warnings->push_back(os.str());
  }
  return orb;
}

RegOrbit reg_seed_from_pws(const SlipStickSolution& sol, const Params& p,
                           const RegParams& rp, int relax_periods) {
  Params q = p;
  q.gamma = sol.gamma;
  Trajectory traj = assemble_full_orbit(sol, q);
  // state of the PWS orbit at forcing phase theta = 0
  double t_at_zero = wrap_angle(-sol.theta0);
  State z = traj.eval(traj.t_begin() + t_at_zero, q);
  Eigen::Vector2d u0(z.x, z.y);
  if (std::abs(z.y) < kOnSetTol) {
    // stick phase: displace onto the attracting slow sheet
    double target = std::clamp(-xi(z, q) / q.mu_d, rp.phi(-rp.delta) + 1e-12,
                               rp.phi(rp.delta) - 1e-12);
    u0[1] = rp.eps * bisect_phi_inverse(rp, target, -rp.delta, rp.delta);
  }
  for (int k = 0; k < relax_periods; ++k)
    u0 = propagate_reg(u0, sol.gamma, p, rp, 0.0, kTwoPi, 1e-11).u_end;
  // single sweep over the relaxed half to lay down the initial mesh; the
  // relaxed orbit is on the stable branch, so this does not drift off it
  std::vector<double> st;
  std::vector<Eigen::Vector2d> su;
  propagate_reg(u0, sol.gamma, p, rp, 0.0, kPi, 1e-12, &st, &su);
  RegOrbit orb{};
  orb.gamma = sol.gamma;
  orb.eps = rp.eps;
  orb.ts = mesh_from_samples(st, su, sol.gamma, q.mu_d, rp);
  orb.u = nodes_from_samples(st, su, orb.ts);
  orb.residual = std::numeric_limits<double>::quiet_NaN();
  return orb;
}

SampledTrajectory sample_reg_orbit(const RegOrbit& orbit, const Params& p,
                                   const RegParams& rp) {
  RegParams rq = rp;
  rq.eps = orbit.eps;
  std::vector<double> st;
  std::vector<Eigen::Vector2d> su;
  dense_half(orbit.ts, orbit.u, orbit.gamma, p, rq, &st, &su);
  SampledTrajectory out;
  const std::size_t n = st.size();
  out.t.reserve(2 * n);
  out.z.reserve(2 * n);
  for (std::size_t i = 0; i < n; ++i)
    out.t.push_back(st[i]), out.z.emplace_back(su[i][0], su[i][1], st[i]);
  // second half by the symmetry u(t + pi) = -u(t)
  for (std::size_t i = 1; i < n; ++i)
    out.t.push_back(st[i] + kPi),
        out.z.emplace_back(-su[i][0], -su[i][1], st[i] + kPi);
  return out;
}

RegBranch continue_branch_regularized(const RegOrbit& start, double gamma_stop,
                                      const Params& p, const RegParams& rp) {
  RegBranch branch;
  RegOrbit orb = shoot_periodic_regularized(start, p, rp, &branch.warnings);
  branch.points.push_back({orb, BranchLabel::PiEpsRight});

  std::vector<double> ts = orb.ts;
  std::vector<Eigen::Vector2d> u = orb.u;
  double gamma = orb.gamma;
  MsEval ev = ms_eval(ts, u, gamma, p, rp);

  // Extended Jacobian [dF/dU, dF/dgamma] bordered with a direction row; both
  // the tangent solve and the corrector use the same assembly. The gamma
  // column comes from the per-segment sensitivity already carried by the
  // propagator.
  auto extended_matrix = [&](const MsEval& evc, const Eigen::VectorXd& border) {
    const int m = int(evc.seg.size());
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2 * m + 1, 2 * m + 1);
    A.topLeftCorner(2 * m, 2 * m) = ms_jac(evc);
    for (int i = 0; i < m; ++i)
      A.block<2, 1>(2 * i, 2 * m) = evc.seg[i].dudg;
    A.row(2 * m) = border.transpose();
    return A;
  };
  auto tangent_from = [&](const MsEval& evc, const Eigen::VectorXd& orient) {
    const int m = int(evc.seg.size());
    Eigen::MatrixXd A = extended_matrix(evc, orient);
    Eigen::VectorXd e = Eigen::VectorXd::Zero(2 * m + 1);
    e[2 * m] = 1.0;
    Eigen::VectorXd t = A.fullPivLu().solve(e);
    t.normalize();
    if (t.dot(orient) < 0) t = -t;
    return t;
  };

  int m = int(u.size());
  Eigen::VectorXd orient = Eigen::VectorXd::Zero(2 * m + 1);
  orient[2 * m] = 1.0;  // start off moving up in gamma along the stable branch
  Eigen::VectorXd tang = tangent_from(ev, orient);

  // dense samples of the previous accepted orbit, for re-orienting the
  // tangent by a secant after each re-mesh
  std::vector<double> prev_st;
  std::vector<Eigen::Vector2d> prev_su;
  double prev_gamma = gamma;
  dense_half(ts, u, gamma, p, rp, &prev_st, &prev_su);

  const bool trace = std::getenv("STICTION_TRACE") != nullptr;
  int folds = 0;
  double h = 0.1;
  int rejects = 0;
  for (int step = 0; step < 4000; ++step) {
    if (trace)
      std::fprintf(stderr,
                   "[cont] step=%d g=%.8f h=%.3g m=%d maxy=%.5f lmu3=%.2f folds=%d\n",
                   step, gamma, h, m, branch.points.back().orbit.max_abs_y,
                   branch.points.back().orbit.log_mu3, folds);
    // predictor
    std::vector<Eigen::Vector2d> uc = u;
    double gc = gamma + h * tang[2 * m];
    for (int i = 0; i < m; ++i) uc[i] += h * tang.segment<2>(2 * i);

    // corrector: Newton on {shooting residual, arclength constraint}
    bool ok = false;
    MsEval evc;
    int its = 0;
    double arc = 0.0;
    auto arc_of = [&](const std::vector<Eigen::Vector2d>& uu, double gg) {
      double a = tang[2 * m] * (gg - gamma) - h;
      for (int i = 0; i < m; ++i)
        a += tang.segment<2>(2 * i).dot(uu[i] - u[i]);
      return a;
    };
    evc = ms_eval(ts, uc, gc, p, rp);
    arc = arc_of(uc, gc);
    double mu = 1e-3;
    for (int it = 0; it < 240; ++it, ++its) {
      if (evc.rnorm < ms_floor_tol(evc) && std::abs(arc) < 1e-9) {
        ok = true;
        break;
      }
      Eigen::MatrixXd A = extended_matrix(evc, tang);
      Eigen::VectorXd R(2 * m + 1);
      R.head(2 * m) = evc.F;
      R[2 * m] = arc;
      LmFactors lf(A);
      bool accepted = false;
      double dxn = 0.0;
      for (int k = 0; k < 16; ++k) {
        Eigen::VectorXd v = lf.step(R, mu);
        if (!v.allFinite()) break;
        dxn = v.cwiseAbs().maxCoeff();
        // directional second derivative (the arclength row is linear, so its
        // contribution cancels exactly)
        const double hg = 0.5;
        std::vector<Eigen::Vector2d> uh(uc);
        for (int i = 0; i < m; ++i) uh[i] += hg * v.segment<2>(2 * i);
        MsEval evhalf = ms_eval(ts, uh, gc + hg * v[2 * m], p, rp);
        Eigen::VectorXd Rh(2 * m + 1);
        Rh.head(2 * m) = evhalf.F;
        Rh[2 * m] = arc_of(uh, gc + hg * v[2 * m]);
        Eigen::VectorXd fvv = (2.0 / (hg * hg)) * (Rh - R - hg * (A * v));
        Eigen::VectorXd acc = lf.step(fvv, mu);
        if (acc.norm() > 1.5 * v.norm()) {
          mu *= 4.0;
          continue;
        }
        Eigen::VectorXd dX = v + 0.5 * acc;
        std::vector<Eigen::Vector2d> ut(uc);
        for (int i = 0; i < m; ++i) ut[i] += dX.segment<2>(2 * i);
        double gt = gc + dX[2 * m];
        MsEval evt = ms_eval(ts, ut, gt, p, rp);
        double at = arc_of(ut, gt);
        Eigen::VectorXd Rt(2 * m + 1);
        Rt.head(2 * m) = evt.F;
        Rt[2 * m] = at;
        const double f0 = R.squaredNorm();
        const double pred = f0 - (R + A * v).squaredNorm();
        const double rho = (f0 - Rt.squaredNorm()) / std::max(pred, 1e-300);
        if (rho > 1e-3 ||
            (evt.rnorm < ms_floor_tol(evt) && std::abs(at) < 1e-9)) {
          uc = std::move(ut);
          gc = gt;
          evc = std::move(evt);
          arc = at;
          if (rho > 0.75) mu = std::max(mu / 3.0, 1e-10);
          else if (rho < 0.25) mu *= 2.0;
          accepted = true;
          break;
        }
        mu *= 4.0;
      }
      if (trace)
        std::fprintf(stderr, "[cont]     it=%d mu=%.3g rnorm=%.3e arc=%.1e |dX|=%.3e\n",
                     it, mu, evc.rnorm, arc, dxn);
      if (!accepted) break;
    }
    // the achievable residual is integration noise; accept stagnation there
    if (evc.rnorm < std::min(10.0 * ms_floor_tol(evc), 1e-4) &&
        std::abs(arc) < 1e-9)
      ok = true;
    if (trace && !ok)
      std::fprintf(stderr, "[cont]   reject: its=%d rnorm=%.3e floor=%.3e arc=%.3e\n",
                   its, evc.rnorm, ms_floor_tol(evc), arc);
    double prev_maxy = branch.points.back().orbit.max_abs_y;
    if (ok && (evc.max_abs_y < 0.4 * prev_maxy || evc.max_abs_y > 2.5 * prev_maxy))
      ok = false;  // guard against hopping onto a coexisting cycle
    if (!ok) {
      h *= 0.5;
      if (++rejects > 40 || h < 1e-6) {
        branch.warnings.push_back("continuation stalled at gamma = " +
                                  std::to_string(gamma));
        break;
      }
      continue;
    }
    // re-mesh onto the new orbit and polish, keeping the dense samples; a
    // failed polish means the step landed too far from the valley floor, so
    // retry the step from the previous point at half the length
    std::vector<double> ts_new = ts;
    std::vector<Eigen::Vector2d> u_new = uc;
    std::vector<double> st;
    std::vector<Eigen::Vector2d> su;
    // densify the mesh as the canard leg develops: the valley curvature of
    // the shooting system grows with the per-segment transport, and near the
    // fold the stock budget leaves Newton crawling against the valley walls
    const double lmu3_prev = branch.points.back().orbit.log_mu3;
    const double refine = std::clamp(1.0 + lmu3_prev / 8.0, 1.0, 3.0);
    const double g_entered = gc;
    // the secant-constrained polish cannot slide along the family, but near
    // the fold gamma responds quadratically to transverse corrections, and on
    // the steep canard leg (branch nearly vertical in gamma) the re-mesh
    // itself legitimately slides the orbit along the family, so the allowance
    // grows with the leg's expansion rate
    const double drift_allow =
        std::max(2.0 * h, 1e-6) * std::max(1.0, lmu3_prev / 4.0);
    if (!remesh_and_polish(&ts_new, &u_new, &gc, p, rp, &evc, &st, &su,
                           &prev_st, &prev_su, prev_gamma, refine) ||
        std::abs(gc - g_entered) > drift_allow) {
      if (trace)
        std::fprintf(stderr, "[cont]   reject remesh: drift=%.3e allowed=%.3e\n",
                     gc - g_entered, drift_allow);
      h *= 0.5;
      if (++rejects > 40 || h < 1e-6) {
        branch.warnings.push_back("re-mesh lost the orbit at gamma = " +
                                  std::to_string(gc));
        break;
      }
      continue;
    }
    RegOrbit pt = make_orbit(ts_new, u_new, gc, rp, evc);
    // near the fold the coexisting orbits differ by a hair in amplitude but
    // by the length of the leg along the repelling sheet, i.e. by log|mu3|.
    // Along the true path (up the regular branch, around the fold, down the
    // canard segment) log|mu3| only grows, so once the explosion has started
    // a drop means Newton hopped onto a shorter-leg neighbor.
    if (branch.points.size() > 2 &&
        (std::abs(pt.log_mu3 - lmu3_prev) > 30.0 ||
         (lmu3_prev > 2.0 && pt.log_mu3 < lmu3_prev - 3.0))) {
      if (trace)
        std::fprintf(stderr, "[cont]   reject identity: lmu3 %.2f -> %.2f\n",
                     branch.points.back().orbit.log_mu3, pt.log_mu3);
      h *= 0.5;
      if (++rejects > 40 || h < 1e-6) {
        branch.warnings.push_back("branch identity lost at gamma = " +
                                  std::to_string(gc));
        break;
      }
      continue;
    }
    rejects = 0;
    const double dg_motion = gc - gamma;
    const double g_before = gamma;
    gamma = gc;
    ts = std::move(ts_new);
    u = std::move(u_new);
    m = int(u.size());

    if (pt.log_mu3 > std::log(1e12))
      branch.warnings.push_back(
          "log|mu3| = " + std::to_string(pt.log_mu3) + " at gamma = " +
          std::to_string(pt.gamma) + "; reported from accumulated logs");

    // secant in the new mesh coordinates: current nodes minus the previous
    // orbit resampled on the current mesh
    std::vector<Eigen::Vector2d> u_prev_on_mesh =
        nodes_from_samples(prev_st, prev_su, ts);
    Eigen::VectorXd secant(2 * m + 1);
    for (int i = 0; i < m; ++i)
      secant.segment<2>(2 * i) = u[i] - u_prev_on_mesh[i];
    secant[2 * m] = gamma - prev_gamma;
    if (secant.norm() > 0) secant.normalize();
    Eigen::VectorXd tn = tangent_from(evc, secant);

    if (folds == 0 && branch.points.size() > 2 && dg_motion < 0 &&
        tn[2 * m] < 0) {
      folds = 1;
      branch.gamma_fold = std::max(g_before, gamma);
    }
    branch.points.push_back(
        {pt, folds == 0 ? BranchLabel::PiEpsRight : BranchLabel::PiEpsCenter});

    tang = tn;
    prev_st = std::move(st);
    prev_su = std::move(su);
    prev_gamma = gamma;
    h = std::min(h * 1.4, 0.3);
    if (folds == 0 && pt.log_mu3 > 4.0) {
      // hand the corner over to the departure-delay chart: from here on
      // arclength in (nodes, gamma) no longer separates neighboring members
      canard_chart_descent(&branch, ts, u, gamma, gamma_stop, p, rp);
      return branch;
    }
    if (folds > 0 && gamma < gamma_stop) break;
    if (gamma > 45.0) {
      branch.warnings.push_back("no fold found below gamma = 45");
      break;
    }
  }
  // a stall with the multiplier already growing is the corner showing up
  // early; the chart may still be able to take over from the last orbit
  if (folds == 0 && gamma > gamma_stop && !branch.points.empty() &&
      branch.points.back().orbit.log_mu3 > 1.0)
    canard_chart_descent(&branch, ts, u, gamma, gamma_stop, p, rp);
  return branch;
}

RegOrbit reconverge_at_eps(const RegOrbit& orbit, double eps_target,
                           const Params& p, const RegParams& rp) {
  if (std::abs(std::log(eps_target / orbit.eps)) <= 1e-12) return orbit;
  const bool trace = std::getenv("STICTION_TRACE") != nullptr;
  Params q = p;
  q.gamma = orbit.gamma;
  // deep canard members coexist with shorter-leg members at the same gamma,
  // and fixed-gamma Newton steps in eps hop between them; as around the
  // fold, the honest tracking coordinate is the departure delay, pinned at
  // a node past the departure with gamma freed -- the price is a small
  // drift in gamma over the eps sweep
  const bool deep = orbit.log_mu3 > 50.0;
  const bool pinned = deep && std::getenv("STICTION_EPS_PIN") != nullptr;
  std::vector<double> ts = orbit.ts;
  std::vector<Eigen::Vector2d> u = orbit.u;
  double g = orbit.gamma;
  double eps = orbit.eps;
  double lmu3 = orbit.log_mu3;
  double amp = orbit.max_abs_y;
  RegParams rq = rp;
  MsEval ev;
  bool have_ev = false;
  double max_step = deep ? 0.2 : 0.3;
  while (std::abs(std::log(eps_target / eps)) > 1e-12) {
    const double step =
        std::clamp(std::log(eps_target / eps), -max_step, max_step);
    const double eps_new = eps * std::exp(step);
    const double ratio = eps_new / eps;
    RegParams rq_try = build_phi(rp.delta, q.mu_s, q.mu_d, eps_new);
    std::vector<double> ts_try = ts;
    std::vector<Eigen::Vector2d> u_try = u;
    double g_try = g;
    // nodes inside the layer ride y = eps*yhat on the slow sheets, so
    // scaling them with eps is the natural predictor
    for (auto& w : u_try)
      if (std::abs(w[1]) < 2.5 * std::max(eps, eps_new)) w[1] *= ratio;
    MsEval ev_try;
    bool ok = false;
    if (pinned) {
      int k = -1;
      for (std::size_t i = 0; i + 1 < ts_try.size(); ++i)
        if (std::abs(u_try[i][1]) > 6.0 * eps_new) { k = int(i); break; }
      if (k >= 0) {
        Eigen::VectorXd pin = Eigen::VectorXd::Zero(2 * u_try.size() + 1);
        pin[2 * k + 1] = 1.0;
        // same node, same yhat: the delay is carried across the eps step
        ok = ms_newton(ts_try, &u_try, &g_try, p, rq_try, &ev_try,
                       /*free_gamma=*/true, &pin, u_try[k][1] * ratio);
      }
    } else {
      ok = ms_newton(ts_try, &u_try, &g_try, p, rq_try, &ev_try);
    }
    if (ok) {
      // re-mesh for the new layer width; on polish failure keep the
      // converged pre-remesh state
      std::vector<double> st;
      std::vector<Eigen::Vector2d> su;
      dense_half(ts_try, u_try, g_try, p, rq_try, &st, &su);
      std::vector<double> ts_new = mesh_from_samples(
          st, su, g_try, p.mu_d, rq_try, 1.0, deep ? 4.0 : 0.7);
      std::vector<Eigen::Vector2d> u_new =
          nodes_on_orbit(ts_try, u_try, g_try, p, rq_try, ts_new);
      MsEval ev2;
      double g2 = g_try;
      bool polished = false;
      if (pinned) {
        int k2 = -1;
        for (std::size_t i = 0; i + 1 < ts_new.size(); ++i)
          if (std::abs(u_new[i][1]) > 6.0 * eps_new) { k2 = int(i); break; }
        if (k2 >= 0) {
          Eigen::VectorXd pin2 = Eigen::VectorXd::Zero(2 * u_new.size() + 1);
          pin2[2 * k2 + 1] = 1.0;
          polished = ms_newton(ts_new, &u_new, &g2, p, rq_try, &ev2,
                               /*free_gamma=*/true, &pin2, u_new[k2][1]);
        }
      } else {
        polished = ms_newton(ts_new, &u_new, &g2, p, rq_try, &ev2);
      }
      if (polished) {
        ts_try = std::move(ts_new);
        u_try = std::move(u_new);
        g_try = g2;
        ev_try = std::move(ev2);
      }
      RegOrbit pt = make_orbit(ts_try, u_try, g_try, rq_try, ev_try);
      // member identity: the leg depth eps*log|mu3| and the slip amplitude
      // both vary slowly with eps at fixed gamma, so a step whose depth or
      // amplitude moves faster than the step width allows has hopped to a
      // coexisting member
      if (deep) {
        const double depth_drift =
            std::log(std::max(pt.log_mu3, 1.0) * eps_new / (lmu3 * eps));
        const double amp_drift = std::log(pt.max_abs_y / amp);
        if (std::abs(depth_drift) > 0.35 * std::abs(step) + 0.02 ||
            std::abs(amp_drift) > 1.2 * std::abs(step) + 0.1) {
          ok = false;
          if (trace)
            std::fprintf(stderr,
                         "[eps]   guard: lmu3 %.1f -> %.1f maxy %.5f -> %.5f "
                         "(drift %.3f / %.3f at step %.3f)\n",
                         lmu3, pt.log_mu3, amp, pt.max_abs_y, depth_drift,
                         amp_drift, step);
        }
      }
      if (ok) {
        ts = std::move(ts_try);
        u = std::move(u_try);
        g = g_try;
        eps = eps_new;
        lmu3 = pt.log_mu3;
        amp = pt.max_abs_y;
        rq = rq_try;
        ev = std::move(ev_try);
        have_ev = true;
        max_step = std::min(deep ? 0.25 : 0.4, max_step * 1.3);
        if (trace)
          std::fprintf(stderr,
                       "[eps] g=%.4f eps=%.3e m=%d maxy=%.5f lmu3=%.1f\n", g,
                       eps, int(u.size()), pt.max_abs_y, pt.log_mu3);
        continue;
      }
    }
    max_step *= 0.5;
    if (trace)
      std::fprintf(stderr, "[eps] reject at eps=%.3e (step -> %.3f)\n",
                   eps_new, max_step);
    if (max_step < 0.02)
      throw NewtonDivergence("eps re-convergence lost the orbit at eps = " +
                             std::to_string(eps_new));
  }
  return have_ev ? make_orbit(ts, u, g, rq, ev) : orbit;
}

CanardExplosionReport no_canard_explosion_check(const RegBranch& branch,
                                                const std::vector<double>& eps_list,
                                                double gamma_fit, const Params& p,
                                                const RegParams& rp) {
  CanardExplosionReport rep{};
  double max_canard = 0.0, max_regular = 0.0;
  const RegOrbit* fit_orbit = nullptr;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& pt : branch.points) {
    if (pt.segment == BranchLabel::PiEpsCenter) {
      max_canard = std::max(max_canard, pt.orbit.max_abs_y);
      double d = std::abs(pt.orbit.gamma - gamma_fit);
      if (d < best) { best = d; fit_orbit = &pt.orbit; }
    } else {
      max_regular = std::max(max_regular, pt.orbit.max_abs_y);
    }
  }
  if (!fit_orbit) throw ModelError("branch has no canard segment to check");
  rep.amplitude_ratio = max_canard / std::max(max_regular, 1e-300);

  // log|mu3| vs 1/eps on the canard orbit at (approximately) fixed gamma
  RegOrbit base = *fit_orbit;
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (double e : eps_list) {
    RegOrbit o = reconverge_at_eps(base, e, p, rp);
    rep.eps_values.push_back(e);
    rep.log_mu3_values.push_back(o.log_mu3);
    double x = 1.0 / e, y = o.log_mu3;
    sx += x; sy += y; sxx += x * x; sxy += x * y; syy += y * y;
  }
  const double n = double(eps_list.size());
  rep.fit_slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double denom = (n * sxx - sx * sx) * (n * syy - sy * sy);
  rep.fit_r2 = denom > 0 ? (n * sxy - sx * sy) * (n * sxy - sx * sy) / denom : 0.0;
  return rep;
}

TransversalityData transversality_check(double gamma, const Params& p,
                                        const RegParams& rp) {
  Params q = p;
  q.gamma = gamma;
  const double g2 = gamma * gamma;
  const double x_c = (q.mu_s - 1.0) / g2;  // canard level, xi = mu_s at theta = pi/2

  // attracting-sheet leg of the vrai canard as a graph yhat_c(theta):
  // sin(theta) + mu_d phi(yhat) = 1 - mu_s
  auto yhat_canard = [&](double th) {
    double target = (1.0 - q.mu_s - std::sin(th)) / q.mu_d;
    return bisect_phi_inverse(rp, target, -rp.delta, rp.delta);
  };
  // repelling leg exists for sin(theta) > 1 - mu_s + mu_d
  const double sin_edge = 1.0 - q.mu_s + q.mu_d;
  if (sin_edge >= 1.0) throw NoIntersection("repelling canard leg is empty");
  const double th_hi = kPi - std::asin(std::min(std::max(sin_edge, -1.0), 1.0));

  // image of a fast fiber off the repelling leg under the global return:
  // slip arc of Z^- from (x_c, 0, theta_out), then the symmetry map
  auto return_point = [&](double th_out) -> std::pair<double, double> {
    Event ev = next_event(State(x_c, 0.0, th_out), 0.0, Branch::Minus, q);
    State img = symmetry_map(ev.state);
    double yh = bisect_phi_inverse(rp, -xi(img, q) / q.mu_d, -rp.delta, rp.delta);
    // unwrapped arrival phase relative to the canard period (pi/2, pi/2+2pi)
    double th_in = img.theta;
    while (th_in <= kPi / 2) th_in += kTwoPi;
    return {th_in, yh};
  };
  auto gap = [&](double th_out) {
    auto [ti, yi] = return_point(th_out);
    return yi - yhat_canard(ti);
  };

  const double lo = kPi / 2 + 0.02, hi = th_hi - 0.02;
  const int n = 80;
  double prev_th = lo, prev_gap = gap(lo);
  double root = std::numeric_limits<double>::quiet_NaN();
  for (int i = 1; i <= n; ++i) {
    double th = lo + (hi - lo) * i / n;
    double gv = gap(th);
    if (prev_gap == 0.0 || (prev_gap < 0) != (gv < 0)) {
      double a = prev_th, b = th, fa = prev_gap;
      for (int k = 0; k < 80; ++k) {
        double m = 0.5 * (a + b), fm = gap(m);
        if ((fm < 0) == (fa < 0)) { a = m; fa = fm; } else { b = m; }
      }
      root = 0.5 * (a + b);
      break;
    }
    prev_th = th;
    prev_gap = gv;
  }
  if (!std::isfinite(root))
    throw NoIntersection("return of the repelling leg does not meet the canard");

  auto [ti, yi] = return_point(root);
  const double hfd = 1e-6;
  auto [ti2, yi2] = return_point(root + hfd);
  Eigen::Vector2d v_img((ti2 - ti) / hfd, (yi2 - yi) / hfd);
  Eigen::Vector2d v_can(1.0, (yhat_canard(ti + hfd) - yhat_canard(ti)) / hfd);
  double cross = std::abs(v_img[0] * v_can[1] - v_img[1] * v_can[0]);
  double angle = std::asin(std::min(1.0, cross / (v_img.norm() * v_can.norm())));

  TransversalityData td;
  td.theta_in = wrap_angle(ti);
  td.yhat_in = yi;
  td.angle = angle;
  return td;
}

}  // namespace stiction
