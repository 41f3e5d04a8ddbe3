#include "stiction/pws.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace stiction {

const char* event_kind_name(EventKind k) {
  switch (k) {
    case EventKind::SlipToStickLanding: return "SlipToStickLanding";
    case EventKind::StickToSlipOnset: return "StickToSlipOnset";
    case EventKind::CrossingUp: return "CrossingUp";
    case EventKind::CrossingDown: return "CrossingDown";
    case EventKind::SingularHitIPlus: return "SingularHitIPlus";
    case EventKind::SingularHitIMinus: return "SingularHitIMinus";
    case EventKind::TangencyGraze: return "TangencyGraze";
    case EventKind::UndefinedFrictionHit: return "UndefinedFrictionHit";
    case EventKind::HorizonEnd: return "HorizonEnd";
  }
  return "?";
}

namespace {

struct SlipCoeffs {
  double c1, c2, theta0, sigma_mu_over_g2, g;
  // x(t) = c1 cos(gt) + c2 sin(gt) - sin(theta0+t)/(g^2-1) - sigma mu_d/g^2
  double x(double t) const {
    return c1 * std::cos(g * t) + c2 * std::sin(g * t) -
           std::sin(theta0 + t) / (g * g - 1.0) - sigma_mu_over_g2;
  }
  double y(double t) const {
    return -g * c1 * std::sin(g * t) + g * c2 * std::cos(g * t) -
           std::cos(theta0 + t) / (g * g - 1.0);
  }
  double dy(double t) const {
    return -g * g * c1 * std::cos(g * t) - g * g * c2 * std::sin(g * t) +
           std::sin(theta0 + t) / (g * g - 1.0);
  }
};

SlipCoeffs slip_coeffs(const State& z0, int sigma, const Params& p) {
  if (std::abs(p.gamma - 1.0) < kResonanceBand) throw ResonanceGuard(p.gamma);
  const double g = p.gamma, gg = g * g;
  SlipCoeffs s;
  s.g = g;
  s.theta0 = z0.theta;
  s.sigma_mu_over_g2 = sigma * p.mu_d / gg;
  const double xp0 = -std::sin(z0.theta) / (gg - 1.0);
  const double xpd0 = -std::cos(z0.theta) / (gg - 1.0);
  s.c1 = z0.x - xp0 + sigma * p.mu_d / gg;
  s.c2 = (z0.y - xpd0) / g;
  return s;
}

/// Polish a bracketed root of f on [a,b] (f(a), f(b) of opposite sign)
/// with bisection + Newton, to |f| <= 1e-13 or machine-width bracket.
template <class F, class DF>
double polish_root(F f, DF df, double a, double b) {
  double fa = f(a);
  double t = 0.5 * (a + b);
  for (int it = 0; it < 200; ++it) {
    double ft = f(t);
    if (std::abs(ft) < 1e-14 || b - a < 1e-15 * std::max(1.0, std::abs(b)))
      return t;
    if ((fa < 0) == (ft < 0)) a = t; else b = t;
    double d = df(t);
    double tn = (d != 0.0) ? t - ft / d : t;
    if (!(tn > a && tn < b)) tn = 0.5 * (a + b);
    t = tn;
  }
  return t;
}

EventKind classify_slip_landing(double v, int sigma, const Params& p) {
  if (std::abs(std::abs(v) - p.mu_s) <= kOnSetTol)
    return EventKind::UndefinedFrictionHit;
  if (sigma < 0) {
    // From G^-: transversal landings have v <= mu_d.
    if (v < -p.mu_s) return EventKind::CrossingUp;
    if (std::abs(v - p.mu_d) <= kOnSetTol) return EventKind::TangencyGraze;
    return EventKind::SlipToStickLanding;
  }
  if (v > p.mu_s) return EventKind::CrossingDown;
  if (std::abs(v + p.mu_d) <= kOnSetTol) return EventKind::TangencyGraze;
  return EventKind::SlipToStickLanding;
}

Event next_event_slip(const State& z0, double t0, int sigma, const Params& p,
                      double horizon) {
  SlipCoeffs s = slip_coeffs(z0, sigma, p);
  const double h = kPi / (8.0 * std::max(p.gamma, 1.0));
  // Step past the launch point: y may start at exactly 0.
  double a = 0.0, ya = z0.y;
  if (ya == 0.0) {
    double t = std::min(h, horizon) * 1e-6;
    while (t < horizon && sigma * s.y(t) <= 0.0) t *= 2.0;
    a = t / 2.0;
    ya = s.y(a);
    if (sigma * ya <= 0.0) {
      // immediate re-landing (tangent launch); treat launch step as the root
      State z = z0;
      return Event{t0, z, classify_slip_landing(xi(z, p), sigma, p)};
    }
  }
  double b = a;
  while (b < horizon) {
    b = std::min(b + h, horizon);
    double yb = s.y(b);
    if ((ya < 0) != (yb < 0) || yb == 0.0) {
      double tr = polish_root([&](double t) { return s.y(t); },
                              [&](double t) { return s.dy(t); }, a, b);
      State z(s.x(tr), 0.0, z0.theta + tr);
      return Event{t0 + tr, z, classify_slip_landing(xi(z, p), sigma, p)};
    }
    a = b; ya = yb;
  }
  throw NoEventWithinHorizon(horizon);
}

// First theta > theta0 with sin(theta) = s and the hit approached from
// inside Sigma_s (xi increasing or tangent). Returns +inf if |s| > 1.
// Tangential roots (|s| = 1) are reported with *tangent = true.
double first_sine_hit(double theta0, double s, bool* tangent) {
  *tangent = false;
  if (std::abs(s) > 1.0) return std::numeric_limits<double>::infinity();
  if (std::abs(s) == 1.0) {
    *tangent = true;
    double base = (s > 0) ? kPi / 2 : 3 * kPi / 2;
    double k = std::ceil((theta0 - base) / kTwoPi + 1e-14);
    return base + k * kTwoPi;
  }
  // Roots per period: asin(s) + 2k pi (cos > 0) and pi - asin(s) + 2k pi
  // (cos < 0). The caller filters by the cos sign appropriate for its
  // boundary side.
  double r1 = std::asin(s);                 // cos >= 0
  double r2 = kPi - std::asin(s);           // cos <= 0
  double best = std::numeric_limits<double>::infinity();
  for (double base : {r1, r2}) {
    double k = std::ceil((theta0 - base) / kTwoPi - 1e-12);
    double cand = base + k * kTwoPi;
    if (cand <= theta0 + 1e-12) cand += kTwoPi;
    best = std::min(best, cand);
  }
  return best;
}

Event next_event_stick(const State& z0, double t0, const Params& p,
                       double horizon) {
  const double gg2x0 = p.gamma * p.gamma * z0.x;
  // Exit candidates: xi = +mu_s (boundary of Sigma_c^-) and xi = -mu_s.
  struct Cand { double theta; bool tangent; bool plus_side; };
  std::array<Cand, 2> cands{};
  int n = 0;
  for (int side = 0; side < 2; ++side) {
    const double s = (side == 0 ? p.mu_s : -p.mu_s) - gg2x0;
    bool tangent = false;
    double th = first_sine_hit(z0.theta, s, &tangent);
    if (std::isfinite(th)) cands[n++] = {th, tangent, side == 1};
  }
  // From inside Sigma_s, a root with the wrong slope sign is not a hit:
  // xi rises to +mu_s only where cos(theta) >= 0, falls to -mu_s only where
  // cos(theta) <= 0. Filter and re-scan if needed.
  double best = std::numeric_limits<double>::infinity();
  bool best_tangent = false, best_plus = false;
  for (int i = 0; i < n; ++i) {
    double th = cands[i].theta;
    for (int guard = 0; guard < 8 && std::isfinite(th); ++guard) {
      double c = std::cos(th);
      bool ok = cands[i].tangent ||
                (!cands[i].plus_side && c > 0.0) ||
                (cands[i].plus_side && c < 0.0);
      if (ok) break;
      bool tg = false;
      th = first_sine_hit(th, (cands[i].plus_side ? -p.mu_s : p.mu_s) - gg2x0, &tg);
    }
    if (th < best) {
      best = th; best_tangent = cands[i].tangent; best_plus = cands[i].plus_side;
    }
  }
  // stick arcs advance theta at unit rate, so theta gaps are time gaps
  if (!std::isfinite(best) || best - z0.theta > horizon)
    throw NoEventWithinHorizon(horizon);
  double dt = best - z0.theta;
  State z(z0.x, 0.0, best);
  EventKind kind;
  if (best_tangent) {
    kind = best_plus ? EventKind::SingularHitIPlus : EventKind::SingularHitIMinus;
  } else {
    kind = EventKind::StickToSlipOnset;
  }
  return Event{t0 + dt, z, kind};
}

}  // namespace

State slip_flow_closed_form(const State& z0, int sigma, const Params& p, double t) {
  SlipCoeffs s = slip_coeffs(z0, sigma, p);
  return State(s.x(t), s.y(t), z0.theta + t);
}

Event next_event(const State& z0, double t0, Branch branch, const Params& p,
                 double horizon) {
  switch (branch) {
    case Branch::Stick: return next_event_stick(z0, t0, p, horizon);
    case Branch::Minus: return next_event_slip(z0, t0, -1, p, horizon);
    case Branch::Plus: return next_event_slip(z0, t0, +1, p, horizon);
  }
  throw ModelError("bad branch");
}

bool is_regular(const Trajectory& traj) {
  for (const auto& e : traj.events)
    if (e.kind == EventKind::SingularHitIPlus || e.kind == EventKind::SingularHitIMinus)
      return false;
  return true;
}

State Trajectory::eval(double t, const Params& p) const {
  if (arcs.empty()) throw ModelError("empty trajectory");
  auto it = std::upper_bound(arcs.begin(), arcs.end(), t,
                             [](double v, const Arc& a) { return v < a.t1; });
  const Arc& a = (it == arcs.end()) ? arcs.back() : *it;
  double tau = std::clamp(t, a.t0, a.t1) - a.t0;
  if (a.branch == Branch::Stick) return State(a.z0.x, 0.0, a.z0.theta + tau);
  return slip_flow_closed_form(a.z0, a.branch == Branch::Plus ? +1 : -1, p, tau);
}

namespace {

struct Walker {
  const Params& p;
  double t_end;
  BranchPolicy policy;
  int fork_budget = 20;

  std::vector<Trajectory> run(Trajectory prefix, State z, double t, Branch mode);
};

Branch initial_mode(const State& z0, const Params& p, bool* singular_start) {
  *singular_start = false;
  Classification c = classify(z0, p);
  switch (c.label) {
    case RegionLabel::GPlus: return Branch::Plus;
    case RegionLabel::GMinus: return Branch::Minus;
    case RegionLabel::SigmaS: return Branch::Stick;
    case RegionLabel::SigmaCMinus: return Branch::Minus;  // y' < 0 on both sides
    case RegionLabel::SigmaCPlus: return Branch::Plus;
    case RegionLabel::BoundaryCMinus:
      if (c.in_i_minus) { *singular_start = true; return Branch::Stick; }
      return Branch::Minus;
    case RegionLabel::BoundaryCPlus:
      if (c.in_i_plus) { *singular_start = true; return Branch::Plus; }
      return Branch::Plus;
  }
  throw ModelError("unreachable");
}

}  // namespace

std::vector<Trajectory> Walker::run(Trajectory traj, State z, double t, Branch mode) {
  while (t < t_end - 1e-14) {
    Event ev;
    bool have_event = true;
    try {
      ev = next_event(z, t, mode, p, t_end - t + kTwoPi);
    } catch (const NoEventWithinHorizon&) {
      have_event = false;
    }
    if (!have_event || ev.time >= t_end) {
      traj.arcs.push_back(Arc{t, t_end, z, mode});
      traj.events.push_back(Event{t_end, traj.eval(t_end, p), EventKind::HorizonEnd});
      return {std::move(traj)};
    }
    traj.arcs.push_back(Arc{t, ev.time, z, mode});
    traj.events.push_back(ev);
    t = ev.time;
    z = ev.state;
    switch (ev.kind) {
      case EventKind::SlipToStickLanding:
        mode = Branch::Stick;
        break;
      case EventKind::CrossingUp:
        mode = Branch::Plus;
        break;
      case EventKind::CrossingDown:
        mode = Branch::Minus;
        break;
      case EventKind::StickToSlipOnset:
        mode = (xi(z, p) > 0.0) ? Branch::Minus : Branch::Plus;
        break;
      case EventKind::TangencyGraze: {
        // Landing exactly on a tangency line of the slip field: visible
        // tangency keeps slipping on the same side, invisible sticks.
        TangencySet ts = (mode == Branch::Minus) ? TangencySet::ZMinusOnSigma
                                                 : TangencySet::ZPlusOnSigma;
        TangencyLabel lab = tangency(z, p, ts, 1e-9);
        if (lab != TangencyLabel::Visible) mode = Branch::Stick;
        break;
      }
      case EventKind::SingularHitIPlus:
      case EventKind::SingularHitIMinus: {
        Branch slip_branch = (ev.kind == EventKind::SingularHitIMinus)
                                 ? Branch::Minus
                                 : Branch::Plus;
        if (policy == BranchPolicy::EnumerateBoth && fork_budget > 0) {
          --fork_budget;
          Trajectory stick_copy = traj;
          stick_copy.warnings.push_back("forked (stay sticking) at t=" +
                                        std::to_string(t));
          traj.warnings.push_back("forked (depart slipping) at t=" +
                                  std::to_string(t));
          auto stick_branches = run(std::move(stick_copy), z, t, Branch::Stick);
          auto slip_branches = run(std::move(traj), z, t, slip_branch);
          stick_branches.insert(stick_branches.end(),
                                std::make_move_iterator(slip_branches.begin()),
                                std::make_move_iterator(slip_branches.end()));
          return stick_branches;
        }
        if (policy == BranchPolicy::SlipFirst) {
          mode = slip_branch;
          traj.warnings.push_back(
              "singular point: departing on slip branch (discarded the "
              "sticking continuation) at t=" + std::to_string(t));
        } else {
          mode = Branch::Stick;
          traj.warnings.push_back(
              "singular point: staying on Sigma_s (discarded the slip "
              "continuation) at t=" + std::to_string(t));
        }
        break;
      }
      case EventKind::UndefinedFrictionHit:
        traj.warnings.push_back(
            "landed on |xi| = mu_s with y = 0 (friction undefined); halting "
            "at t=" + std::to_string(t));
        return {std::move(traj)};
      case EventKind::HorizonEnd:
        return {std::move(traj)};
    }
  }
  return {std::move(traj)};
}

std::vector<Trajectory> integrate_stiction(const State& z0, double T,
                                           BranchPolicy policy, const Params& p) {
  if (!(T > 0.0)) throw ModelError("integration requires T > 0 (backward time "
                                   "loses information on Sigma_s)");
  p.validate();
  Walker w{p, T, policy};
  bool singular_start = false;
  Branch mode = initial_mode(z0, p, &singular_start);
  Trajectory traj;
  traj.branch_policy_used = policy;
  State z = z0;
  z.y = (mode == Branch::Stick) ? 0.0 : z.y;
  if (singular_start) {
    traj.events.push_back(Event{0.0, z,
                                classify(z, p).in_i_minus
                                    ? EventKind::SingularHitIMinus
                                    : EventKind::SingularHitIPlus});
    if (policy == BranchPolicy::EnumerateBoth) {
      Branch slip_branch =
          classify(z, p).in_i_minus ? Branch::Minus : Branch::Plus;
      Trajectory traj2 = traj;
      auto a = w.run(std::move(traj), z, 0.0, Branch::Stick);
      auto b = w.run(std::move(traj2), z, 0.0, slip_branch);
      a.insert(a.end(), std::make_move_iterator(b.begin()),
               std::make_move_iterator(b.end()));
      return a;
    }
    mode = (policy == BranchPolicy::SlipFirst)
               ? (classify(z, p).in_i_minus ? Branch::Minus : Branch::Plus)
               : Branch::Stick;
    traj.warnings.push_back("singular initial point: policy selected one branch");
  }
  return w.run(std::move(traj), z, 0.0, mode);
}

double caratheodory_residual(const Arc& arc, const Params& p, int panels) {
  // 4-point Gauss-Legendre per panel.
  static const double gx[4] = {-0.8611363115940526, -0.3399810435848563,
                               0.3399810435848563, 0.8611363115940526};
  static const double gw[4] = {0.3478548451374538, 0.6521451548713462,
                               0.6521451548713462, 0.3478548451374538};
  const double len = arc.t1 - arc.t0;
  double ix = 0.0, iy = 0.0;
  const int sigma = arc.branch == Branch::Plus ? +1 : -1;
  for (int k = 0; k < panels; ++k) {
    double a = arc.t0 + len * k / panels, b = arc.t0 + len * (k + 1) / panels;
    double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    for (int j = 0; j < 4; ++j) {
      double t = mid + half * gx[j];
      State z = (arc.branch == Branch::Stick)
                    ? State(arc.z0.x, 0.0, arc.z0.theta + (t - arc.t0))
                    : slip_flow_closed_form(arc.z0, sigma, p, t - arc.t0);
      StateDerivative d = vector_field(z, p, arc.branch);
      ix += gw[j] * half * d.dx;
      iy += gw[j] * half * d.dy;
    }
  }
  State z1 = (arc.branch == Branch::Stick)
                 ? State(arc.z0.x, 0.0, arc.z0.theta + len)
                 : slip_flow_closed_form(arc.z0, sigma, p, len);
  return std::max(std::abs(z1.x - arc.z0.x - ix), std::abs(z1.y - arc.z0.y - iy));
}

}  // namespace stiction
