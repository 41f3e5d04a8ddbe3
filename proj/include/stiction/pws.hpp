#ifndef STICTION_PWS_HPP
#define STICTION_PWS_HPP

#include <optional>
#include <string>
#include <vector>

#include "stiction/model.hpp"

// Event-driven integration of stiction solutions of the discontinuous
// system. Slip arcs are linear in (x, y) and solved in closed form; stick
// arcs move only in theta, so every event time reduces to a root of an
// explicit scalar function.
namespace stiction {

enum class EventKind {
  SlipToStickLanding,
  StickToSlipOnset,
  CrossingUp,    // passes Sigma upward (xi < -mu_s)
  CrossingDown,  // passes Sigma downward (xi > mu_s)
  SingularHitIPlus,
  SingularHitIMinus,
  TangencyGraze,
  UndefinedFrictionHit,
  HorizonEnd
};

const char* event_kind_name(EventKind k);

struct Event {
  double time;
  State state;
  EventKind kind;
};

enum class BranchPolicy { StickFirst, SlipFirst, EnumerateBoth };

struct ResonanceGuard : ModelError {
  explicit ResonanceGuard(double gamma)
      : ModelError("gamma within resonance guard band around 1: gamma = " +
                   std::to_string(gamma)) {}
};
struct NoEventWithinHorizon : ModelError {
  explicit NoEventWithinHorizon(double horizon)
      : ModelError("no event within horizon " + std::to_string(horizon)) {}
};

/// Guard band around gamma = 1 where the closed form x_p = -sin/(gamma^2-1)
/// loses accuracy.
inline constexpr double kResonanceBand = 1e-3;

/// Default integration horizon: 100 forcing periods.
inline constexpr double kDefaultHorizon = 100.0 * kTwoPi;

/// One smooth piece of a stiction solution. Slip arcs keep sign(y) = sigma
/// strictly in the interior; stick arcs have y identically zero.
struct Arc {
  double t0, t1;  // absolute times, t1 > t0
  State z0;       // state at t0
  Branch branch;  // Plus / Minus for slip, Stick otherwise
};

/// Exact state of a slip arc of Z^sigma started at z0, evaluated at t >= 0.
/// x(t) = c1 cos(gamma t) + c2 sin(gamma t) - sin(theta0+t)/(gamma^2-1)
///        - sigma mu_d/gamma^2, with (c1, c2) fixed by (x0, y0).
State slip_flow_closed_form(const State& z0, int sigma, const Params& p, double t);

struct Trajectory {
  std::vector<Arc> arcs;
  std::vector<Event> events;
  BranchPolicy branch_policy_used = BranchPolicy::StickFirst;
  std::vector<std::string> warnings;

  /// State at absolute time t in [t_begin(), t_end()].
  State eval(double t, const Params& p) const;
  double t_begin() const { return arcs.empty() ? 0.0 : arcs.front().t0; }
  double t_end() const { return arcs.empty() ? 0.0 : arcs.back().t1; }
};

/// True iff the trajectory recorded no SingularHit event.
bool is_regular(const Trajectory& traj);

/// First event along the arc of `branch` started at z0 (absolute time t0).
/// For slip arcs: first root of y(t) = 0, classified by xi at the landing
/// point. For stick arcs: first time |xi(x0, theta)| reaches mu_s,
/// classified StickToSlipOnset or SingularHit by the I+- windows.
Event next_event(const State& z0, double t0, Branch branch, const Params& p,
                 double horizon = kDefaultHorizon);

/// Integrate a stiction solution for duration T. Returns one trajectory per
/// forward branch: a single entry unless policy is EnumerateBoth and a
/// SingularHit is encountered (the fork doubles the set; each subtree may
/// fork again).
std::vector<Trajectory> integrate_stiction(const State& z0, double T,
                                           BranchPolicy policy, const Params& p);

/// Residual of the Carathéodory integral equation over one arc, evaluated by
/// Gauss-Legendre quadrature: max component of z(t1) - z(t0) - int Z dt.
double caratheodory_residual(const Arc& arc, const Params& p, int panels = 64);

}  // namespace stiction

#endif
