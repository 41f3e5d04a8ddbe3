#ifndef STICTION_MODEL_HPP
#define STICTION_MODEL_HPP

#include <cmath>
#include <stdexcept>
#include <string>

// Dimensionless friction oscillator with a stiction law: a mass on a rough
// table, pulled by a linear spring and a sinusoidal forcing. State is
// z = (x, y, theta) with x the spring elongation, y the velocity and theta
// the forcing phase on [0, 2*pi). The switching manifold is {y = 0}.
namespace stiction {

inline constexpr double kTwoPi = 6.283185307179586476925286766559;
inline constexpr double kPi = 3.1415926535897932384626433832795;

/// Default tolerance for deciding that a point lies on a codimension-1 set.
inline constexpr double kOnSetTol = 1e-10;

struct ModelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UndefinedFriction : ModelError {
  UndefinedFriction() : ModelError("friction undefined at y=0, |xi|=mu_s") {}
};
struct NotOnTangencySet : ModelError {
  NotOnTangencySet() : ModelError("point is not on the requested tangency set") {}
};

/// Physical parameters before nondimensionalization.
struct DimensionalParams {
  double mass;            // M
  double stiffness;       // kappa
  double amplitude;       // A, forcing amplitude
  double omega;           // forcing angular frequency
  double normal_force;    // N
  double f_s;             // static friction coefficient
  double f_d;             // dynamic friction coefficient
  double velocity_scale;  // V, free positive scale (cancels out)
};

/// Dimensionless parameters: gamma = sqrt(kappa/M)/omega, mu_{s,d} = N f_{s,d}/A.
struct Params {
  double gamma;
  double mu_s;
  double mu_d;

  void validate() const {
    if (!(gamma > 0.0)) throw ModelError("gamma must be positive");
    if (!(mu_s > mu_d && mu_d > 0.0)) throw ModelError("need mu_s > mu_d > 0");
  }
};

Params nondimensionalize(const DimensionalParams& dp);

/// Reduce an angle to [0, 2*pi).
inline double wrap_angle(double theta) {
  double t = std::fmod(theta, kTwoPi);
  return t < 0.0 ? t + kTwoPi : t;
}

struct State {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;  // kept in [0, 2*pi)

  State() = default;
  State(double x_, double y_, double theta_) : x(x_), y(y_), theta(wrap_angle(theta_)) {}
};

struct StateDerivative {
  double dx = 0.0;
  double dy = 0.0;
  double dtheta = 1.0;
};

/// Sum of the rescaled external forces, xi = gamma^2 x + sin(theta).
inline double xi(double x, double theta, const Params& p) {
  return p.gamma * p.gamma * x + std::sin(theta);
}
inline double xi(const State& z, const Params& p) { return xi(z.x, z.theta, p); }

/// Stiction law mu(y, xi). Throws UndefinedFriction at y=0, |xi|=mu_s, where
/// the law has no value (we surface the ambiguity instead of picking a side).
double friction(double y, double xi_value, const Params& p);

enum class Branch { Plus, Minus, Stick };

/// Smooth extension Z^+, Z^- or Z_s evaluated at z, regardless of sign(y).
StateDerivative vector_field(const State& z, const Params& p, Branch branch);

enum class RegionLabel {
  GPlus,          // y > 0
  GMinus,         // y < 0
  SigmaCPlus,     // y = 0, xi < -mu_s   (crossing, pointing upwards)
  SigmaCMinus,    // y = 0, xi > mu_s    (crossing, pointing downwards)
  SigmaS,         // y = 0, |xi| < mu_s  (sticking)
  BoundaryCPlus,  // y = 0, xi = -mu_s
  BoundaryCMinus  // y = 0, xi = mu_s
};

struct Classification {
  RegionLabel label;
  bool in_i_plus = false;   // boundary point inside the non-uniqueness window I^+
  bool in_i_minus = false;  // same for I^-
};

// Non-uniqueness windows on the boundaries. On dSigma_c^- both continuations
// (stay sticking, or slip on Z^-) are viable exactly where the sticking flow
// pushes xi back below mu_s, i.e. cos(theta) <= 0. Mirrored on dSigma_c^+.
// Note the windows in the reduced problem (I_hat^±) carry this orientation;
// the discontinuous-system display in the source material swaps the two
// labels, which is inconsistent with its own tangency analysis.
inline bool in_i_minus_window(double theta) {
  return std::cos(theta) <= 0.0;
}
inline bool in_i_plus_window(double theta) {
  return std::cos(theta) >= 0.0;
}

/// Assign z to exactly one stratum; points within tol of {y=0} / {xi=∓mu_s}
/// count as on the corresponding set.
Classification classify(const State& z, const Params& p, double tol = kOnSetTol);

enum class TangencyLabel { Visible, Invisible, Cusp, None };

enum class TangencySet {
  ZsOnBoundaryCPlus,   // Z_s against xi = -mu_s
  ZsOnBoundaryCMinus,  // Z_s against xi = +mu_s
  ZPlusOnSigma,        // Z^+ against y = 0 (tangency line xi = -mu_d)
  ZMinusOnSigma        // Z^- against y = 0 (tangency line xi = +mu_d)
};

/// Tangency type from the first nonvanishing Lie derivative.
/// Throws NotOnTangencySet if z is not on the relevant set (within tol).
TangencyLabel tangency(const State& z, const Params& p, TangencySet which,
                       double tol = kOnSetTol);

enum class SlidingKind { Crossing, FilippovSliding, StictionOnlySliding, Degenerate };

/// Filippov's convex construction on {y=0}: sliding only for |xi| < mu_d,
/// strictly smaller than the true sticking region whenever mu_d < mu_s.
SlidingKind filippov_sliding_region(const State& z, const Params& p,
                                    double tol = kOnSetTol);

/// The symmetry S(x,y,theta) = (-x,-y,theta+pi); S^2 = identity on the torus.
inline State symmetry_map(const State& z) {
  return State(-z.x, -z.y, z.theta + kPi);
}

}  // namespace stiction

#endif
