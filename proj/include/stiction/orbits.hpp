#ifndef STICTION_ORBITS_HPP
#define STICTION_ORBITS_HPP

#include <Eigen/Core>
#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "stiction/model.hpp"
#include "stiction/pws.hpp"
#include "stiction/regularization.hpp"

// Symmetric slip-stick periodic orbits: the algebraic solve and gamma
// continuation for the discontinuous system, Floquet multipliers with
// saltation corrections, and multiple-shooting continuation of the
// regularized family through its fold, including the canard segment with
// exponentially large multipliers.
namespace stiction {

struct NewtonDivergence : ModelError {
  using ModelError::ModelError;
};
struct ClosureFailure : ModelError {
  using ModelError::ModelError;
};
struct DegenerateTransition : ModelError {
  using ModelError::ModelError;
};
struct NoIntersection : ModelError {
  using ModelError::ModelError;
};

/// Lower half of a symmetric slip-stick periodic orbit: slip on Z^- starts
/// at (x0, 0, theta0) on {xi = mu_s}, lands after time pi - theta_star, and
/// sticks for theta_star; the upper half is the symmetry image.
struct SlipStickSolution {
  double gamma;
  double theta0;       // slip-onset phase
  double theta_star;   // stick-phase duration, in (0, pi)
  double x0;           // slip-onset position, (mu_s - sin theta0) / gamma^2
  double residual_norm;

  // Admissibility (violations are flagged, not thrown):
  bool slip_interior_negative;       // y < 0 strictly inside the slip arc
  bool stick_no_early_onset;         // stick stays below xi = mu_s before its end
  bool stick_avoids_opposite_onset;  // stick never reaches xi = -mu_s
  bool admissible() const {
    return slip_interior_negative && stick_no_early_onset &&
           stick_avoids_opposite_onset;
  }
};

/// Newton solve of {x_slip(pi - theta_star) + x0, y_slip(pi - theta_star)}
/// over (theta0, theta_star), x0 eliminated by the onset condition.
/// Requires mu_s > 1. Throws NewtonDivergence.
SlipStickSolution solve_slipstick(double gamma, double theta0_guess,
                                  double theta_star_guess, const Params& p);

/// One-period trajectory of the orbit (period 2 pi, starting at slip onset),
/// rebuilt through the event-driven integrator. Closure error <= 1e-9 or
/// ClosureFailure.
Trajectory assemble_full_orbit(const SlipStickSolution& sol, const Params& p);

enum class OrbitStability { Attracting, Saddle, Repelling, Degenerate };

struct FloquetData {
  std::complex<double> multipliers[3];  // {1, 0, lambda} for slip-stick orbits
  OrbitStability classification;
};

/// Monodromy of the discontinuous orbit in the (x, y) plane: analytic slip
/// fundamental matrices, saltation at the stick-exit events, and the rank-1
/// landing projection that produces the structural zero multiplier.
/// Throws DegenerateTransition at tangential transitions.
FloquetData floquet_discontinuous(const SlipStickSolution& sol, const Params& p);

enum class BranchLabel { Pi0Left, Pi0Right, PiEpsLeft, PiEpsCenter, PiEpsRight };

enum class BranchTermination {
  RangeEnd,
  PureSlipLimit,    // theta_star -> 0
  TangencyLimit,    // theta0 -> pi/2
  FullStickLimit,   // theta_star -> pi
  ResonanceGuardHit,
  ContinuationStall
};

struct PwsBranchPoint {
  SlipStickSolution sol;
  FloquetData floquet;
  double max_abs_y;
};

struct PwsBranch {
  BranchLabel label;
  std::vector<PwsBranchPoint> points;
  BranchTermination termination;
};

/// Natural-parameter continuation of the slip-stick family from gamma_start
/// toward gamma_end (adaptive steps, halved on failure). Terminates at the
/// family's boundary if it comes first.
PwsBranch continue_branch_pws(double gamma_start, double gamma_end,
                              const SlipStickSolution& seed, const Params& p);

/// Symmetric periodic orbit of the regularized system, stored as a
/// multiple-shooting solution over half a period: node states u[i] = (x, y)
/// at mesh phases ts[i] in [0, pi], with the symmetric closure
/// u(pi) = -u(0). The full orbit is the half followed by its symmetry image,
/// so the full monodromy is the square of the half-period variational
/// product; multipliers are reported as log magnitudes (they reach e^{c/eps}
/// on canard segments, past floating-point range for small eps). The mesh is
/// refined so no single segment's variational expansion overflows, and the
/// node vector resolves the canard family: distinct canard orbits are
/// exponentially close over the stick phase and only O(1) apart after the
/// delayed slip departure, so a single anchor state cannot parameterize the
/// branch around its fold but the full node vector can.
struct RegOrbit {
  double gamma;
  double eps;
  std::vector<double> ts;          // mesh, ts.front() = 0, ts.back() = pi
  std::vector<Eigen::Vector2d> u;  // node states, size ts.size() - 1
  double residual;                 // max-norm of the shooting residual
  double log_mu2, log_mu3;         // log |multiplier| of the nontrivial pair
  double max_abs_y;                // over the full period

  Eigen::Vector2d state0() const { return u.empty() ? Eigen::Vector2d::Zero() : u[0]; }
};

/// Converge a regularized periodic orbit by damped Newton on the shooting
/// system at fixed gamma (re-meshing once after convergence). Warns into
/// *warnings (if given) when |mu3| > 1e8; the multiplier is always assembled
/// from log-scaled segment products. Throws NewtonDivergence.
RegOrbit shoot_periodic_regularized(const RegOrbit& seed, const Params& p,
                                    const RegParams& rp,
                                    std::vector<std::string>* warnings = nullptr);

/// Seed built from a converged slip-stick solution: the PWS orbit with the
/// stick phase displaced onto the attracting slow sheet (y = eps yhat),
/// relaxed by a few forward periods; valid on the stable regular branch.
RegOrbit reg_seed_from_pws(const SlipStickSolution& sol, const Params& p,
                           const RegParams& rp, int relax_periods = 12);

/// Dense samples of the full-period orbit (for export and amplitude checks).
SampledTrajectory sample_reg_orbit(const RegOrbit& orbit, const Params& p,
                                   const RegParams& rp);

struct RegBranchPoint {
  RegOrbit orbit;
  BranchLabel segment;  // PiEpsRight before the fold, PiEpsCenter after
};

struct RegBranch {
  std::vector<RegBranchPoint> points;
  double gamma_fold = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::string> warnings;
};

/// Pseudo-arclength continuation of the regularized family in gamma, from a
/// converged orbit on the regular branch, up through the fold and back down
/// the connecting canard segment until gamma drops below gamma_stop.
RegBranch continue_branch_regularized(const RegOrbit& start, double gamma_stop,
                                      const Params& p, const RegParams& rp);

/// Re-converge `orbit` at a different eps (short natural continuation in
/// eps); gamma is held fixed.
RegOrbit reconverge_at_eps(const RegOrbit& orbit, double eps_target,
                           const Params& p, const RegParams& rp);

struct CanardExplosionReport {
  double amplitude_ratio;   // max |y| on the canard segment / regular neighbor
  double fit_slope;         // slope of log|mu3| vs 1/eps at fixed gamma
  double fit_r2;
  std::vector<double> eps_values, log_mu3_values;
};

/// Amplitude stays bounded along the canard segment while log|mu3| grows
/// like 1/eps: the explosion is in the multiplier, not the amplitude.
CanardExplosionReport no_canard_explosion_check(const RegBranch& branch,
                                                const std::vector<double>& eps_list,
                                                double gamma_fit, const Params& p,
                                                const RegParams& rp);

struct TransversalityData {
  double theta_in;    // phase of the crossing on the attracting sheet
  double yhat_in;
  double angle;       // crossing angle with the singular canard, radians
};

/// Global-return transversality at eps = 0: points on the repelling leg of
/// the vrai canard drop along fast fibers, fly the slip arc, return through
/// the symmetry onto the attracting sheet, and the image curve must cross
/// the canard at a nonzero angle. Throws NoIntersection.
TransversalityData transversality_check(double gamma, const Params& p,
                                        const RegParams& rp);

}  // namespace stiction

#endif
