#ifndef STICTION_REGULARIZATION_HPP
#define STICTION_REGULARIZATION_HPP

#include <functional>
#include <vector>

#include "stiction/model.hpp"
#include "stiction/ode.hpp"
#include "stiction/pws.hpp"

// Smooth regularization of the stiction law within |y| < eps: the shaping
// polynomial phi, the slow-fast structure (critical manifold, folds, folded
// singularities), reduced/desingularized flows, singular canards, and stiff
// integration of the regularized field.
namespace stiction {

struct SingularSystem : ModelError {
  using ModelError::ModelError;
};
struct ShapeViolation : ModelError {
  using ModelError::ModelError;
};
struct NoSingularities : ModelError {
  using ModelError::ModelError;
};
struct NoStick : ModelError {
  using ModelError::ModelError;
};

/// phi(y) = a y^7 + b y^5 + c y^3 + d y on [-1, 1], extended by sign(y)
/// outside (globally C^1 since phi(+-1) = +-1, phi'(+-1) = 0).
struct RegParams {
  double eps;
  double delta;         // interior extremum of phi, 0 < delta < 1
  double a, b, c, d;

  double phi(double y) const {
    if (y >= 1.0) return 1.0;
    if (y <= -1.0) return -1.0;
    const double y2 = y * y;
    return (((a * y2 + b) * y2 + c) * y2 + d) * y;
  }
  double dphi(double y) const {
    if (std::abs(y) >= 1.0) return 0.0;
    const double y2 = y * y;
    return ((7.0 * a * y2 + 5.0 * b) * y2 + 3.0 * c) * y2 + d;
  }
  double ddphi(double y) const {
    if (std::abs(y) >= 1.0) return 0.0;
    const double y2 = y * y;
    return ((42.0 * a * y2 + 20.0 * b) * y2 + 6.0 * c) * y;
  }
};

/// Coefficients from the 4x4 linear system {phi(1)=1, phi'(1)=0,
/// phi(delta)=mu_s/mu_d, phi'(delta)=0}, with post-construction shape checks
/// (odd by construction; phi' > 0 on (0,delta), phi' < 0 on (delta,1),
/// phi''(delta) < 0).
RegParams build_phi(double delta, double mu_s, double mu_d, double eps);

/// Monotone regularization (Sotomayor-Teixeira style), phi(y) = (3y - y^3)/2.
/// Negative control only: it has no repelling critical-manifold branches.
RegParams build_phi_st(double eps);

/// Right-hand side of the regularized system in the original time scale:
/// x' = y, y' = -xi - mu_d phi(y/eps), theta' = 1. Equals Z^+- for |y| >= eps.
StateDerivative regularized_rhs(const State& z, const Params& p, const RegParams& rp);

/// Fast-scale right-hand side (tau = t/eps), state (x, yhat, theta):
/// dx/dtau = eps^2 yhat, dyhat/dtau = -xi - mu_d phi(yhat), dtheta/dtau = eps.
/// eps = 0 gives the layer problem.
void fast_rhs(double x, double yhat, double theta, const Params& p,
              const RegParams& rp, double eps, double* dx, double* dyhat,
              double* dtheta);

enum class ManifoldBranch { CA, CRPlus, CRMinus };

struct ManifoldRoot {
  double yhat;
  ManifoldBranch branch;
};

/// All roots of phi(yhat) = -xi/mu_d in [-1, 1]: the critical manifold C_0.
/// One root on C_a for |xi| < mu_d; two for mu_d < |xi| <= mu_s (C_a plus the
/// repelling branch that is a graph over this band, merging at a fold double
/// root when |xi| = mu_s); none for |xi| > mu_s.
std::vector<ManifoldRoot> critical_manifold_roots(double xi_value, const Params& p,
                                                  const RegParams& rp);

struct ReducedRates {
  double dyhat_reduced;       // reduced problem, original time (needs phi' != 0)
  double dtheta_reduced;      // = 1
  double dyhat_desing;        // desingularized: -Gamma yhat - cos theta
  double dtheta_desing;       // mu_d phi'(yhat)
  bool reduced_defined;       // false on the fold lines yhat = +-delta
};

/// Flow on the critical manifold in reduced and desingularized time.
/// Gamma = gamma^2 eps extends the base case (Gamma = 0 recovers it); the
/// desingularized time runs backward relative to t exactly where phi' < 0.
ReducedRates reduced_flow(double yhat, double theta, const Params& p,
                          const RegParams& rp, double Gamma);

enum class CriticalPointClass {
  FoldedSaddle,
  FoldedCenter,
  FoldedFocusStable,
  FoldedNodeStable
};

struct CriticalPoint {
  double yhat, theta;
  CriticalPointClass cls;
  double eig_re[2], eig_im[2];  // eigenvalues of the desingularized linearization
};

/// Folded singularities of the desingularized flow: yhat = +-delta,
/// cos theta = -+ Gamma delta. Throws NoSingularities when |Gamma delta| > 1.
std::vector<CriticalPoint> folded_singularities(const Params& p, const RegParams& rp,
                                                double Gamma);

enum class CanardKind { Vrai, Faux };

struct CanardSegment {
  CanardKind kind;
  std::vector<double> yhat, theta;  // sampled path, theta increasing
  double closure_error;             // distance back to the saddle after one period
};

/// Singular canard through a folded saddle of the Gamma = 0 desingularized
///// flow: the separatrix along the saddle eigendirection, followed over one
/// theta-period. Vrai connects C_a to C_r; Faux is its time reversal.
CanardSegment singular_canard(const CriticalPoint& saddle, CanardKind kind,
                              const Params& p, const RegParams& rp);

struct SampledTrajectory {
  std::vector<double> t;
  std::vector<State> z;
};

/// Adaptive integration of the regularized system, stable through the
/// eps-layer (explicit steps capped by the layer stiffness bound).
SampledTrajectory stiff_integrate(const State& z0, double T, const Params& p,
                                  const RegParams& rp, double tol = 1e-10);

/// Single state at time T (no samples kept).
State stiff_flow(const State& z0, double T, const Params& p, const RegParams& rp,
                 double tol = 1e-10);

struct ClosenessRow {
  double eps;
  double sup_distance;
};

struct ClosenessStudy {
  std::vector<ClosenessRow> rows;
  double loglog_slope;
};

/// sup_t |regularized flow - stiction solution| over [0, T] for each eps,
/// plus the log-log slope of d(eps). The reference stiction solution must be
/// regular (propagates the singularity as an error).
ClosenessStudy closeness_study(const State& z0, double T, const Params& p,
                               double delta, const std::vector<double>& eps_list);

struct StickingCycle {
  double x0;                 // Poincare fixed point at theta = 0
  double map_derivative;     // d P / d x at the fixed point
  std::vector<State> samples;
};

/// The attracting 2 pi-periodic sticking limit cycle on the attracting slow
/// manifold (requires mu_s > 1; NoStick otherwise).
StickingCycle sticking_limit_cycle(const Params& p, const RegParams& rp);

}  // namespace stiction

#endif
