#ifndef STICTION_ODE_HPP
#define STICTION_ODE_HPP

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>

// Adaptive Dormand-Prince 5(4) integrator. The regularized friction system
// is stiff inside the O(eps) switching layer, so callers may supply a
// spectral-radius estimate; the controller then caps the step at the
// explicit stability limit instead of letting the error estimator thrash.
namespace stiction::ode {

struct StepFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  double abs_tol = 1e-10;
  double rel_tol = 1e-10;
  double initial_step = 1e-4;
  double max_step = 0.1;
  double min_step = 1e-14;
  std::int64_t max_steps = 200'000'000;
  // Real-axis stability extent of the DP5 method, used with the caller's
  // spectral-radius estimate.
  double stability_extent = 3.0;
};

using Rhs = std::function<void(double t, const Eigen::VectorXd& y, Eigen::VectorXd& dydt)>;
using SpectralRadius = std::function<double(double t, const Eigen::VectorXd& y)>;
using Observer = std::function<void(double t, const Eigen::VectorXd& y)>;

namespace detail {
// Dormand-Prince coefficients (RK45, FSAL).
inline constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                        a53 = 64448.0 / 6561, a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                        a64 = 49.0 / 176, a65 = -5103.0 / 18656;
inline constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                        b5 = -2187.0 / 6784, b6 = 11.0 / 84;
inline constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                        e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
}  // namespace detail

class DormandPrince {
 public:
  DormandPrince(Rhs rhs, Options opt = {}) : rhs_(std::move(rhs)), opt_(opt) {}

  void set_spectral_radius(SpectralRadius sr) { rho_ = std::move(sr); }
  void set_observer(Observer obs) { observer_ = std::move(obs); }

  /// Integrate y from t0 to t1 (t1 > t0) in place.
  void integrate(double t0, double t1, Eigen::VectorXd& y) {
    const auto n = y.size();
    Eigen::VectorXd k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n);
    Eigen::VectorXd ytmp(n), ynew(n), yerr(n);
    double t = t0;
    double h = std::min(opt_.initial_step, t1 - t0);
    rhs_(t, y, k1);
    if (observer_) observer_(t, y);
    std::int64_t steps = 0;
    bool first_same_as_last = false;
    while (t < t1) {
      if (++steps > opt_.max_steps) throw StepFailure("max step count exceeded");
      double hmax = opt_.max_step;
      if (rho_) {
        double r = rho_(t, y);
        if (r > 0.0) hmax = std::min(hmax, opt_.stability_extent / r);
      }
      h = std::min({h, hmax, t1 - t});
      if (h < opt_.min_step) throw StepFailure("step size underflow");
      if (!first_same_as_last) rhs_(t, y, k1);

      using namespace detail;
      ytmp = y + h * (a21 * k1);
      rhs_(t + c2 * h, ytmp, k2);
      ytmp = y + h * (a31 * k1 + a32 * k2);
      rhs_(t + c3 * h, ytmp, k3);
      ytmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
      rhs_(t + c4 * h, ytmp, k4);
      ytmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
      rhs_(t + c5 * h, ytmp, k5);
      ytmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
      rhs_(t + h, ytmp, k6);
      ynew = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
      rhs_(t + h, ynew, k7);
      yerr = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

      double err = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        double sc = opt_.abs_tol +
                    opt_.rel_tol * std::max(std::abs(y[i]), std::abs(ynew[i]));
        err = std::max(err, std::abs(yerr[i]) / sc);
      }
      if (err <= 1.0) {
        t += h;
        y.swap(ynew);
        k1.swap(k7);
        first_same_as_last = true;
        if (observer_) observer_(t, y);
        double fac = 0.9 * std::pow(std::max(err, 1e-10), -0.2);
        h *= std::clamp(fac, 0.2, 5.0);
      } else {
        first_same_as_last = false;
        h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
      }
    }
  }

 private:
  Rhs rhs_;
  Options opt_;
  SpectralRadius rho_;
  Observer observer_;
};

inline Eigen::VectorXd integrate(const Rhs& rhs, double t0, double t1,
                                 const Eigen::VectorXd& y0, Options opt = {},
                                 SpectralRadius rho = {}) {
  DormandPrince stepper(rhs, opt);
  if (rho) stepper.set_spectral_radius(std::move(rho));
  Eigen::VectorXd y = y0;
  stepper.integrate(t0, t1, y);
  return y;
}

}  // namespace stiction::ode

#endif
