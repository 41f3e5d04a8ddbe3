#include "stiction/model.hpp"

#include <cmath>

namespace stiction {

Params nondimensionalize(const DimensionalParams& dp) {
  if (!(dp.mass > 0.0 && dp.stiffness > 0.0 && dp.amplitude > 0.0 &&
        dp.omega > 0.0 && dp.normal_force > 0.0 && dp.velocity_scale > 0.0))
    throw ModelError("dimensional parameters must be positive");
  if (!(dp.f_s > dp.f_d && dp.f_d > 0.0))
    throw ModelError("need f_s > f_d > 0");
  Params p;
  p.gamma = std::sqrt(dp.stiffness / dp.mass) / dp.omega;
  p.mu_s = dp.normal_force * dp.f_s / dp.amplitude;
  p.mu_d = dp.normal_force * dp.f_d / dp.amplitude;
  p.validate();
  return p;
}

double friction(double y, double xi_value, const Params& p) {
  if (y != 0.0) return y > 0.0 ? -p.mu_d : p.mu_d;
  double a = std::abs(xi_value);
  if (a < p.mu_s) return xi_value;
  if (a > p.mu_s) return xi_value > 0.0 ? p.mu_s : -p.mu_s;
  throw UndefinedFriction();
}

StateDerivative vector_field(const State& z, const Params& p, Branch branch) {
  StateDerivative d;
  switch (branch) {
    case Branch::Plus:
      d.dx = z.y;
      d.dy = -xi(z, p) - p.mu_d;
      break;
    case Branch::Minus:
      d.dx = z.y;
      d.dy = -xi(z, p) + p.mu_d;
      break;
    case Branch::Stick:
      d.dx = 0.0;
      d.dy = 0.0;
      break;
  }
  d.dtheta = 1.0;
  return d;
}

Classification classify(const State& z, const Params& p, double tol) {
  Classification c{RegionLabel::SigmaS, false, false};
  if (z.y > tol) {
    c.label = RegionLabel::GPlus;
    return c;
  }
  if (z.y < -tol) {
    c.label = RegionLabel::GMinus;
    return c;
  }
  double v = xi(z, p);
  if (std::abs(v - p.mu_s) <= tol) {
    c.label = RegionLabel::BoundaryCMinus;
    c.in_i_minus = in_i_minus_window(z.theta);
  } else if (std::abs(v + p.mu_s) <= tol) {
    c.label = RegionLabel::BoundaryCPlus;
    c.in_i_plus = in_i_plus_window(z.theta);
  } else if (v > p.mu_s) {
    c.label = RegionLabel::SigmaCMinus;
  } else if (v < -p.mu_s) {
    c.label = RegionLabel::SigmaCPlus;
  } else {
    c.label = RegionLabel::SigmaS;
  }
  return c;
}

namespace {

TangencyLabel label_from_lie(double l2, double l3, double tol) {
  if (l2 > tol) return TangencyLabel::Visible;
  if (l2 < -tol) return TangencyLabel::Invisible;
  if (std::abs(l3) > tol) return TangencyLabel::Cusp;
  return TangencyLabel::None;
}

}  // namespace

TangencyLabel tangency(const State& z, const Params& p, TangencySet which,
                       double tol) {
  double v = xi(z, p);
  double s = std::sin(z.theta);
  double c = std::cos(z.theta);
  switch (which) {
    case TangencySet::ZsOnBoundaryCMinus: {
      // chi = mu_s - xi on Sigma; L chi = -cos(theta), L^2 chi = sin(theta),
      // L^3 chi = cos(theta).
      if (std::abs(v - p.mu_s) > tol) throw NotOnTangencySet();
      if (std::abs(c) > tol) return TangencyLabel::None;
      return label_from_lie(s, c, tol);
    }
    case TangencySet::ZsOnBoundaryCPlus: {
      // chi = xi + mu_s; L chi = cos(theta), L^2 chi = -sin(theta).
      if (std::abs(v + p.mu_s) > tol) throw NotOnTangencySet();
      if (std::abs(c) > tol) return TangencyLabel::None;
      return label_from_lie(-s, -c, tol);
    }
    case TangencySet::ZMinusOnSigma: {
      // chi = -y in G^-; L chi = xi - mu_d, L^2 chi = cos(theta) on the
      // tangency line, L^3 chi = -sin(theta).
      if (std::abs(z.y) > tol) throw NotOnTangencySet();
      if (std::abs(v - p.mu_d) > tol) return TangencyLabel::None;
      return label_from_lie(c, -s, tol);
    }
    case TangencySet::ZPlusOnSigma: {
      // chi = y in G^+; L chi = -xi - mu_d, L^2 chi = -cos(theta) on xi=-mu_d.
      if (std::abs(z.y) > tol) throw NotOnTangencySet();
      if (std::abs(v + p.mu_d) > tol) return TangencyLabel::None;
      return label_from_lie(-c, s, tol);
    }
  }
  throw NotOnTangencySet();
}

SlidingKind filippov_sliding_region(const State& z, const Params& p, double tol) {
  if (std::abs(z.y) > tol) throw ModelError("filippov_sliding_region requires y=0");
  double a = std::abs(xi(z, p));
  if (std::abs(a - p.mu_d) <= tol || std::abs(a - p.mu_s) <= tol)
    return SlidingKind::Degenerate;
  if (a < p.mu_d) return SlidingKind::FilippovSliding;
  if (a < p.mu_s) return SlidingKind::StictionOnlySliding;
  return SlidingKind::Crossing;
}

}  // namespace stiction
