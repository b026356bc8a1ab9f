#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tradecert/distribution.hpp"
#include "tradecert/survival_curve.hpp"

namespace tradecert {

/// Threshold s2 solving (1 - beta) s2 = beta G(s2). The left side minus the
/// right side is strictly increasing in s, so bisection on
/// [0, beta G(0) / (1 - beta)] always brackets the unique root.
double solve_s2(const SurvivalCurve& curve, double beta);

/// Density of the minimal-mass price measure:
///   q*(s) = beta (H/G - int_s^s2 H^2 / G^2) + (1 - beta) G(s2) / G^2
/// for 0 <= s <= s2, and 0 beyond s2.
double q_star(const SurvivalCurve& curve, double beta, double s2, double s);

/// psi(p, s) = G(p) + H(p) (p - s), the weight a price p contributes to the
/// constraint at seller value s. Requires p >= s >= 0.
double psi(const SurvivalCurve& curve, double p, double s);

/// Minimal-mass price measure for a buyer curve and target ratio beta. The
/// measure is absolutely continuous on [0, s2] and flat afterwards.
///
/// Step curves get exact cell-wise closed forms: inside a cell of constant H
/// the numerator of q* is constant and G is linear, so every integral reduces
/// to A (b - a) / (G(a) G(b)). Other kinds use adaptive quadrature.
class PriceMeasure {
 public:
  PriceMeasure(SurvivalCurve curve, double beta);

  double beta() const noexcept { return beta_; }
  double s2() const noexcept { return s2_; }
  /// Total mass, the integral of q* over [0, s2].
  double mass() const noexcept { return mass_; }
  const SurvivalCurve& curve() const noexcept { return curve_; }

  double density(double s) const;
  /// Q*(s) - Q*(0^-), the mass on [0, min(s, s2)].
  double cumulative(double s) const;
  /// phi(s) = (1 - beta) s + int_s^s2 psi(p, s) q*(p) dp - beta G(s).
  double phi(double s) const;

  /// 16-hex-digit FNV-1a digest of the CSV rendering on a fixed grid.
  std::string content_hash() const;
  /// CSV "s,q,Q" on `points` equally spaced values over [0, s2].
  std::string csv(int points) const;

 private:
  struct Cell {
    double lo, hi, h;
    double numerator;  // beta (h G(hi) - int_hi^s2 H^2) + (1 - beta) G(s2)
    double mass;
  };

  bool exact() const noexcept { return !cells_.empty(); }
  std::size_t cell_index(double s) const;
  double partial_mass(const Cell& c, double a, double b) const;

  SurvivalCurve curve_;
  double beta_;
  double s2_;
  double g_s2_;
  double mass_;
  std::vector<Cell> cells_;
  std::vector<double> mass_right_;  // mass of cells i.. end
  std::vector<double> breaks_;
};

/// Total mass of the minimal price measure. Mass <= 1 certifies beta for this
/// buyer curve.
double price_mass(const SurvivalCurve& curve, double beta);

/// Free-function form of PriceMeasure::phi.
double phi(const SurvivalCurve& curve, double beta, const PriceMeasure& measure,
           double s);

/// Worst-case seller CDF for a normalized buyer curve (s2 = 1):
///   F(p) = G(1) [ -H(p) int_0^p G^-2 + 1 / G(p) ],  p in [0, 1].
/// Throws ValidationError if the curve is not normalized.
double worst_seller_cdf(const SurvivalCurve& curve, double beta, double p);

/// The worst seller as a distribution on [0, 1]. Mass not placed by the CDF
/// below 1 sits as an atom at 1.
ValueDistribution worst_seller_distribution(const SurvivalCurve& curve, double beta);

/// Integral of G^-2 over [0, p]; exact per cell for step curves.
double inverse_g_squared_integral(const SurvivalCurve& curve, double p);

/// Bounds of the region where 0 < H < 1: z1 = sup{H = 1}, z2 = inf{H = 0}.
struct TransitionRegion {
  double z1;
  double z2;
};
TransitionRegion transition_region(const SurvivalCurve& curve);

/// Residual of the first-order condition for a worst-case buyer curve at z:
///   H'(z) - [int_z^z2 H^2 - H G - G(s2)^2] / [G(z)^3 int_0^z G^-2].
/// Diagnostic only. Throws DomainError outside (z1, z2).
double extremal_ode_residual(const SurvivalCurve& curve, double beta, double z);

}  // namespace tradecert
