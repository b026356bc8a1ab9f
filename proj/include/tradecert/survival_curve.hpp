#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tradecert {

enum class CurveKind { step, point_mass, exponential, analytic_piecewise };

std::string to_string(CurveKind kind);

/// One piece of an analytic piecewise survival function, covering [lo, hi).
/// The closed-form integrals are optional; when missing, quadrature is used.
struct AnalyticPiece {
  double lo = 0.0;
  double hi = 0.0;
  std::function<double(double)> h;
  /// (a, b) -> integral of H over [a, b], lo <= a <= b <= hi.
  std::function<double(double, double)> integral;
  /// (a, b) -> integral of H^2 over [a, b].
  std::function<double(double, double)> sq_integral;
  std::function<double(double)> derivative;
};

/// Buyer survival function H(s) = Pr[b > s] together with its tail integral
/// G(s) = integral of H over [s, inf) + tail_mass.
///
/// The tail mass stands for a far-away atom of vanishing probability: it
/// contributes to G everywhere but never to H. Curves are immutable and cheap
/// to copy (shared representation).
///
/// Step curves are right-open: values[i] applies on [grid[i], grid[i+1]),
/// and H = 0 from the last breakpoint on.
class SurvivalCurve {
 public:
  static SurvivalCurve step(std::vector<double> grid, std::vector<double> values,
                            double tail_mass = 0.0);
  static SurvivalCurve point_mass(double value, double tail_mass = 0.0);
  static SurvivalCurve exponential(double rate, double tail_mass = 0.0);
  /// Pieces must be contiguous and start at 0. H = 0 beyond the last piece.
  static SurvivalCurve piecewise(std::vector<AnalyticPiece> pieces,
                                 double tail_mass = 0.0);

  CurveKind kind() const noexcept;
  double tail_mass() const noexcept;

  /// H(s). Throws DomainError for s < 0.
  double survival(double s) const;
  /// Pr[b >= s], the left limit of H at s (1 at s = 0).
  double survival_left(double s) const;
  /// G(s), tail mass included.
  double g_tail(double s) const;
  /// Integral of H^2 over [s, hi].
  double g_sq_tail(double s, double hi) const;
  /// Integral of H over [a, b].
  double integral(double a, double b) const;
  /// H'(s) where a closed form exists (exponential and pieces that provide one).
  std::optional<double> derivative(double s) const;

  /// Curve s -> H(sigma * s). Breakpoints and tail mass are divided by sigma.
  SurvivalCurve rescale(double sigma) const;
  /// Same survival function with a different tail mass.
  SurvivalCurve with_tail_mass(double tail_mass) const;

  /// Right end of the explicit support; +inf for the exponential kind.
  double support_end() const noexcept;
  /// Points where H may jump or kink (grid points, piece boundaries).
  std::vector<double> breakpoints() const;

  /// Step-kind accessors (empty spans for other kinds).
  std::span<const double> grid() const noexcept;
  std::span<const double> values() const noexcept;

  /// Inverse transform: inf{ s : H(s) <= u } for u in [0, 1). Draws from the
  /// explicit part of the distribution; the tail atom is never produced.
  double value_at_quantile(double u) const;

  class Rep;

 private:
  explicit SurvivalCurve(std::shared_ptr<const Rep> rep);
  std::shared_ptr<const Rep> rep_;
};

/// CSV with header "s,H,G" on `points` equally spaced values over [lo, hi].
std::string curve_csv(const SurvivalCurve& curve, double lo, double hi,
                      int points);

/// Formats a value with "%.12g".
std::string format_g12(double v);

}  // namespace tradecert
