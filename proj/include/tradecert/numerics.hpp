#pragma once

#include <functional>
#include <span>

namespace tradecert::numerics {

using Integrand = std::function<double(double)>;

/// Adaptive Gauss-Kronrod quadrature of f over [a, b]. `tol` is relative to
/// the magnitude of the integral; the absolute floor is 1e-15.
double integrate(const Integrand& f, double a, double b, double tol = 1e-12);

/// Same as integrate(), but splits [a, b] at every breakpoint strictly inside
/// it so kinks and jumps never fall inside a quadrature panel.
double integrate_split(const Integrand& f, double a, double b,
                       std::span<const double> breakpoints, double tol = 1e-12);

/// Root of a strictly increasing f on [lo, hi] with f(lo) <= 0 <= f(hi).
/// Stops after max_iter halvings or when the bracket is narrower than
/// x_tol (relative to the bracket end).
double bisect_increasing(const Integrand& f, double lo, double hi,
                         int max_iter = 200, double x_tol = 0.0);

}  // namespace tradecert::numerics
