#include "tradecert/numerics.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <cstdint>
#include <vector>

namespace tradecert::numerics {

double integrate(const Integrand& f, double a, double b, double tol) {
  if (!(b > a)) return 0.0;
  // Boost compares the error of the [-1, 1] image against a tolerance in
  // original units, so short intervals never meet it. Integrate over [0, 1].
  const double w = b - a;
  auto unit = [&](double u) { return f(a + w * u) * w; };
  double error = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      unit, 0.0, 1.0, 20, tol, &error);
}

double integrate_split(const Integrand& f, double a, double b,
                       std::span<const double> breakpoints, double tol) {
  if (!(b > a)) return 0.0;
  std::vector<double> cuts{a};
  for (double p : breakpoints)
    if (p > a && p < b) cuts.push_back(p);
  cuts.push_back(b);
  std::sort(cuts.begin() + 1, cuts.end() - 1);
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
    total += integrate(f, cuts[i], cuts[i + 1], tol);
  return total;
}

double bisect_increasing(const Integrand& f, double lo, double hi, int max_iter,
                         double x_tol) {
  if (f(lo) >= 0.0) return lo;
  if (f(hi) <= 0.0) return hi;
  std::uintmax_t iters = static_cast<std::uintmax_t>(max_iter);
  auto done = [x_tol](double l, double h) {
    return h - l <= x_tol * std::max(std::abs(l), std::abs(h));
  };
  auto [l, h] = boost::math::tools::bisect(f, lo, hi, done, iters);
  // The bracket end with the smaller residual is the better root estimate.
  return std::abs(f(l)) <= std::abs(f(h)) ? l : h;
}

}  // namespace tradecert::numerics
