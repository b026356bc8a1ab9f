#include "tradecert/price_measure.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <sstream>

#include "tradecert/errors.hpp"
#include "tradecert/hash.hpp"
#include "tradecert/numerics.hpp"

namespace tradecert {

namespace {

void validate_beta(double beta) {
  if (!(beta > 0.0 && beta < 1.0)) throw DomainError("beta must lie in (0,1)");
}

bool is_step(const SurvivalCurve& c) {
  return c.kind() == CurveKind::step || c.kind() == CurveKind::point_mass;
}

}  // namespace

double solve_s2(const SurvivalCurve& curve, double beta) {
  validate_beta(beta);
  const double g0 = curve.g_tail(0.0);
  if (!(g0 > 0.0)) throw DomainError("G(0) must be positive");
  auto f = [&](double s) { return (1.0 - beta) * s - beta * curve.g_tail(s); };

  if (is_step(curve)) {
    // f is linear on every cell; find the sign change and solve exactly.
    const auto grid = curve.grid();
    const auto values = curve.values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (f(grid[i + 1]) >= 0.0) {
        const double b = grid[i + 1], h = values[i];
        return beta * (curve.g_tail(b) + h * b) / ((1.0 - beta) + beta * h);
      }
    }
    return beta * curve.tail_mass() / (1.0 - beta);
  }
  const double upper = beta * g0 / (1.0 - beta);
  return numerics::bisect_increasing(f, 0.0, upper, 200, 0.0);
}

double q_star(const SurvivalCurve& curve, double beta, double s2, double s) {
  validate_beta(beta);
  if (!(s >= 0.0)) throw DomainError("s must be >= 0");
  if (s > s2) return 0.0;
  const double g = curve.g_tail(s);
  const double sq = curve.g_sq_tail(s, s2);
  const double g_s2 = curve.g_tail(s2);
  return beta * (curve.survival(s) / g - sq / (g * g)) + (1.0 - beta) * g_s2 / (g * g);
}

double psi(const SurvivalCurve& curve, double p, double s) {
  if (!(s >= 0.0)) throw DomainError("s must be >= 0");
  if (p < s) throw DomainError("psi requires p >= s");
  return curve.g_tail(p) + curve.survival(p) * (p - s);
}

PriceMeasure::PriceMeasure(SurvivalCurve curve, double beta)
    : curve_(std::move(curve)), beta_(beta) {
  s2_ = solve_s2(curve_, beta_);
  g_s2_ = curve_.g_tail(s2_);
  if (!(g_s2_ > 0.0)) throw ValidationError("degenerate curve: G(s2) = 0");
  breaks_ = curve_.breakpoints();

  if (is_step(curve_)) {
    const auto grid = curve_.grid();
    const auto values = curve_.values();
    auto add_cell = [&](double lo, double hi, double h) {
      if (!(hi > lo)) return;
      Cell c{lo, hi, h, 0.0, 0.0};
      c.numerator = beta_ * (h * curve_.g_tail(hi) - curve_.g_sq_tail(hi, s2_)) +
                    (1.0 - beta_) * g_s2_;
      c.mass = c.numerator * (hi - lo) / (curve_.g_tail(lo) * curve_.g_tail(hi));
      cells_.push_back(c);
    };
    for (std::size_t i = 0; i < values.size() && grid[i] < s2_; ++i)
      add_cell(grid[i], std::min(grid[i + 1], s2_), values[i]);
    if (s2_ > grid.back()) add_cell(grid.back(), s2_, 0.0);
    if (cells_.empty()) cells_.push_back({0.0, 0.0, 0.0, 0.0, 0.0});

    mass_right_.assign(cells_.size() + 1, 0.0);
    for (std::size_t i = cells_.size(); i-- > 0;)
      mass_right_[i] = mass_right_[i + 1] + cells_[i].mass;
    mass_ = mass_right_[0];
  } else {
    mass_ = numerics::integrate_split([this](double s) { return density(s); }, 0.0,
                                      s2_, breaks_);
  }
}

std::size_t PriceMeasure::cell_index(double s) const {
  auto it = std::upper_bound(cells_.begin(), cells_.end(), s,
                             [](double x, const Cell& c) { return x < c.lo; });
  return it == cells_.begin() ? 0 : static_cast<std::size_t>(it - cells_.begin()) - 1;
}

double PriceMeasure::partial_mass(const Cell& c, double a, double b) const {
  if (!(b > a)) return 0.0;
  return c.numerator * (b - a) / (curve_.g_tail(a) * curve_.g_tail(b));
}

double PriceMeasure::density(double s) const {
  return q_star(curve_, beta_, s2_, s);
}

double PriceMeasure::cumulative(double s) const {
  if (!(s >= 0.0)) throw DomainError("s must be >= 0");
  if (s >= s2_) return mass_;
  if (exact()) {
    const std::size_t i = cell_index(s);
    return (mass_ - mass_right_[i]) + partial_mass(cells_[i], cells_[i].lo, s);
  }
  return numerics::integrate_split([this](double t) { return density(t); }, 0.0, s,
                                   breaks_);
}

double PriceMeasure::phi(double s) const {
  if (!(s >= 0.0)) throw DomainError("s must be >= 0");
  const double base = (1.0 - beta_) * s - beta_ * curve_.g_tail(s);
  if (s >= s2_) return base;
  if (exact()) {
    // psi(., s) is constant on each cell: G(hi) + h (hi - s).
    const std::size_t i = cell_index(s);
    double total = base + curve_.g_tail(s) * partial_mass(cells_[i], s, cells_[i].hi);
    for (std::size_t j = i + 1; j < cells_.size(); ++j) {
      const Cell& c = cells_[j];
      total += (curve_.g_tail(c.hi) + c.h * (c.hi - s)) * c.mass;
    }
    return total;
  }
  const double integral = numerics::integrate_split(
      [&](double p) { return psi(curve_, p, s) * density(p); }, s, s2_, breaks_);
  return base + integral;
}

std::string PriceMeasure::csv(int points) const {
  if (points < 2) throw DomainError("need at least two CSV points");
  std::ostringstream out;
  out << "s,q,Q\n";
  for (int i = 0; i < points; ++i) {
    const double s = s2_ * i / (points - 1);
    out << format_g12(s) << ',' << format_g12(density(s)) << ','
        << format_g12(cumulative(s)) << '\n';
  }
  return out.str();
}

std::string PriceMeasure::content_hash() const {
  const std::string text = csv(257);
  return hex16(fnv1a(text.data(), text.size()));
}

double price_mass(const SurvivalCurve& curve, double beta) {
  return PriceMeasure(curve, beta).mass();
}

double phi(const SurvivalCurve& curve, double beta, const PriceMeasure& measure,
           double s) {
  if (beta != measure.beta())
    throw DomainError("phi: beta differs from the measure's beta");
  (void)curve;
  return measure.phi(s);
}

double inverse_g_squared_integral(const SurvivalCurve& curve, double p) {
  if (!(p >= 0.0)) throw DomainError("p must be >= 0");
  if (is_step(curve)) {
    // G is linear on each cell, so int_a^b G^-2 = (b - a) / (G(a) G(b)).
    std::vector<double> cuts;
    for (double g : curve.grid())
      if (g < p) cuts.push_back(g);
    cuts.push_back(p);
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
      total += (cuts[i + 1] - cuts[i]) /
               (curve.g_tail(cuts[i]) * curve.g_tail(cuts[i + 1]));
    return total;
  }
  const auto breaks = curve.breakpoints();
  return numerics::integrate_split(
      [&](double t) {
        const double g = curve.g_tail(t);
        return 1.0 / (g * g);
      },
      0.0, p, breaks);
}

namespace {

double worst_seller_unchecked(const SurvivalCurve& curve, double g1, double p) {
  return g1 * (-curve.survival(p) * inverse_g_squared_integral(curve, p) +
               1.0 / curve.g_tail(p));
}

void require_normalized(const SurvivalCurve& curve, double beta) {
  const double s2 = solve_s2(curve, beta);
  if (std::abs(s2 - 1.0) > 1e-9)
    throw ValidationError("curve not normalized: s2 = " + format_g12(s2) +
                          " (expected 1)");
}

}  // namespace

double worst_seller_cdf(const SurvivalCurve& curve, double beta, double p) {
  require_normalized(curve, beta);
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("p must lie in [0,1]");
  return worst_seller_unchecked(curve, curve.g_tail(1.0), p);
}

ValueDistribution worst_seller_distribution(const SurvivalCurve& curve, double beta) {
  require_normalized(curve, beta);
  const double g1 = curve.g_tail(1.0);
  std::vector<double> breaks;
  for (double b : curve.breakpoints())
    if (b <= 1.0) breaks.push_back(b);

  std::function<double(double)> j_of = [curve](double p) {
    return inverse_g_squared_integral(curve, p);
  };
  if (!is_step(curve)) {
    // Running integral of G^-2 tabulated at nodes; a query integrates only
    // from the nearest node below.
    static constexpr int kNodes = 512;
    auto inv_g2 = [curve](double t) {
      const double g = curve.g_tail(t);
      return 1.0 / (g * g);
    };
    auto prefix = std::make_shared<std::vector<double>>(kNodes + 1, 0.0);
    for (int i = 0; i < kNodes; ++i)
      (*prefix)[i + 1] = (*prefix)[i] + numerics::integrate_split(
                                            inv_g2, double(i) / kNodes,
                                            double(i + 1) / kNodes, breaks);
    j_of = [prefix, inv_g2, breaks](double p) {
      const int i = std::clamp(static_cast<int>(p * kNodes), 0, kNodes);
      const double lo = double(i) / kNodes;
      if (p <= lo) return (*prefix)[i];
      return (*prefix)[i] + numerics::integrate_split(inv_g2, lo, p, breaks);
    };
  }
  auto cdf = [curve, g1, j_of](double p) {
    return g1 * (-curve.survival(p) * j_of(p) + 1.0 / curve.g_tail(p));
  };
  // int_0^p F = G(1) G(p) int_0^p G^-2: differentiating gives back F.
  auto cdf_integral = [curve, g1, j_of](double p) {
    return g1 * curve.g_tail(p) * j_of(p);
  };
  return ValueDistribution::tabulated(cdf, cdf_integral, 1.0, std::move(breaks));
}

TransitionRegion transition_region(const SurvivalCurve& curve) {
  if (is_step(curve)) {
    const auto grid = curve.grid();
    const auto values = curve.values();
    double z1 = grid.back(), z2 = grid.back();
    for (std::size_t i = 0; i < values.size(); ++i)
      if (values[i] < 1.0) {
        z1 = grid[i];
        break;
      }
    for (std::size_t i = 0; i < values.size(); ++i)
      if (values[i] <= 0.0) {
        z2 = grid[i];
        break;
      }
    return {z1, z2};
  }
  const double end = curve.support_end();
  if (std::isinf(end)) {
    // Exponential: H < 1 for every s > 0 and never reaches 0.
    return {0.0, std::numeric_limits<double>::infinity()};
  }
  auto boundary = [&](auto first_false) {
    double lo = 0.0, hi = end;
    if (!first_false(0.0)) return 0.0;
    for (int i = 0; i < 200; ++i) {
      const double mid = 0.5 * (lo + hi);
      if (mid == lo || mid == hi) break;
      (first_false(mid) ? lo : hi) = mid;
    }
    return hi;
  };
  const double z1 = boundary([&](double s) { return curve.survival(s) >= 1.0; });
  const double z2 = boundary([&](double s) { return curve.survival(s) > 0.0; });
  return {z1, z2};
}

double extremal_ode_residual(const SurvivalCurve& curve, double beta, double z) {
  const TransitionRegion region = transition_region(curve);
  if (!(z > region.z1 && z < region.z2))
    throw DomainError("z must lie strictly inside (z1, z2) = (" +
                      format_g12(region.z1) + ", " + format_g12(region.z2) + ")");
  const double s2 = solve_s2(curve, beta);

  double slope;
  if (auto d = curve.derivative(z)) {
    slope = *d;
  } else {
    double h = 1e-5;
    if (is_step(curve)) {
      const auto grid = curve.grid();
      auto it = std::upper_bound(grid.begin(), grid.end(), z);
      h = 0.5 * (*it - *(it - 1));
    }
    slope = (curve.survival(z + h) - curve.survival(std::max(0.0, z - h))) / (2.0 * h);
  }

  const double g = curve.g_tail(z);
  const double g_s2 = curve.g_tail(s2);
  const double upper = std::isinf(region.z2) ? curve.support_end() : region.z2;
  const double num = curve.g_sq_tail(z, upper) - curve.survival(z) * g - g_s2 * g_s2;
  const double den = g * g * g * inverse_g_squared_integral(curve, z);
  return slope - num / den;
}

}  // namespace tradecert
