#pragma once

#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "tradecert/survival_curve.hpp"

namespace tradecert {

struct Atom {
  double value = 0.0;
  double prob = 0.0;
};

/// A value distribution on [0, inf) described by its CDF. Used for the seller
/// side and for sampling in simulations; the buyer side of welfare formulas
/// uses SurvivalCurve.
class ValueDistribution {
 public:
  /// Atoms are merged by value and sorted; probabilities must sum to 1.
  static ValueDistribution discrete(std::vector<Atom> atoms);
  static ValueDistribution point(double value);
  static ValueDistribution uniform(double lo, double hi);
  static ValueDistribution exponential(double rate);
  /// Distribution on [0, upper] given by its CDF and the running integral of
  /// the CDF. Any mass missing at upper^- sits as an atom at `upper`.
  static ValueDistribution tabulated(std::function<double(double)> cdf,
                                     std::function<double(double)> cdf_integral,
                                     double upper, std::vector<double> breakpoints);

  /// Pr[S <= p].
  double cdf(double p) const;
  /// Integral of the CDF over [0, p].
  double cdf_integral(double p) const;
  double mean() const;
  /// inf{ t : cdf(t) >= tau }, tau in (0, 1].
  double quantile(double tau) const;
  double sample(std::mt19937_64& rng) const;

  /// Right end of the support (+inf for exponential).
  double upper() const;
  std::vector<double> breakpoints() const;
  /// Non-null for discrete distributions.
  const std::vector<Atom>* atoms() const;

  /// Survival curve H(s) = 1 - cdf(s) of the same distribution (tail 0).
  SurvivalCurve survival_curve() const;

  class Rep;

 private:
  explicit ValueDistribution(std::shared_ptr<const Rep> rep);
  std::shared_ptr<const Rep> rep_;
};

}  // namespace tradecert
