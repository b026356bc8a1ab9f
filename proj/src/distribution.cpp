#include "tradecert/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tradecert/errors.hpp"

namespace tradecert {

class ValueDistribution::Rep {
 public:
  virtual ~Rep() = default;
  virtual double cdf(double p) const = 0;
  virtual double cdf_integral(double p) const = 0;
  virtual double mean() const = 0;
  virtual double quantile(double tau) const = 0;
  virtual double upper() const = 0;
  virtual std::vector<double> breakpoints() const = 0;
  virtual const std::vector<Atom>* atoms() const { return nullptr; }
  virtual SurvivalCurve survival_curve() const = 0;
};

namespace {

class DiscreteRep final : public ValueDistribution::Rep {
 public:
  explicit DiscreteRep(std::vector<Atom> atoms) : atoms_(std::move(atoms)) {
    double c = 0.0;
    for (const Atom& a : atoms_) {
      c += a.prob;
      cum_.push_back(c);
    }
    cum_.back() = 1.0;
  }

  double cdf(double p) const override {
    auto it = std::upper_bound(atoms_.begin(), atoms_.end(), p,
                               [](double x, const Atom& a) { return x < a.value; });
    if (it == atoms_.begin()) return 0.0;
    return cum_[static_cast<std::size_t>(it - atoms_.begin()) - 1];
  }

  double cdf_integral(double p) const override {
    double total = 0.0;
    for (const Atom& a : atoms_) {
      if (a.value > p) break;
      total += a.prob * (p - a.value);
    }
    return total;
  }

  double mean() const override {
    double m = 0.0;
    for (const Atom& a : atoms_) m += a.prob * a.value;
    return m;
  }

  double quantile(double tau) const override {
    auto it = std::lower_bound(cum_.begin(), cum_.end(), tau);
    if (it == cum_.end()) return atoms_.back().value;
    return atoms_[static_cast<std::size_t>(it - cum_.begin())].value;
  }

  double upper() const override { return atoms_.back().value; }

  std::vector<double> breakpoints() const override {
    std::vector<double> b;
    for (const Atom& a : atoms_) b.push_back(a.value);
    return b;
  }

  const std::vector<Atom>* atoms() const override { return &atoms_; }

  SurvivalCurve survival_curve() const override {
    std::vector<double> grid{0.0};
    for (const Atom& a : atoms_)
      if (a.value > 0.0) grid.push_back(a.value);
    std::vector<double> values;
    double prev = 1.0;
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
      // Pr[b > grid[i]], clamped against rounding in the cumulative sums.
      double v = std::clamp(1.0 - cdf(grid[i]), 0.0, prev);
      values.push_back(v);
      prev = v;
    }
    return SurvivalCurve::step(std::move(grid), std::move(values));
  }

 private:
  std::vector<Atom> atoms_;
  std::vector<double> cum_;
};

class UniformRep final : public ValueDistribution::Rep {
 public:
  UniformRep(double lo, double hi) : lo_(lo), hi_(hi) {}

  double cdf(double p) const override {
    return std::clamp((p - lo_) / (hi_ - lo_), 0.0, 1.0);
  }
  double cdf_integral(double p) const override {
    if (p <= lo_) return 0.0;
    const double w = hi_ - lo_;
    if (p < hi_) return (p - lo_) * (p - lo_) / (2.0 * w);
    return 0.5 * w + (p - hi_);
  }
  double mean() const override { return 0.5 * (lo_ + hi_); }
  double quantile(double tau) const override { return lo_ + tau * (hi_ - lo_); }
  double upper() const override { return hi_; }
  std::vector<double> breakpoints() const override { return {lo_, hi_}; }

  SurvivalCurve survival_curve() const override {
    std::vector<AnalyticPiece> pieces;
    if (lo_ > 0.0) {
      AnalyticPiece flat;
      flat.lo = 0.0;
      flat.hi = lo_;
      flat.h = [](double) { return 1.0; };
      flat.integral = [](double a, double b) { return b - a; };
      flat.sq_integral = [](double a, double b) { return b - a; };
      flat.derivative = [](double) { return 0.0; };
      pieces.push_back(std::move(flat));
    }
    const double lo = lo_, hi = hi_, w = hi_ - lo_;
    AnalyticPiece ramp;
    ramp.lo = lo;
    ramp.hi = hi;
    ramp.h = [hi, w](double s) { return (hi - s) / w; };
    ramp.integral = [hi, w](double a, double b) {
      return ((hi - a) * (hi - a) - (hi - b) * (hi - b)) / (2.0 * w);
    };
    ramp.sq_integral = [hi, w](double a, double b) {
      const double ua = hi - a, ub = hi - b;
      return (ua * ua * ua - ub * ub * ub) / (3.0 * w * w);
    };
    ramp.derivative = [w](double) { return -1.0 / w; };
    pieces.push_back(std::move(ramp));
    return SurvivalCurve::piecewise(std::move(pieces));
  }

 private:
  double lo_, hi_;
};

class ExponentialRep final : public ValueDistribution::Rep {
 public:
  explicit ExponentialRep(double rate) : rate_(rate) {}

  double cdf(double p) const override {
    return p <= 0.0 ? 0.0 : -std::expm1(-rate_ * p);
  }
  double cdf_integral(double p) const override {
    if (p <= 0.0) return 0.0;
    return p + std::expm1(-rate_ * p) / rate_;
  }
  double mean() const override { return 1.0 / rate_; }
  double quantile(double tau) const override {
    if (tau >= 1.0) return std::numeric_limits<double>::infinity();
    return -std::log1p(-tau) / rate_;
  }
  double upper() const override { return std::numeric_limits<double>::infinity(); }
  std::vector<double> breakpoints() const override { return {0.0}; }
  SurvivalCurve survival_curve() const override {
    return SurvivalCurve::exponential(rate_);
  }

 private:
  double rate_;
};

class TabulatedRep final : public ValueDistribution::Rep {
 public:
  TabulatedRep(std::function<double(double)> cdf,
               std::function<double(double)> cdf_integral, double upper,
               std::vector<double> breakpoints)
      : cdf_(std::move(cdf)),
        cdf_integral_(std::move(cdf_integral)),
        upper_(upper),
        breakpoints_(std::move(breakpoints)),
        mean_(upper_ - cdf_integral_(upper_)) {}

  double cdf(double p) const override {
    if (p < 0.0) return 0.0;
    if (p >= upper_) return 1.0;
    return cdf_(p);
  }
  double cdf_integral(double p) const override {
    if (p <= 0.0) return 0.0;
    if (p <= upper_) return cdf_integral_(p);
    return cdf_integral_(upper_) + (p - upper_);
  }
  double mean() const override { return mean_; }

  double quantile(double tau) const override {
    if (cdf(0.0) >= tau) return 0.0;
    double lo = 0.0, hi = upper_;
    for (int i = 0; i < 200; ++i) {
      const double mid = 0.5 * (lo + hi);
      if (mid == lo || mid == hi) break;
      (cdf(mid) >= tau ? hi : lo) = mid;
    }
    return hi;
  }

  double upper() const override { return upper_; }
  std::vector<double> breakpoints() const override { return breakpoints_; }

  SurvivalCurve survival_curve() const override {
    AnalyticPiece p;
    p.lo = 0.0;
    p.hi = upper_;
    p.h = [f = cdf_](double s) { return std::clamp(1.0 - f(s), 0.0, 1.0); };
    p.integral = [f = cdf_integral_](double a, double b) {
      return (b - a) - (f(b) - f(a));
    };
    return SurvivalCurve::piecewise({std::move(p)});
  }

 private:
  std::function<double(double)> cdf_;
  std::function<double(double)> cdf_integral_;
  double upper_;
  std::vector<double> breakpoints_;
  double mean_;
};

}  // namespace

ValueDistribution::ValueDistribution(std::shared_ptr<const Rep> rep)
    : rep_(std::move(rep)) {}

ValueDistribution ValueDistribution::discrete(std::vector<Atom> atoms) {
  if (atoms.empty()) throw ValidationError("discrete distribution needs atoms");
  double total = 0.0;
  for (const Atom& a : atoms) {
    if (!(a.value >= 0.0) || !std::isfinite(a.value))
      throw ValidationError("atom values must be finite and >= 0");
    if (!(a.prob >= 0.0)) throw ValidationError("atom probabilities must be >= 0");
    total += a.prob;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw ValidationError("probabilities do not sum to 1");
  std::sort(atoms.begin(), atoms.end(),
            [](const Atom& a, const Atom& b) { return a.value < b.value; });
  std::vector<Atom> merged;
  for (const Atom& a : atoms) {
    if (a.prob == 0.0) continue;
    if (!merged.empty() && merged.back().value == a.value)
      merged.back().prob += a.prob;
    else
      merged.push_back(a);
  }
  return ValueDistribution(std::make_shared<DiscreteRep>(std::move(merged)));
}

ValueDistribution ValueDistribution::point(double value) {
  return discrete({{value, 1.0}});
}

ValueDistribution ValueDistribution::uniform(double lo, double hi) {
  if (!(lo >= 0.0) || !(hi > lo) || !std::isfinite(hi))
    throw ValidationError("uniform requires 0 <= lo < hi");
  return ValueDistribution(std::make_shared<UniformRep>(lo, hi));
}

ValueDistribution ValueDistribution::exponential(double rate) {
  if (!(rate > 0.0) || !std::isfinite(rate))
    throw ValidationError("exponential rate must be > 0");
  return ValueDistribution(std::make_shared<ExponentialRep>(rate));
}

ValueDistribution ValueDistribution::tabulated(
    std::function<double(double)> cdf, std::function<double(double)> cdf_integral,
    double upper, std::vector<double> breakpoints) {
  if (!(upper > 0.0) || !std::isfinite(upper))
    throw ValidationError("tabulated distribution needs a finite upper end");
  return ValueDistribution(std::make_shared<TabulatedRep>(
      std::move(cdf), std::move(cdf_integral), upper, std::move(breakpoints)));
}

double ValueDistribution::cdf(double p) const { return rep_->cdf(p); }
double ValueDistribution::cdf_integral(double p) const { return rep_->cdf_integral(p); }
double ValueDistribution::mean() const { return rep_->mean(); }

double ValueDistribution::quantile(double tau) const {
  if (!(tau > 0.0 && tau <= 1.0)) throw DomainError("quantile level must be in (0,1]");
  return rep_->quantile(tau);
}

double ValueDistribution::sample(std::mt19937_64& rng) const {
  // 53-bit uniform in (0, 1].
  const double u = (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;
  return rep_->quantile(u);
}

double ValueDistribution::upper() const { return rep_->upper(); }
std::vector<double> ValueDistribution::breakpoints() const { return rep_->breakpoints(); }
const std::vector<Atom>* ValueDistribution::atoms() const { return rep_->atoms(); }
SurvivalCurve ValueDistribution::survival_curve() const { return rep_->survival_curve(); }

}  // namespace tradecert
