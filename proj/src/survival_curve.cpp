#include "tradecert/survival_curve.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "tradecert/errors.hpp"
#include "tradecert/numerics.hpp"

namespace tradecert {

std::string to_string(CurveKind kind) {
  switch (kind) {
    case CurveKind::step: return "step";
    case CurveKind::point_mass: return "point_mass";
    case CurveKind::exponential: return "exponential";
    case CurveKind::analytic_piecewise: return "analytic_piecewise";
  }
  return "unknown";
}

std::string format_g12(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

namespace {

void require_nonnegative(double s, const char* what) {
  if (!(s >= 0.0)) throw DomainError(std::string(what) + " must be >= 0");
}

void validate_tail(double tail) {
  if (!(tail >= 0.0) || !std::isfinite(tail))
    throw ValidationError("tail mass must be finite and >= 0");
}

}  // namespace

class SurvivalCurve::Rep {
 public:
  Rep(CurveKind kind, double tail) : kind_(kind), tail_(tail) {}
  virtual ~Rep() = default;

  CurveKind kind() const { return kind_; }
  double tail() const { return tail_; }

  virtual double h(double s) const = 0;
  /// lim_{t -> s-} H(t); 1 at s = 0.
  virtual double h_left(double s) const { return s <= 0.0 ? 1.0 : h(s); }
  /// Integral of H over [a, b], 0 <= a <= b.
  virtual double integral(double a, double b) const = 0;
  virtual double sq_integral(double a, double b) const = 0;
  virtual std::optional<double> derivative(double s) const = 0;
  virtual std::shared_ptr<const Rep> rescaled(double sigma) const = 0;
  virtual std::shared_ptr<const Rep> with_tail(double tail) const = 0;
  virtual double support_end() const = 0;
  virtual std::vector<double> breakpoints() const = 0;
  virtual double quantile(double u) const = 0;
  virtual std::span<const double> grid() const { return {}; }
  virtual std::span<const double> values() const { return {}; }

 private:
  CurveKind kind_;
  double tail_;
};

namespace {

class StepRep final : public SurvivalCurve::Rep {
 public:
  StepRep(CurveKind kind, std::vector<double> grid, std::vector<double> values,
          double tail)
      : Rep(kind, tail), grid_(std::move(grid)), values_(std::move(values)) {
    const std::size_t m = values_.size();
    area_right_.assign(m + 1, 0.0);
    sq_right_.assign(m + 1, 0.0);
    for (std::size_t i = m; i-- > 0;) {
      const double w = grid_[i + 1] - grid_[i];
      area_right_[i] = area_right_[i + 1] + values_[i] * w;
      sq_right_[i] = sq_right_[i + 1] + values_[i] * values_[i] * w;
    }
  }

  double h(double s) const override {
    if (values_.empty() || s >= grid_.back()) return 0.0;
    return values_[cell(s)];
  }
  double h_left(double s) const override {
    if (s <= grid_.front()) return 1.0;
    if (values_.empty() || s > grid_.back()) return 0.0;
    auto it = std::lower_bound(grid_.begin(), grid_.end(), s);
    return values_[static_cast<std::size_t>(it - grid_.begin()) - 1];
  }

  double integral(double a, double b) const override {
    return from(a, area_right_, false) - from(b, area_right_, false);
  }
  double sq_integral(double a, double b) const override {
    return from(a, sq_right_, true) - from(b, sq_right_, true);
  }

  std::optional<double> derivative(double) const override { return std::nullopt; }

  std::shared_ptr<const Rep> rescaled(double sigma) const override {
    std::vector<double> g(grid_);
    for (double& x : g) x /= sigma;
    return std::make_shared<StepRep>(kind(), std::move(g), values_, tail() / sigma);
  }
  std::shared_ptr<const Rep> with_tail(double t) const override {
    return std::make_shared<StepRep>(kind(), grid_, values_, t);
  }

  double support_end() const override { return grid_.back(); }
  std::vector<double> breakpoints() const override { return grid_; }

  double quantile(double u) const override {
    for (std::size_t i = 0; i < values_.size(); ++i)
      if (values_[i] <= u) return grid_[i];
    return grid_.back();
  }

  std::span<const double> grid() const override { return grid_; }
  std::span<const double> values() const override { return values_; }

 private:
  std::size_t cell(double s) const {
    auto it = std::upper_bound(grid_.begin(), grid_.end(), s);
    return static_cast<std::size_t>(it - grid_.begin()) - 1;
  }

  // Integral of H (or H^2) over [s, end of grid].
  double from(double s, const std::vector<double>& right, bool squared) const {
    if (values_.empty() || s >= grid_.back()) return 0.0;
    const std::size_t i = cell(s);
    const double v = squared ? values_[i] * values_[i] : values_[i];
    return right[i + 1] + (grid_[i + 1] - s) * v;
  }

  std::vector<double> grid_;
  std::vector<double> values_;
  std::vector<double> area_right_;
  std::vector<double> sq_right_;
};

class ExponentialRep final : public SurvivalCurve::Rep {
 public:
  ExponentialRep(double rate, double tail)
      : Rep(CurveKind::exponential, tail), rate_(rate) {}

  double h(double s) const override { return std::exp(-rate_ * s); }
  double integral(double a, double b) const override {
    if (std::isinf(b)) return std::exp(-rate_ * a) / rate_;
    return (std::exp(-rate_ * a) - std::exp(-rate_ * b)) / rate_;
  }
  double sq_integral(double a, double b) const override {
    const double r2 = 2.0 * rate_;
    if (std::isinf(b)) return std::exp(-r2 * a) / r2;
    return (std::exp(-r2 * a) - std::exp(-r2 * b)) / r2;
  }
  std::optional<double> derivative(double s) const override {
    return -rate_ * std::exp(-rate_ * s);
  }
  std::shared_ptr<const Rep> rescaled(double sigma) const override {
    return std::make_shared<ExponentialRep>(rate_ * sigma, tail() / sigma);
  }
  std::shared_ptr<const Rep> with_tail(double t) const override {
    return std::make_shared<ExponentialRep>(rate_, t);
  }
  double support_end() const override {
    return std::numeric_limits<double>::infinity();
  }
  std::vector<double> breakpoints() const override { return {0.0}; }
  double quantile(double u) const override {
    if (u <= 0.0) return std::numeric_limits<double>::infinity();
    return -std::log(u) / rate_;
  }

 private:
  double rate_;
};

class PiecewiseRep final : public SurvivalCurve::Rep {
 public:
  PiecewiseRep(std::vector<AnalyticPiece> pieces, double tail)
      : Rep(CurveKind::analytic_piecewise, tail), pieces_(std::move(pieces)) {}

  double h(double s) const override {
    const AnalyticPiece* p = find(s);
    return p ? p->h(s) : 0.0;
  }
  double h_left(double s) const override {
    if (s <= 0.0) return 1.0;
    for (const AnalyticPiece& p : pieces_)
      if (s > p.lo && s <= p.hi) return p.h(s == p.hi ? std::nextafter(s, p.lo) : s);
    return 0.0;
  }

  double integral(double a, double b) const override {
    return accumulate(a, b, false);
  }
  double sq_integral(double a, double b) const override {
    return accumulate(a, b, true);
  }

  std::optional<double> derivative(double s) const override {
    const AnalyticPiece* p = find(s);
    if (!p) return 0.0;
    if (p->derivative) return p->derivative(s);
    return std::nullopt;
  }

  std::shared_ptr<const Rep> rescaled(double sigma) const override {
    std::vector<AnalyticPiece> out;
    out.reserve(pieces_.size());
    for (const AnalyticPiece& p : pieces_) {
      AnalyticPiece q;
      q.lo = p.lo / sigma;
      q.hi = p.hi / sigma;
      q.h = [f = p.h, sigma](double s) { return f(sigma * s); };
      if (p.integral)
        q.integral = [f = p.integral, sigma](double a, double b) {
          return f(sigma * a, sigma * b) / sigma;
        };
      if (p.sq_integral)
        q.sq_integral = [f = p.sq_integral, sigma](double a, double b) {
          return f(sigma * a, sigma * b) / sigma;
        };
      if (p.derivative)
        q.derivative = [f = p.derivative, sigma](double s) {
          return sigma * f(sigma * s);
        };
      out.push_back(std::move(q));
    }
    return std::make_shared<PiecewiseRep>(std::move(out), tail() / sigma);
  }
  std::shared_ptr<const Rep> with_tail(double t) const override {
    return std::make_shared<PiecewiseRep>(pieces_, t);
  }

  double support_end() const override { return pieces_.back().hi; }

  std::vector<double> breakpoints() const override {
    std::vector<double> b{0.0};
    for (const AnalyticPiece& p : pieces_) b.push_back(p.hi);
    return b;
  }

  double quantile(double u) const override {
    // H is weakly decreasing: bisect the predicate H(s) <= u.
    double lo = 0.0, hi = support_end();
    if (h(0.0) <= u) return 0.0;
    for (int i = 0; i < 200 && hi - lo > 0.0; ++i) {
      const double mid = 0.5 * (lo + hi);
      if (mid == lo || mid == hi) break;
      (h(mid) <= u ? hi : lo) = mid;
    }
    return hi;
  }

 private:
  const AnalyticPiece* find(double s) const {
    for (const AnalyticPiece& p : pieces_)
      if (s >= p.lo && s < p.hi) return &p;
    return nullptr;
  }

  double accumulate(double a, double b, bool squared) const {
    double total = 0.0;
    for (const AnalyticPiece& p : pieces_) {
      const double lo = std::max(a, p.lo);
      const double hi = std::min(b, p.hi);
      if (!(hi > lo)) continue;
      const auto& closed = squared ? p.sq_integral : p.integral;
      if (closed) {
        total += closed(lo, hi);
      } else if (squared) {
        total += numerics::integrate(
            [&p](double t) { const double v = p.h(t); return v * v; }, lo, hi);
      } else {
        total += numerics::integrate(p.h, lo, hi);
      }
    }
    return total;
  }

  std::vector<AnalyticPiece> pieces_;
};

}  // namespace

SurvivalCurve::SurvivalCurve(std::shared_ptr<const Rep> rep) : rep_(std::move(rep)) {}

SurvivalCurve SurvivalCurve::step(std::vector<double> grid,
                                  std::vector<double> values, double tail_mass) {
  validate_tail(tail_mass);
  if (grid.empty() || grid.front() != 0.0)
    throw ValidationError("grid must start at 0");
  if (values.size() + 1 != grid.size())
    throw ValidationError("values must have one entry per grid cell");
  for (std::size_t i = 0; i + 1 < grid.size(); ++i)
    if (!(grid[i + 1] > grid[i]) || !std::isfinite(grid[i + 1]))
      throw ValidationError("grid not strictly increasing");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(values[i] >= 0.0 && values[i] <= 1.0))
      throw ValidationError("values not in [0,1]");
    if (i > 0 && values[i] > values[i - 1])
      throw ValidationError("values not weakly decreasing");
  }
  return SurvivalCurve(std::make_shared<StepRep>(CurveKind::step, std::move(grid),
                                                 std::move(values), tail_mass));
}

SurvivalCurve SurvivalCurve::point_mass(double value, double tail_mass) {
  validate_tail(tail_mass);
  if (!(value >= 0.0) || !std::isfinite(value))
    throw ValidationError("point value must be finite and >= 0");
  std::vector<double> grid{0.0};
  std::vector<double> values;
  if (value > 0.0) {
    grid.push_back(value);
    values.push_back(1.0);
  }
  return SurvivalCurve(std::make_shared<StepRep>(
      CurveKind::point_mass, std::move(grid), std::move(values), tail_mass));
}

SurvivalCurve SurvivalCurve::exponential(double rate, double tail_mass) {
  validate_tail(tail_mass);
  if (!(rate > 0.0) || !std::isfinite(rate))
    throw ValidationError("exponential rate must be > 0");
  return SurvivalCurve(std::make_shared<ExponentialRep>(rate, tail_mass));
}

SurvivalCurve SurvivalCurve::piecewise(std::vector<AnalyticPiece> pieces,
                                       double tail_mass) {
  validate_tail(tail_mass);
  if (pieces.empty()) throw ValidationError("piecewise curve needs a piece");
  if (pieces.front().lo != 0.0) throw ValidationError("grid must start at 0");
  double prev_end_value = 1.0;
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    const AnalyticPiece& p = pieces[i];
    if (!p.h) throw ValidationError("piece without survival function");
    if (!(p.hi > p.lo) || !std::isfinite(p.hi))
      throw ValidationError("grid not strictly increasing");
    if (i > 0 && p.lo != pieces[i - 1].hi)
      throw ValidationError("pieces not contiguous");
    // Sampled monotonicity check; closed interior sample points only.
    constexpr int kSamples = 64;
    double prev = prev_end_value;
    for (int j = 0; j < kSamples; ++j) {
      const double s = p.lo + (p.hi - p.lo) * j / kSamples;
      const double v = p.h(s);
      if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("values not in [0,1]");
      if (v > prev + 1e-12) throw ValidationError("values not weakly decreasing");
      prev = v;
    }
    prev_end_value = prev;
  }
  return SurvivalCurve(std::make_shared<PiecewiseRep>(std::move(pieces), tail_mass));
}

CurveKind SurvivalCurve::kind() const noexcept { return rep_->kind(); }
double SurvivalCurve::tail_mass() const noexcept { return rep_->tail(); }

double SurvivalCurve::survival(double s) const {
  require_nonnegative(s, "s");
  return rep_->h(s);
}

double SurvivalCurve::survival_left(double s) const {
  require_nonnegative(s, "s");
  return rep_->h_left(s);
}

double SurvivalCurve::g_tail(double s) const {
  require_nonnegative(s, "s");
  return rep_->integral(s, std::max(s, rep_->support_end())) + rep_->tail();
}

double SurvivalCurve::g_sq_tail(double s, double hi) const {
  require_nonnegative(s, "s");
  if (s > hi) throw DomainError("g_sq_tail requires s <= hi");
  return rep_->sq_integral(s, hi);
}

double SurvivalCurve::integral(double a, double b) const {
  require_nonnegative(a, "a");
  if (a > b) throw DomainError("integral requires a <= b");
  return rep_->integral(a, b);
}

std::optional<double> SurvivalCurve::derivative(double s) const {
  require_nonnegative(s, "s");
  return rep_->derivative(s);
}

SurvivalCurve SurvivalCurve::rescale(double sigma) const {
  if (!(sigma > 0.0) || !std::isfinite(sigma))
    throw DomainError("rescale factor must be > 0");
  return SurvivalCurve(rep_->rescaled(sigma));
}

SurvivalCurve SurvivalCurve::with_tail_mass(double tail_mass) const {
  validate_tail(tail_mass);
  return SurvivalCurve(rep_->with_tail(tail_mass));
}

double SurvivalCurve::support_end() const noexcept { return rep_->support_end(); }
std::vector<double> SurvivalCurve::breakpoints() const { return rep_->breakpoints(); }
std::span<const double> SurvivalCurve::grid() const noexcept { return rep_->grid(); }
std::span<const double> SurvivalCurve::values() const noexcept { return rep_->values(); }

double SurvivalCurve::value_at_quantile(double u) const {
  if (!(u >= 0.0 && u < 1.0)) throw DomainError("quantile level must be in [0,1)");
  return rep_->quantile(u);
}

std::string curve_csv(const SurvivalCurve& curve, double lo, double hi, int points) {
  if (points < 2) throw DomainError("need at least two CSV points");
  std::ostringstream out;
  out << "s,H,G\n";
  for (int i = 0; i < points; ++i) {
    const double s = lo + (hi - lo) * i / (points - 1);
    out << format_g12(s) << ',' << format_g12(curve.survival(s)) << ','
        << format_g12(curve.g_tail(s)) << '\n';
  }
  return out.str();
}

}  // namespace tradecert
