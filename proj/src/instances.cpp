#include "tradecert/instances.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>

#include "parallel.hpp"
#include "tradecert/errors.hpp"
#include "tradecert/numerics.hpp"
#include "tradecert/price_measure.hpp"
#include "tradecert/version.hpp"

namespace tradecert {

TradeInstance TradeInstance::from_specs(const DistributionSpec& buyer,
                                        const DistributionSpec& seller) {
  return {buyer.to_curve(), seller.to_distribution()};
}

namespace {

// Right end beyond which H_B is numerically zero.
double buyer_upper(const SurvivalCurve& buyer) {
  const double end = buyer.support_end();
  if (std::isfinite(end)) return end;
  double s = 1.0;
  for (int i = 0; i < 200 && buyer.survival(s) > 1e-18; ++i) s *= 2.0;
  return s;
}

std::vector<double> merged_breaks(const TradeInstance& inst) {
  std::vector<double> b = inst.buyer.breakpoints();
  const auto sb = inst.seller.breakpoints();
  b.insert(b.end(), sb.begin(), sb.end());
  std::sort(b.begin(), b.end());
  b.erase(std::unique(b.begin(), b.end()), b.end());
  return b;
}

}  // namespace

double opt_welfare(const TradeInstance& inst) {
  const double mean_s = inst.seller.mean();
  if (!std::isfinite(mean_s)) throw DomainError("seller mean is not finite");
  if (!std::isfinite(inst.buyer.g_tail(0.0))) throw DomainError("buyer mean is not finite");

  if (const auto* atoms = inst.seller.atoms()) {
    double eg = 0.0;
    for (const Atom& a : *atoms) eg += a.prob * inst.buyer.g_tail(a.value);
    return mean_s + eg;
  }
  // E[G_B(S)] = G_B(inf) + int_0^inf H_B F_S.
  const auto breaks = merged_breaks(inst);
  const double integral = numerics::integrate_split(
      [&](double s) { return inst.buyer.survival(s) * inst.seller.cdf(s); }, 0.0,
      buyer_upper(inst.buyer), breaks, 1e-11);
  return mean_s + inst.buyer.tail_mass() + integral;
}

double welfare_fixed_price(double p, const TradeInstance& inst) {
  if (!(p >= 0.0)) throw DomainError("price must be >= 0");
  return inst.seller.mean() + inst.seller.cdf(p) * inst.buyer.g_tail(p) +
         inst.buyer.survival_left(p) * inst.seller.cdf_integral(p);
}

PriceRatio best_price_ratio(const TradeInstance& inst, int resolution) {
  if (resolution < 100) throw DomainError("price grid resolution must be >= 100");
  double hi = 0.0;
  const double su = inst.seller.upper();
  hi = std::max(hi, std::isfinite(su) ? su : inst.seller.quantile(1.0 - 1e-9));
  const double bu = inst.buyer.support_end();
  hi = std::max(hi, std::isfinite(bu) ? bu : inst.buyer.value_at_quantile(1e-9));
  if (!(hi > 0.0)) hi = 1.0;

  std::vector<double> prices;
  prices.reserve(resolution);
  for (int i = 0; i < resolution; ++i) prices.push_back(hi * i / (resolution - 1));
  for (double b : merged_breaks(inst))
    if (b >= 0.0 && b <= hi) prices.push_back(b);
  std::sort(prices.begin(), prices.end());
  prices.erase(std::unique(prices.begin(), prices.end()), prices.end());

  PriceRatio best;
  best.opt = opt_welfare(inst);
  best.welfare = -std::numeric_limits<double>::infinity();
  for (double p : prices) {
    const double w = welfare_fixed_price(p, inst);
    if (w > best.welfare) {
      best.welfare = w;
      best.price = p;
    }
  }
  best.ratio = best.welfare / best.opt;
  return best;
}

SurvivalCurve theorem8_curve(double beta) {
  if (!(beta > 0.0 && beta < 1.0)) throw DomainError("beta must lie in (0,1)");
  const double lambda = 1.0 / (1.0 - std::exp(-2.1));
  auto e = [](double s) { return std::exp(1.5 - 6.0 * s); };

  AnalyticPiece flat;
  flat.lo = 0.0;
  flat.hi = 0.25;
  flat.h = [](double) { return 1.0; };
  flat.integral = [](double a, double b) { return b - a; };
  flat.sq_integral = [](double a, double b) { return b - a; };
  flat.derivative = [](double) { return 0.0; };

  AnalyticPiece decay;
  decay.lo = 0.25;
  decay.hi = 0.6;
  const double c = 1.0 - lambda;
  decay.h = [=](double s) { return c + lambda * e(s); };
  decay.integral = [=](double a, double b) {
    return c * (b - a) + lambda / 6.0 * (e(a) - e(b));
  };
  decay.sq_integral = [=](double a, double b) {
    const double ea = e(a), eb = e(b);
    return c * c * (b - a) + c * lambda / 3.0 * (ea - eb) +
           lambda * lambda / 12.0 * (ea * ea - eb * eb);
  };
  decay.derivative = [=](double s) { return -6.0 * lambda * e(s); };

  return SurvivalCurve::piecewise({flat, decay}, (1.0 - beta) / beta);
}

UpperBoundReport verify_upper_bound(double beta) {
  const SurvivalCurve curve = theorem8_curve(beta);
  const PriceMeasure measure(curve, beta);
  const double g1 = curve.g_tail(1.0);
  const double g25 = curve.g_tail(0.25);

  UpperBoundReport r;
  r.beta = beta;
  r.part1 = 0.4 * beta;
  r.part2 = numerics::integrate([&](double s) { return measure.density(s); }, 0.25, 0.6,
                                1e-10);
  const double a = beta * (g25 - curve.g_sq_tail(0.25, 1.0)) + (1.0 - beta) * g1;
  r.part3 = 0.25 * a / (g25 * (0.25 + g25));
  r.total = r.part1 + r.part2 + r.part3;
  return r;
}

// ---------------------------------------------------------------------------

namespace {

void check_tau(double tau) {
  if (!(tau > 0.0 && tau <= 1.0)) throw DomainError("tau must lie in (0,1]");
}

double unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

class PostSample final : public SampleMechanism {
 public:
  std::string name() const override { return "post-sample"; }
  double quantile(double sample, double tau) const override {
    check_tau(tau);
    return sample;
  }
  double price(double sample, std::mt19937_64&) const override { return sample; }
  nlohmann::json to_json() const override { return {{"type", "post_sample"}}; }
};

class Scaled final : public SampleMechanism {
 public:
  explicit Scaled(double factor) : factor_(factor) {
    if (!(factor > 0.0) || !std::isfinite(factor))
      throw ValidationError("scale factor must be positive and finite");
  }
  std::string name() const override { return "scaled"; }
  double quantile(double sample, double tau) const override {
    check_tau(tau);
    return factor_ * sample;
  }
  double price(double sample, std::mt19937_64&) const override { return factor_ * sample; }
  nlohmann::json to_json() const override {
    return {{"type", "scaled"}, {"factor", factor_}};
  }

 private:
  double factor_;
};

class RandomizedScale final : public SampleMechanism {
 public:
  RandomizedScale(double lo, double hi) : lo_(lo), hi_(hi) {
    if (!(lo >= 0.0 && lo < hi) || !std::isfinite(hi))
      throw ValidationError("randomized scale needs 0 <= lo < hi");
  }
  std::string name() const override { return "randomized-scale"; }
  double quantile(double sample, double tau) const override {
    check_tau(tau);
    return sample * (lo_ + tau * (hi_ - lo_));
  }
  double price(double sample, std::mt19937_64& rng) const override {
    return sample * (lo_ + unit(rng) * (hi_ - lo_));
  }
  nlohmann::json to_json() const override {
    return {{"type", "randomized_scale"}, {"lo", lo_}, {"hi", hi_}};
  }

 private:
  double lo_, hi_;
};

class SamplingOnly final : public SampleMechanism {
 public:
  explicit SamplingOnly(std::unique_ptr<SampleMechanism> inner) : inner_(std::move(inner)) {}
  std::string name() const override { return "sampling-only(" + inner_->name() + ")"; }
  bool has_quantile() const override { return false; }
  double quantile(double, double) const override {
    throw DomainError("mechanism exposes no quantile; use empirical_quantile");
  }
  double price(double sample, std::mt19937_64& rng) const override {
    return inner_->price(sample, rng);
  }
  nlohmann::json to_json() const override {
    return {{"type", "sampling_only"}, {"inner", inner_->to_json()}};
  }

 private:
  std::unique_ptr<SampleMechanism> inner_;
};

double number(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_number())
    throw ValidationError(std::string("mechanism field '") + key + "' missing or not a number");
  return it->get<double>();
}

}  // namespace

std::unique_ptr<SampleMechanism> post_sample_mechanism() {
  return std::make_unique<PostSample>();
}

std::unique_ptr<SampleMechanism> scaled_mechanism(double factor) {
  return std::make_unique<Scaled>(factor);
}

std::unique_ptr<SampleMechanism> randomized_scale_mechanism(double lo, double hi) {
  return std::make_unique<RandomizedScale>(lo, hi);
}

std::unique_ptr<SampleMechanism> sampling_only(std::unique_ptr<SampleMechanism> inner) {
  return std::make_unique<SamplingOnly>(std::move(inner));
}

std::unique_ptr<SampleMechanism> mechanism_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string())
    throw ValidationError("mechanism spec must be an object with a 'type' string");
  const std::string type = j["type"].get<std::string>();
  if (type == "post_sample") return post_sample_mechanism();
  if (type == "scaled") return scaled_mechanism(number(j, "factor"));
  if (type == "randomized_scale")
    return randomized_scale_mechanism(number(j, "lo"), number(j, "hi"));
  if (type == "sampling_only") {
    if (!j.contains("inner")) throw ValidationError("sampling_only needs 'inner'");
    return sampling_only(mechanism_from_json(j["inner"]));
  }
  throw ValidationError("unknown mechanism type '" + type + "'");
}

double empirical_quantile(const SampleMechanism& mech, double sample, double tau,
                          int draws) {
  check_tau(tau);
  if (draws < 1) throw DomainError("draws must be >= 1");
  std::uint64_t bits = 0;
  std::memcpy(&bits, &sample, sizeof bits);
  std::seed_seq seq{0x5eedu, static_cast<unsigned>(bits), static_cast<unsigned>(bits >> 32)};
  std::mt19937_64 rng(seq);
  std::vector<double> prices(draws);
  for (double& p : prices) p = mech.price(sample, rng);
  const auto idx = static_cast<std::size_t>(
      std::clamp<double>(std::ceil(tau * draws) - 1.0, 0.0, draws - 1.0));
  std::nth_element(prices.begin(), prices.begin() + idx, prices.end());
  return prices[idx];
}

double asym_rejection_bound(int n, double eps) {
  if (n < 1) throw DomainError("n must be >= 1");
  if (!(eps >= 0.0 && eps < 1.0)) throw DomainError("eps must lie in [0,1)");
  return (n - 1.0) / (2.0 * n) * (1.0 - eps);
}

double sym_loss_bound(int n, double eps, double q) {
  if (!(q >= 0.0 && q <= 1.0)) throw DomainError("q must lie in [0,1]");
  return asym_rejection_bound(n, eps) * q * q / (1.0 + q);
}

std::vector<double> hardness_sequence(const SampleMechanism& mech, int n, double eps,
                                      const HardnessOptions& opt) {
  if (n < 2) throw DomainError("n must be >= 2");
  if (!(eps > 0.0 && eps < 1.0)) throw DomainError("eps must lie in (0,1)");
  if (!(opt.s1 > 0.0) || !std::isfinite(opt.s1)) throw DomainError("s1 must be positive");
  auto bump = [](double v) {
    const double ulp = std::nextafter(v, std::numeric_limits<double>::infinity()) - v;
    return v + std::max(ulp, 1e-12 * v);
  };
  std::vector<double> seq{opt.s1};
  for (int k = 1; k < n; ++k) {
    const double s = seq.back();
    // Any point strictly above the (1 - eps)-quantile is passed by the price
    // with probability at least 1 - eps, atoms included.
    const double q = mech.has_quantile() ? mech.quantile(s, 1.0 - eps)
                                         : empirical_quantile(mech, s, 1.0 - eps / 2.0);
    const double next = bump(std::max(q, s));
    if (!std::isfinite(next) || next > opt.value_ceiling)
      throw DomainError("hardness sequence exceeds the value ceiling at k = " +
                        std::to_string(k + 1));
    seq.push_back(next);
  }
  return seq;
}

std::string HardnessInstance::sequence_csv() const {
  std::ostringstream out;
  out << "k,s_k\n";
  for (std::size_t i = 0; i < sequence.size(); ++i)
    out << (i + 1) << ',' << format_g12(sequence[i]) << '\n';
  return out.str();
}

HardnessInstance asym_hardness_instance(const SampleMechanism& mech, int n, double eps,
                                        const HardnessOptions& opt) {
  HardnessInstance h{TradeInstance{SurvivalCurve::point_mass(1.0),
                                   ValueDistribution::point(1.0)},
                     {}, 0.0, 0.0, 0.0, 0.0, 0.0};
  h.sequence = hardness_sequence(mech, n, eps, opt);
  const double multiplier = std::min(std::pow(2.0, n), opt.buyer_cap);
  h.buyer_value = h.sequence.back() * multiplier;
  if (!std::isfinite(h.buyer_value) || h.buyer_value > opt.value_ceiling)
    throw DomainError("buyer value exceeds the value ceiling");
  std::vector<Atom> atoms;
  for (double s : h.sequence) atoms.push_back({s, 1.0 / n});
  h.instance = {SurvivalCurve::point_mass(h.buyer_value),
                ValueDistribution::discrete(std::move(atoms))};
  h.bound = asym_rejection_bound(n, eps);
  h.ratio_limit = 1.0 - h.bound;
  return h;
}

HardnessInstance sym_hardness_instance(const SampleMechanism& mech, int n, double eps,
                                       double q, HardnessOptions opt) {
  if (!(q > 0.0 && q < 1.0)) throw DomainError("q must lie in (0,1)");
  HardnessInstance h{TradeInstance{SurvivalCurve::point_mass(1.0),
                                   ValueDistribution::point(1.0)},
                     {}, 0.0, 0.0, q, 0.0, 0.0};
  h.sequence = hardness_sequence(mech, n, eps, opt);
  const double sn = h.sequence.back();
  h.high_value = sn * sn;
  if (!std::isfinite(h.high_value) || h.high_value > opt.value_ceiling)
    throw DomainError("s_a = s_n^2 exceeds the value ceiling");
  if (!(h.high_value > sn)) throw DomainError("s_a must exceed s_n; raise s1 above 1");
  std::vector<Atom> atoms;
  for (double s : h.sequence) atoms.push_back({s, q / n});
  atoms.push_back({h.high_value, 1.0 - q});
  const ValueDistribution common = ValueDistribution::discrete(std::move(atoms));
  h.instance = {common.survival_curve(), common};
  h.bound = sym_loss_bound(n, eps, q);
  h.ratio_limit = 1.0 - h.bound;
  return h;
}

// ---------------------------------------------------------------------------

nlohmann::json Estimate::to_json() const {
  return {{"estimate", estimate}, {"stderr", stderr_}, {"ci95", {ci_lo, ci_hi}}};
}

nlohmann::json MonteCarloReport::to_json() const {
  return {{"schema_version", kSchemaVersion},
          {"trials", trials},
          {"seed", seed},
          {"block_size", block_size},
          {"opt", opt},
          {"rejection", rejection.to_json()},
          {"welfare_ratio", welfare_ratio.to_json()},
          {"loss_ratio", loss_ratio.to_json()}};
}

namespace {

struct BlockStats {
  std::uint64_t count = 0;
  std::uint64_t rejections = 0;
  double mean = 0.0;  // welfare
  double m2 = 0.0;

  void add(double w) {
    ++count;
    const double d = w - mean;
    mean += d / count;
    m2 += d * (w - mean);
  }
  void merge(const BlockStats& o) {
    if (o.count == 0) return;
    const double total = static_cast<double>(count + o.count);
    const double d = o.mean - mean;
    mean += d * o.count / total;
    m2 += o.m2 + d * d * (static_cast<double>(count) * o.count / total);
    count += o.count;
    rejections += o.rejections;
  }
};

Estimate make_estimate(double est, double se) {
  return {est, se, est - 1.96 * se, est + 1.96 * se};
}

}  // namespace

MonteCarloReport simulate_single_sample(const SampleMechanism& mech,
                                        const TradeInstance& inst, std::uint64_t trials,
                                        std::uint64_t seed, int threads,
                                        std::uint64_t block_size) {
  if (trials < 1000) throw DomainError("trials below minimum (1000)");
  if (threads < 1) throw DomainError("threads must be >= 1");
  if (block_size < 1) throw DomainError("block size must be >= 1");

  const std::uint64_t blocks = (trials + block_size - 1) / block_size;
  std::vector<BlockStats> stats(blocks);
  detail::parallel_for(static_cast<std::int64_t>(blocks), threads, [&](std::int64_t b) {
    std::seed_seq seq{static_cast<unsigned>(seed), static_cast<unsigned>(seed >> 32),
                      static_cast<unsigned>(b), static_cast<unsigned>(b >> 32)};
    std::mt19937_64 rng(seq);
    const std::uint64_t begin = static_cast<std::uint64_t>(b) * block_size;
    const std::uint64_t end = std::min(trials, begin + block_size);
    BlockStats& st = stats[b];
    for (std::uint64_t t = begin; t < end; ++t) {
      const double s = inst.seller.sample(rng);
      const double v = inst.buyer.value_at_quantile(unit(rng));
      const double observed = inst.seller.sample(rng);
      const double p = mech.price(observed, rng);
      if (p < s) ++st.rejections;
      const bool trade = s <= p && p <= v;
      st.add(trade ? v : s);
    }
  });
  BlockStats total;
  for (const BlockStats& st : stats) total.merge(st);

  MonteCarloReport r;
  r.trials = trials;
  r.seed = seed;
  r.block_size = block_size;
  r.opt = opt_welfare(inst);
  const double n = static_cast<double>(total.count);
  const double rej = total.rejections / n;
  r.rejection = make_estimate(rej, std::sqrt(rej * (1.0 - rej) / n));
  const double se_w = std::sqrt(total.m2 / (n - 1.0) / n) / r.opt;
  r.welfare_ratio = make_estimate(total.mean / r.opt, se_w);
  r.loss_ratio = make_estimate(1.0 - total.mean / r.opt, se_w);
  return r;
}

}  // namespace tradecert
