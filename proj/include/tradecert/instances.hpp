#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "tradecert/distribution.hpp"
#include "tradecert/spec.hpp"
#include "tradecert/survival_curve.hpp"

namespace tradecert {

/// A buyer survival curve paired with a seller distribution.
struct TradeInstance {
  SurvivalCurve buyer;
  ValueDistribution seller;

  static TradeInstance from_specs(const DistributionSpec& buyer,
                                  const DistributionSpec& seller);
};

/// First-best welfare E[max(B, S)] = E[S] + E[G_B(S)]. Exact sums for discrete
/// sellers; otherwise E[G_B(S)] = tail + int H_B F_S by quadrature.
double opt_welfare(const TradeInstance& inst);

/// W1(p) = E[S] + F_S(p) G_B(p) + Pr[B >= p] int_0^p F_S: welfare of the
/// fixed price p when trade happens iff s <= p <= b.
double welfare_fixed_price(double p, const TradeInstance& inst);

struct PriceRatio {
  double price = 0.0;
  double ratio = 0.0;
  double welfare = 0.0;
  double opt = 0.0;
};

/// Grid search of W1(p) / OPT over `resolution` equally spaced prices on the
/// union of supports, plus every breakpoint and atom. A lower bound on the sup.
PriceRatio best_price_ratio(const TradeInstance& inst, int resolution);

/// The witness curve: H = 1 on [0, 0.25], 1 - lambda (1 - e^{1.5 - 6s}) on
/// (0.25, 0.6), 0 afterwards, lambda = 1 / (1 - e^{-2.1}); tail (1 - beta) / beta.
SurvivalCurve theorem8_curve(double beta = 0.7381);

struct UpperBoundReport {
  double beta = 0.0;
  double part1 = 0.0;  // mass on [0.6, 1]
  double part2 = 0.0;  // mass on [0.25, 0.6]
  double part3 = 0.0;  // mass on [0, 0.25]
  double total = 0.0;
};

/// Splits the price-measure mass of theorem8_curve(beta) into three parts.
/// part1 and part3 are closed forms; part2 uses quadrature.
UpperBoundReport verify_upper_bound(double beta = 0.7381);

/// A single-sample mechanism: maps the observed seller sample to a price
/// distribution.
class SampleMechanism {
 public:
  virtual ~SampleMechanism() = default;
  virtual std::string name() const = 0;
  /// False for mechanisms that can only be sampled.
  virtual bool has_quantile() const { return true; }
  /// inf{ t : Pr[price <= t] >= tau }, tau in (0, 1].
  virtual double quantile(double sample, double tau) const = 0;
  virtual double price(double sample, std::mt19937_64& rng) const = 0;
  virtual nlohmann::json to_json() const = 0;
};

/// Posts the observed sample.
std::unique_ptr<SampleMechanism> post_sample_mechanism();
/// Posts factor * sample.
std::unique_ptr<SampleMechanism> scaled_mechanism(double factor);
/// Posts sample * U with U uniform on [lo, hi].
std::unique_ptr<SampleMechanism> randomized_scale_mechanism(double lo, double hi);
/// Hides the quantile of `inner`, leaving sampling only.
std::unique_ptr<SampleMechanism> sampling_only(std::unique_ptr<SampleMechanism> inner);

/// {"type": "post_sample"} | {"type": "scaled", "factor": c} |
/// {"type": "randomized_scale", "lo": a, "hi": b} |
/// {"type": "sampling_only", "inner": {...}}.
std::unique_ptr<SampleMechanism> mechanism_from_json(const nlohmann::json& j);

/// Empirical tau-quantile of the price distribution from `draws` samples.
/// Deterministic for a given sample value.
double empirical_quantile(const SampleMechanism& mech, double sample, double tau,
                          int draws = 100000);

struct HardnessOptions {
  double s1 = 1.0;
  /// Abort when the sequence passes this value.
  double value_ceiling = 1e300;
  /// Cap on the buyer multiplier 2^n.
  double buyer_cap = 1e6;
};

struct HardnessInstance {
  TradeInstance instance;
  std::vector<double> sequence;
  double buyer_value = 0.0;  // asym only
  double high_value = 0.0;   // sym only: s_a
  double q = 0.0;
  /// Analytic bound: rejection probability (asym) or LOSS/OPT (sym).
  double bound = 0.0;
  /// Upper bound on the welfare ratio, 1 - bound, reached in the limit of an
  /// arbitrarily high top value (the capped instance only approaches it).
  double ratio_limit = 0.0;
  std::string sequence_csv() const;
};

/// Rejection bound (n - 1) / (2n) (1 - eps).
double asym_rejection_bound(int n, double eps);
/// Loss bound (n - 1) / (2n) (1 - eps) q^2 / (1 + q).
double sym_loss_bound(int n, double eps, double q);

/// Sequence s_1 < ... < s_n with Pr[price(s_k) < s_{k+1}] >= 1 - eps.
std::vector<double> hardness_sequence(const SampleMechanism& mech, int n, double eps,
                                      const HardnessOptions& opt);

/// Seller uniform on the sequence, buyer a point mass far above it.
HardnessInstance asym_hardness_instance(const SampleMechanism& mech, int n, double eps,
                                        const HardnessOptions& opt = {});

/// Common distribution for buyer and seller: q/n on each s_k and 1 - q on
/// s_a = s_n^2. The default s1 is raised to 1e6 so that s_a dominates.
HardnessInstance sym_hardness_instance(const SampleMechanism& mech, int n, double eps,
                                       double q, HardnessOptions opt = {.s1 = 1e6});

struct Estimate {
  double estimate = 0.0;
  double stderr_ = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  nlohmann::json to_json() const;
};

struct MonteCarloReport {
  std::uint64_t trials = 0;
  std::uint64_t seed = 0;
  std::uint64_t block_size = 0;
  double opt = 0.0;
  Estimate rejection;      // Pr[price < s]
  Estimate welfare_ratio;  // E[welfare] / OPT
  Estimate loss_ratio;     // 1 - welfare ratio
  nlohmann::json to_json() const;
};

/// Monte-Carlo run of the mechanism on the instance. Trials are split into
/// blocks of `block_size`, each with its own RNG stream seeded from
/// (seed, block index), and merged in block order: the report is identical
/// for any thread count. Throws DomainError when trials < 1000.
MonteCarloReport simulate_single_sample(const SampleMechanism& mech,
                                        const TradeInstance& inst, std::uint64_t trials,
                                        std::uint64_t seed, int threads = 1,
                                        std::uint64_t block_size = 1 << 16);

}  // namespace tradecert
