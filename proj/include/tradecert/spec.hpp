#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "tradecert/distribution.hpp"
#include "tradecert/survival_curve.hpp"

namespace tradecert {

/// Textual description of a value distribution, e.g.
///   {"type":"point","value":1.0}
///   {"type":"uniform","lo":0,"hi":1}
///   {"type":"exponential","rate":1}
///   {"type":"discrete","atoms":[[0.2,0.5],[0.6,0.5]]}
///   {"type":"step_survival","grid":[0,0.5,1],"values":[1,0.5],"tail":0.2}
/// Every type accepts an optional "tail" (buyer-side tail mass, default 0).
struct DistributionSpec {
  enum class Type { point, uniform, exponential, discrete, step_survival };

  Type type = Type::point;
  double value = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  double rate = 0.0;
  double tail = 0.0;
  std::vector<Atom> atoms;
  std::vector<double> grid;
  std::vector<double> values;

  /// Throws ParseError on malformed JSON, ValidationError on invariant
  /// violations (the message names the invariant).
  static DistributionSpec parse(std::string_view text);
  static DistributionSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  /// Buyer-side view.
  SurvivalCurve to_curve() const;
  /// Seller-side view. A nonzero tail is rejected.
  ValueDistribution to_distribution() const;
};

/// Parses a spec and returns the buyer survival curve.
SurvivalCurve parse_spec(std::string_view text);

/// Reads a spec argument: inline JSON when it starts with '{', otherwise the
/// path of a file holding the JSON.
DistributionSpec load_spec_argument(const std::string& arg);

}  // namespace tradecert
