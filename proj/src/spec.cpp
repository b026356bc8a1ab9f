#include "tradecert/spec.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "tradecert/errors.hpp"

namespace tradecert {

namespace {

using nlohmann::json;

double number_field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_number())
    throw ValidationError(std::string("field '") + key + "' missing or not a number");
  return it->get<double>();
}

std::vector<double> number_array(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_array())
    throw ValidationError(std::string("field '") + key + "' missing or not an array");
  std::vector<double> out;
  for (const json& v : *it) {
    if (!v.is_number())
      throw ValidationError(std::string("field '") + key + "' holds a non-number");
    out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace

DistributionSpec DistributionSpec::from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("distribution spec must be a JSON object");
  auto t = j.find("type");
  if (t == j.end() || !t->is_string())
    throw ValidationError("field 'type' missing or not a string");
  const std::string type = t->get<std::string>();

  DistributionSpec s;
  if (j.contains("tail")) s.tail = number_field(j, "tail");
  if (!(s.tail >= 0.0) || !std::isfinite(s.tail))
    throw ValidationError("tail mass must be finite and >= 0");

  if (type == "point") {
    s.type = Type::point;
    s.value = number_field(j, "value");
    if (!(s.value >= 0.0)) throw ValidationError("point value must be >= 0");
  } else if (type == "uniform") {
    s.type = Type::uniform;
    s.lo = number_field(j, "lo");
    s.hi = number_field(j, "hi");
    if (!(s.lo >= 0.0)) throw ValidationError("uniform lo must be >= 0");
    if (!(s.lo < s.hi)) throw ValidationError("uniform requires lo < hi");
  } else if (type == "exponential") {
    s.type = Type::exponential;
    s.rate = number_field(j, "rate");
    if (!(s.rate > 0.0)) throw ValidationError("exponential rate must be > 0");
  } else if (type == "discrete") {
    s.type = Type::discrete;
    auto it = j.find("atoms");
    if (it == j.end() || !it->is_array() || it->empty())
      throw ValidationError("field 'atoms' missing or empty");
    double total = 0.0;
    for (const json& a : *it) {
      if (!a.is_array() || a.size() != 2 || !a[0].is_number() || !a[1].is_number())
        throw ValidationError("each atom must be [value, probability]");
      Atom atom{a[0].get<double>(), a[1].get<double>()};
      if (!(atom.value >= 0.0)) throw ValidationError("atom values must be >= 0");
      if (!(atom.prob >= 0.0)) throw ValidationError("atom probabilities must be >= 0");
      total += atom.prob;
      s.atoms.push_back(atom);
    }
    if (std::abs(total - 1.0) > 1e-9)
      throw ValidationError("probabilities do not sum to 1");
  } else if (type == "step_survival") {
    s.type = Type::step_survival;
    s.grid = number_array(j, "grid");
    s.values = number_array(j, "values");
    // Full invariant check (monotone grid, values in [0,1], weakly decreasing).
    (void)SurvivalCurve::step(s.grid, s.values, s.tail);
  } else {
    throw ValidationError("unknown distribution type '" + type + "'");
  }
  return s;
}

DistributionSpec DistributionSpec::parse(std::string_view text) {
  json j;
  try {
    j = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed distribution spec: ") + e.what(), e.byte);
  }
  return from_json(j);
}

json DistributionSpec::to_json() const {
  json j;
  switch (type) {
    case Type::point:
      j = {{"type", "point"}, {"value", value}};
      break;
    case Type::uniform:
      j = {{"type", "uniform"}, {"lo", lo}, {"hi", hi}};
      break;
    case Type::exponential:
      j = {{"type", "exponential"}, {"rate", rate}};
      break;
    case Type::discrete: {
      json arr = json::array();
      for (const Atom& a : atoms) arr.push_back({a.value, a.prob});
      j = {{"type", "discrete"}, {"atoms", arr}};
      break;
    }
    case Type::step_survival:
      j = {{"type", "step_survival"}, {"grid", grid}, {"values", values}};
      break;
  }
  if (tail != 0.0) j["tail"] = tail;
  return j;
}

SurvivalCurve DistributionSpec::to_curve() const {
  switch (type) {
    case Type::point:
      return SurvivalCurve::point_mass(value, tail);
    case Type::exponential:
      return SurvivalCurve::exponential(rate, tail);
    case Type::step_survival:
      return SurvivalCurve::step(grid, values, tail);
    case Type::uniform:
      return ValueDistribution::uniform(lo, hi).survival_curve().with_tail_mass(tail);
    case Type::discrete:
      return ValueDistribution::discrete(atoms).survival_curve().with_tail_mass(tail);
  }
  throw ValidationError("unknown distribution type");
}

ValueDistribution DistributionSpec::to_distribution() const {
  if (tail != 0.0) throw ValidationError("tail mass is only meaningful on the buyer side");
  switch (type) {
    case Type::point:
      return ValueDistribution::point(value);
    case Type::uniform:
      return ValueDistribution::uniform(lo, hi);
    case Type::exponential:
      return ValueDistribution::exponential(rate);
    case Type::discrete:
      return ValueDistribution::discrete(atoms);
    case Type::step_survival: {
      // Atoms sit where H drops: mass 1 - H(0) at 0, H(g_i^-) - H(g_i) at g_i.
      std::vector<Atom> out;
      double prev = 1.0;
      for (std::size_t i = 0; i < grid.size(); ++i) {
        const double h = i < values.size() ? values[i] : 0.0;
        if (prev - h > 0.0) out.push_back({grid[i], prev - h});
        prev = h;
      }
      return ValueDistribution::discrete(std::move(out));
    }
  }
  throw ValidationError("unknown distribution type");
}

SurvivalCurve parse_spec(std::string_view text) {
  return DistributionSpec::parse(text).to_curve();
}

DistributionSpec load_spec_argument(const std::string& arg) {
  if (!arg.empty() && arg.front() == '{') return DistributionSpec::parse(arg);
  std::ifstream in(arg);
  if (!in) throw ValidationError("cannot read distribution spec file '" + arg + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return DistributionSpec::parse(buf.str());
}

}  // namespace tradecert
