#include "cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <new>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "tradecert/dp_certifier.hpp"
#include "tradecert/errors.hpp"
#include "tradecert/instances.hpp"
#include "tradecert/price_measure.hpp"
#include "tradecert/spec.hpp"
#include "tradecert/version.hpp"

namespace tradecert::cli {

namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

int default_threads() {
  if (const char* env = std::getenv("TRADECERT_THREADS")) {
    const int t = std::atoi(env);
    if (t >= 1) return t;
  }
  return 1;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ValidationError("cannot write '" + path + "'");
  f << text;
}

std::uint64_t parse_count(const std::string& text, const char* what) {
  // Accepts "1000000" as well as "1e6".
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw ValidationError(std::string(what) + " is not a number: '" + text + "'");
  }
  if (used != text.size() || !(v >= 0.0) || v != std::floor(v) || v > 1e18)
    throw ValidationError(std::string(what) + " must be a non-negative integer");
  return static_cast<std::uint64_t>(v);
}

struct Common {
  bool no_timing = false;
};

json provenance(const std::string& command, const json& config, Clock::time_point t0,
                const Common& common) {
  const double wall =
      common.no_timing ? 0.0 : std::chrono::duration<double>(Clock::now() - t0).count();
  return {{"version", kVersion}, {"command", command}, {"config", config},
          {"wall_time_s", wall}};
}

void emit(std::ostream& out, const json& j) { out << j.dump(2) << '\n'; }

// --- certify ---------------------------------------------------------------

struct CertifyArgs {
  double beta = 0.0;
  int n = 0;
  double eps = 0.0;
  double delta = 1e-6;
  std::string checkpoint_dir;
  bool resume = false;
  int threads = 1;
  std::string emit_curve;
  std::string out_path;
  bool no_prune = false;
  bool strict_terminal = false;
  double memory_mb = 3072.0;
  bool progress = false;
};

int cmd_certify(const CertifyArgs& a, const Common& common, std::ostream& out,
                std::ostream& err) {
  const auto t0 = Clock::now();
  const DPParams p = DPParams::make(a.beta, a.n, a.eps);
  discretization_error(p.beta, p.n, p.eps);  // fail fast on a diverging bound

  DPOptions opt;
  opt.threads = a.threads;
  opt.prune = !a.no_prune;
  opt.strict_terminal = a.strict_terminal;
  opt.argmax = !a.emit_curve.empty();
  if (!(a.memory_mb > 0.0)) throw DomainError("memory cap must be positive");
  opt.memory_budget_bytes = static_cast<std::uint64_t>(a.memory_mb * 1024.0 * 1024.0);
  opt.checkpoint_dir = a.checkpoint_dir;
  opt.resume = a.resume;
  opt.progress = a.progress;

  BoundCertificate c = certify_lower_bound(p, opt, a.delta);
  if (common.no_timing) c.runtime_s = 0.0;

  json j = c.to_json();
  j["provenance"] = provenance(
      "certify",
      {{"beta", a.beta}, {"n", a.n}, {"eps", a.eps}, {"eps_snapped", p.eps},
       {"levels", p.levels}, {"delta", a.delta}, {"threads", a.threads},
       {"prune", !a.no_prune}, {"strict_terminal", a.strict_terminal},
       {"memory_mb", a.memory_mb}, {"checkpoint_dir", a.checkpoint_dir},
       {"resume", a.resume}},
      t0, common);
  if (!a.emit_curve.empty()) {
    std::ostringstream csv;
    csv << "segment,s_lo,s_hi,H\n";
    for (int k = 0; k < p.n; ++k)
      csv << (k + 1) << ',' << format_g12(static_cast<double>(k) / p.n) << ','
          << format_g12(static_cast<double>(k + 1) / p.n) << ','
          << format_g12(c.argmax_curve[k]) << '\n';
    write_file(a.emit_curve, csv.str());
  }
  if (!a.out_path.empty()) write_file(a.out_path, j.dump(2) + "\n");
  emit(out, j);
  if (!c.certified)
    err << "not certified: M + err = " << format_g12(c.obj_bound) << " > 1 - delta\n";
  return c.certified ? kOk : kNegative;
}

// --- verify-upper ----------------------------------------------------------

int cmd_verify_upper(double beta, const std::string& density_path, int points,
                     const Common& common, std::ostream& out) {
  const auto t0 = Clock::now();
  const UpperBoundReport r = verify_upper_bound(beta);
  const PriceMeasure m(theorem8_curve(beta), beta);
  json j = {{"schema_version", kSchemaVersion},
            {"beta", beta},
            {"part1", r.part1},
            {"part2", r.part2},
            {"part3", r.part3},
            {"total", r.total},
            {"price_mass", m.mass()},
            {"exceeds_one", r.total > 1.0},
            {"measure_hash", m.content_hash()}};
  if (!density_path.empty()) write_file(density_path, m.csv(points));
  j["provenance"] = provenance(
      "verify-upper", {{"beta", beta}, {"emit_density", density_path}, {"points", points}},
      t0, common);
  emit(out, j);
  return r.total > 1.0 ? kOk : kNegative;
}

// --- worst-seller ----------------------------------------------------------

// "witness" names the built-in upper-bound curve; anything else is a spec.
SurvivalCurve buyer_curve(const std::string& arg, double beta) {
  if (arg == "witness") return theorem8_curve(beta);
  return load_spec_argument(arg).to_curve();
}

json buyer_config(const std::string& arg) {
  if (arg == "witness") return "witness";
  return load_spec_argument(arg).to_json();
}

int cmd_worst_seller(const std::string& buyer_arg, double beta, int grid,
                     const std::string& csv_path, const Common& common, std::ostream& out,
                     std::ostream& err) {
  const auto t0 = Clock::now();
  if (grid < 2) throw DomainError("grid must have at least 2 points");
  const SurvivalCurve raw = buyer_curve(buyer_arg, beta);
  const double s2 = solve_s2(raw, beta);
  const SurvivalCurve curve = raw.rescale(s2);

  const ValueDistribution fs = worst_seller_distribution(curve, beta);
  const double g1 = curve.g_tail(1.0);
  std::ostringstream csv;
  csv << "p,F\n";
  double prev = -1.0, min_step = 0.0, lo = 1.0, hi = 0.0, dev = 0.0;
  json table = json::array();
  for (int i = 0; i < grid; ++i) {
    const double p = static_cast<double>(i) / (grid - 1);
    // F at p = 1 is the left limit; the CDF itself jumps to 1 there.
    const double f = worst_seller_cdf(curve, beta, p);
    lo = std::min(lo, f);
    hi = std::max(hi, f);
    if (prev >= -0.5) min_step = std::min(min_step, f - prev);
    prev = f;
    const double gft = f * curve.g_tail(p) + curve.survival(p) * fs.cdf_integral(p);
    dev = std::max(dev, std::abs(gft - g1));
    csv << format_g12(p) << ',' << format_g12(f) << '\n';
    if (csv_path.empty()) table.push_back({p, f});
  }
  const double tol = 1e-9;
  const bool valid = lo >= -tol && hi <= 1.0 + tol && min_step >= -tol;
  if (!csv_path.empty()) write_file(csv_path, csv.str());

  json j = {{"schema_version", kSchemaVersion},
            {"beta", beta},
            {"s2_input", s2},
            {"scale", s2},
            {"g1", g1},
            {"valid_cdf", valid},
            {"cdf_min", lo},
            {"cdf_max", hi},
            {"min_increment", min_step},
            {"gft_max_deviation", dev},
            {"gft_tolerance", 1e-6}};
  if (csv_path.empty()) j["cdf"] = table;
  j["provenance"] = provenance(
      "worst-seller",
      {{"buyer", buyer_config(buyer_arg)}, {"beta", beta}, {"grid", grid}, {"csv", csv_path}}, t0,
      common);
  emit(out, j);
  if (!valid) {
    err << "error: worst seller is not a valid CDF for this buyer curve\n";
    return kInputError;
  }
  return dev < 1e-6 ? kOk : kNegative;
}

// --- simulate --------------------------------------------------------------

struct SimulateArgs {
  std::string setting;
  std::string mech = "post-sample";
  int n = 0;
  double eps = 0.0;
  double q = 0.99;
  std::string trials = "1000000";
  std::uint64_t seed = 0;
  int threads = 1;
  double s1 = 0.0;
  std::string sequence_csv;
};

std::unique_ptr<SampleMechanism> load_mechanism(const std::string& arg) {
  if (arg == "post-sample") return post_sample_mechanism();
  if (arg.rfind("file:", 0) == 0) {
    const std::string path = arg.substr(5);
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot read mechanism spec '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    json j;
    try {
      j = json::parse(buf.str());
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("malformed mechanism spec: ") + e.what(), e.byte);
    }
    return mechanism_from_json(j);
  }
  throw ValidationError("unknown mechanism '" + arg + "' (use post-sample or file:<spec>)");
}

int cmd_simulate(const SimulateArgs& a, const Common& common, std::ostream& out) {
  const auto t0 = Clock::now();
  const std::uint64_t trials = parse_count(a.trials, "trials");
  if (trials < 1000) throw DomainError("trials below minimum (1000)");
  const auto mech = load_mechanism(a.mech);

  HardnessOptions opt;
  if (a.setting == "asym") {
    if (a.s1 > 0.0) opt.s1 = a.s1;
  } else if (a.setting == "sym") {
    opt.s1 = a.s1 > 0.0 ? a.s1 : 1e6;
  } else {
    throw ValidationError("setting must be asym or sym");
  }
  const HardnessInstance h = a.setting == "asym"
                                 ? asym_hardness_instance(*mech, a.n, a.eps, opt)
                                 : sym_hardness_instance(*mech, a.n, a.eps, a.q, opt);
  if (!a.sequence_csv.empty()) write_file(a.sequence_csv, h.sequence_csv());

  const MonteCarloReport r =
      simulate_single_sample(*mech, h.instance, trials, a.seed, a.threads);
  json j = r.to_json();
  json check;
  if (a.setting == "asym") {
    const double lower = h.bound - 3.0 * r.rejection.stderr_;
    check = {{"quantity", "rejection"}, {"bound", h.bound},
             {"threshold", lower}, {"pass", r.rejection.estimate >= lower}};
    j["buyer_value"] = h.buyer_value;
  } else {
    const double lower = h.bound - 3.0 * r.loss_ratio.stderr_;
    check = {{"quantity", "loss_ratio"}, {"bound", h.bound},
             {"threshold", lower}, {"pass", r.loss_ratio.estimate >= lower}};
    j["high_value"] = h.high_value;
    j["q"] = a.q;
  }
  j["check"] = check;
  j["setting"] = a.setting;
  j["mechanism"] = mech->to_json();
  j["ratio_limit"] = h.ratio_limit;
  j["sequence_first"] = h.sequence.front();
  j["sequence_last"] = h.sequence.back();
  j["provenance"] = provenance(
      "simulate",
      {{"setting", a.setting}, {"mech", a.mech}, {"n", a.n}, {"eps", a.eps}, {"q", a.q},
       {"trials", trials}, {"seed", a.seed}, {"threads", a.threads}, {"s1", opt.s1}},
      t0, common);
  emit(out, j);
  return check["pass"].get<bool>() ? kOk : kNegative;
}

// --- ratio -----------------------------------------------------------------

int cmd_ratio(const std::string& buyer_arg, const std::string& seller_arg, int grid,
              double beta, const Common& common, std::ostream& out) {
  const auto t0 = Clock::now();
  SurvivalCurve buyer = buyer_curve(buyer_arg, beta);
  std::optional<ValueDistribution> seller;
  json seller_cfg = seller_arg;
  if (seller_arg == "worst") {
    // The worst seller lives on the normalized scale.
    buyer = buyer.rescale(solve_s2(buyer, beta));
    seller = worst_seller_distribution(buyer, beta);
  } else {
    const DistributionSpec s = load_spec_argument(seller_arg);
    seller = s.to_distribution();
    seller_cfg = s.to_json();
  }
  const TradeInstance inst{buyer, *seller};
  const PriceRatio r = best_price_ratio(inst, grid);
  json j = {{"schema_version", kSchemaVersion},
            {"price", r.price},
            {"ratio", r.ratio},
            {"welfare", r.welfare},
            {"opt", r.opt},
            {"note", "grid maximum; a lower bound on the supremum over prices"}};
  j["provenance"] = provenance("ratio",
                               {{"buyer", buyer_config(buyer_arg)},
                                {"seller", seller_cfg},
                                {"beta", beta},
                                {"grid", grid}},
                               t0, common);
  emit(out, j);
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Certified welfare bounds for fixed-price bilateral trade"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));
  Common common;
  app.add_flag("--no-timing", common.no_timing, "Zero all timing fields (byte-stable output)");

  CertifyArgs ca;
  ca.threads = default_threads();
  auto* certify = app.add_subcommand("certify", "Run the discretized search and certify beta");
  certify->add_option("--beta", ca.beta, "Target ratio")->required();
  certify->add_option("--n", ca.n, "Number of segments")->required();
  certify->add_option("--eps", ca.eps, "Level granularity (1/eps integral)")->required();
  certify->add_option("--delta", ca.delta, "Safety margin")->capture_default_str();
  certify->add_option("--checkpoint-dir", ca.checkpoint_dir, "Save a checkpoint per stage");
  certify->add_flag("--resume", ca.resume, "Resume from the checkpoint directory");
  certify->add_option("--threads", ca.threads, "Worker threads")->capture_default_str();
  certify->add_option("--emit-curve", ca.emit_curve, "Write the maximizing curve as CSV");
  certify->add_option("--out", ca.out_path, "Also write the certificate to this file");
  certify->add_flag("--no-prune", ca.no_prune, "Lay out the full state box");
  certify->add_flag("--strict-terminal", ca.strict_terminal,
                    "Reduce only over terminal cells with X, Y <= 1");
  certify->add_option("--memory-mb", ca.memory_mb, "Memory budget")->capture_default_str();
  certify->add_flag("--progress", ca.progress, "Progress lines on stderr");

  double vu_beta = 0.7381;
  std::string vu_density;
  int vu_points = 1001;
  auto* verify = app.add_subcommand("verify-upper", "Check the upper-bound witness");
  verify->add_option("--beta", vu_beta, "Ratio (tail recomputed)")->capture_default_str();
  verify->add_option("--emit-density", vu_density, "Write q* as CSV");
  verify->add_option("--points", vu_points, "CSV points")->capture_default_str();

  std::string ws_buyer;
  double ws_beta = 0.0;
  int ws_grid = 1001;
  std::string ws_csv;
  auto* worst = app.add_subcommand("worst-seller", "Worst-case seller for a buyer curve");
  worst->add_option("--buyer", ws_buyer, "Buyer spec (inline JSON or file) or 'witness'")
      ->required();
  worst->add_option("--beta", ws_beta, "Ratio")->required();
  worst->add_option("--grid", ws_grid, "Grid points on [0,1]")->capture_default_str();
  worst->add_option("--csv", ws_csv, "Write F as CSV instead of inlining it");

  SimulateArgs sa;
  sa.threads = default_threads();
  auto* simulate = app.add_subcommand("simulate", "Monte-Carlo single-sample hardness");
  simulate->add_option("--setting", sa.setting, "asym or sym")->required();
  simulate->add_option("--mech", sa.mech, "post-sample or file:<spec>")->capture_default_str();
  simulate->add_option("--n", sa.n, "Sequence length")->required();
  simulate->add_option("--eps", sa.eps, "Quantile slack")->required();
  simulate->add_option("--q", sa.q, "Low-atom mass (sym)")->capture_default_str();
  simulate->add_option("--trials", sa.trials, "Trials, e.g. 1e6")->capture_default_str();
  simulate->add_option("--seed", sa.seed, "RNG seed")->capture_default_str();
  simulate->add_option("--threads", sa.threads, "Worker threads")->capture_default_str();
  simulate->add_option("--s1", sa.s1, "First sequence value");
  simulate->add_option("--sequence-csv", sa.sequence_csv, "Write the sequence as CSV");

  std::string r_buyer, r_seller;
  int r_grid = 1000;
  double r_beta = 0.7381;
  auto* ratio = app.add_subcommand("ratio", "Best fixed price by grid search");
  ratio->add_option("--buyer", r_buyer, "Buyer spec or 'witness'")->required();
  ratio->add_option("--seller", r_seller, "Seller spec or 'worst'")->required();
  ratio->add_option("--beta", r_beta, "Ratio used by 'witness' and 'worst'")
      ->capture_default_str();
  ratio->add_option("--grid", r_grid, "Price grid points")->capture_default_str();

  std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }

  try {
    if (*certify) return cmd_certify(ca, common, out, err);
    if (*verify) return cmd_verify_upper(vu_beta, vu_density, vu_points, common, out);
    if (*worst) return cmd_worst_seller(ws_buyer, ws_beta, ws_grid, ws_csv, common, out, err);
    if (*simulate) return cmd_simulate(sa, common, out);
    if (*ratio) return cmd_ratio(r_buyer, r_seller, r_grid, r_beta, common, out);
  } catch (const ParseError& e) {
    err << "error: " << e.what() << " (byte " << e.position() << ")\n";
    return kInputError;
  } catch (const ResourceError& e) {
    err << "error: " << e.what() << '\n';
    return kResourceError;
  } catch (const std::bad_alloc&) {
    err << "error: out of memory\n";
    return kResourceError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }
  return kInputError;
}

}  // namespace tradecert::cli
