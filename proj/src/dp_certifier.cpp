#include "tradecert/dp_certifier.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>

#include "parallel.hpp"
#include "tradecert/errors.hpp"
#include "tradecert/hash.hpp"
#include "tradecert/price_measure.hpp"
#include "tradecert/survival_curve.hpp"
#include "tradecert/version.hpp"

namespace tradecert {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::int64_t ceil_div(std::int64_t a, std::int64_t b) {
  // b > 0
  return a >= 0 ? (a + b - 1) / b : -((-a) / b);
}

// Shared by the search, the replay and the brute force so that all three
// produce the same bits for the same integer state.
inline double increment(double beta, double g1, int n, int L, std::int64_t X,
                        std::int64_t Y, int Z) {
  const double nl = static_cast<double>(n) * L;
  const double z = static_cast<double>(Z) / L;
  const double g = static_cast<double>(Y) / nl + g1;
  const double k = static_cast<double>(X) / nl;
  const double width = 1.0 / n;
  return (beta * (z * g - k) + (1.0 - beta) * g1) / (g * (g + width * z)) * width;
}

void validate_beta(double beta) {
  if (!(beta > 0.0 && beta < 1.0)) throw DomainError("beta must lie in (0,1)");
}

}  // namespace

DPParams DPParams::make(double beta, int n, double eps) {
  validate_beta(beta);
  if (n < 1) throw DomainError("n must be >= 1");
  if (!(eps > 0.0 && eps <= 1.0)) throw DomainError("eps must lie in (0,1]");
  const double inv = 1.0 / eps;
  const double rounded = std::round(inv);
  if (std::abs(inv - rounded) > 1e-9 * rounded)
    throw DomainError("1/eps must be an integer (got " + format_g12(inv) + ")");
  if (rounded > 65535.0) throw DomainError("1/eps too large");
  DPParams p;
  p.beta = beta;
  p.n = n;
  p.levels = static_cast<int>(rounded);
  p.eps = 1.0 / p.levels;
  p.g1 = (1.0 - beta) / beta;
  return p;
}

std::string DPParams::hash() const {
  char buf[96];
  const int len = std::snprintf(buf, sizeof buf, "%.17g|%d|%d", beta, n, levels);
  return hex16(fnv1a(buf, static_cast<std::size_t>(len)));
}

double discretization_error(double beta, int n, double eps) {
  validate_beta(beta);
  if (n < 1) throw DomainError("n must be >= 1");
  if (!(eps > 0.0)) throw DomainError("eps must be > 0");
  const double denom = 1.0 - beta * (1.0 + eps + 1.0 / n);
  if (!(denom > 0.0)) throw DomainError("error bound diverges");
  return beta * std::log((1.0 - beta) / denom);
}

double segment_objective(double z_next, double g_next, double k_next, double beta,
                         double width, double g1) {
  return (beta * (z_next * g_next - k_next) + (1.0 - beta) * g1) /
         (g_next * (g_next + width * z_next)) * width;
}

double segment_objective(double z_next, double g_next, double k_next, double beta,
                         double width) {
  return segment_objective(z_next, g_next, k_next, beta, width, (1.0 - beta) / beta);
}

bool keep_state(double s_k, double x, double y, double z) {
  return (1.0 - s_k) * x >= y * y && z * y >= x;
}

bool keep_state(const DPParams& p, int k, std::int64_t X, std::int64_t Y, int Z) {
  const std::int64_t L = p.levels;
  const std::int64_t R = p.n - k;
  if (X < 0 || Y < 0 || Z < 0 || Z > L || R < 0) return false;
  if (R == 0) return X == 0 && Y == 0;
  if (Y > R * Z) return false;
  if (L * X > Z * Y) return false;
  // Each floor(l^2/L) loses less than 1, so L X >= sum l^2 - R (L - 1).
  return R * (L * X + R * (L - 1)) >= Y * Y;
}

double segment_increment(const DPParams& p, std::int64_t X, std::int64_t Y, int Z) {
  return increment(p.beta, p.g1, p.n, p.levels, X, Y, Z);
}

double replay_objective(const DPParams& p, std::span<const int> levels) {
  if (static_cast<int>(levels.size()) != p.n)
    throw ValidationError("expected " + std::to_string(p.n) + " levels");
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i] < 0 || levels[i] > p.levels)
      throw ValidationError("level out of range");
    if (i > 0 && levels[i] > levels[i - 1])
      throw ValidationError("levels not weakly decreasing");
  }
  const int L = p.levels;
  std::vector<std::int64_t> xs(p.n + 1, 0), ys(p.n + 1, 0);
  for (int j = p.n - 1; j >= 0; --j) {
    xs[j] = xs[j + 1] + static_cast<std::int64_t>(levels[j]) * levels[j] / L;
    ys[j] = ys[j + 1] + levels[j];
  }
  double v = 0.0;
  for (int j = 0; j < p.n; ++j)
    v = v + increment(p.beta, p.g1, p.n, L, xs[j + 1], ys[j + 1], levels[j]);
  return v;
}

// ---------------------------------------------------------------------------

StageLayout::StageLayout(const DPParams& p, int k, bool prune)
    : k_(k), L_(p.levels), prune_(prune) {
  if (k < 0 || k > p.n) throw DomainError("stage out of range");
  const std::int64_t L = L_;
  const std::int64_t R = p.n - k;
  box_ = static_cast<std::int64_t>(p.n) * L;
  y_max_ = prune ? R * L : box_;
  x_lo_.resize(y_max_ + 1);
  first_row_.resize(y_max_ + 2);
  offsets_.push_back(0);

  std::int64_t rows = 0;
  for (std::int64_t Y = 0; Y <= y_max_; ++Y) {
    std::int64_t lo = 0;
    if (prune && R > 0) lo = std::max<std::int64_t>(0, ceil_div(Y * Y - R * R * (L - 1), R * L));
    x_lo_[Y] = lo;
    first_row_[Y] = rows;
    const std::int64_t hi = x_hi(Y);
    for (std::int64_t X = lo; X <= hi; ++X) {
      std::int64_t zmin = 0;
      if (prune && Y > 0) zmin = std::max(ceil_div(Y, R), ceil_div(L * X, Y));
      offsets_.push_back(offsets_.back() + static_cast<std::uint64_t>(L - zmin + 1));
      ++rows;
    }
  }
  first_row_[y_max_ + 1] = rows;
}

std::int64_t StageLayout::x_hi(std::int64_t Y) const {
  if (!prune_) return box_;
  return y_max_ == 0 ? 0 : Y;
}

std::int64_t StageLayout::row(std::int64_t X, std::int64_t Y) const {
  if (Y < 0 || Y > y_max_) return -1;
  if (X < x_lo_[Y] || X > x_hi(Y)) return -1;
  return first_row_[Y] + (X - x_lo_[Y]);
}

std::uint64_t StageLayout::bytes() const noexcept {
  return (x_lo_.size() + first_row_.size() + offsets_.size()) * 8;
}

// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'T', 'C', 'D', 'P', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <class T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
void get(std::ifstream& in, T& v) {
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v))
    throw CheckpointError("truncated checkpoint");
}

const char* checkpoint_name = "dp_stage.ckpt";

}  // namespace

std::string table_hash(std::span<const double> values) {
  return hex16(fnv1a(values.data(), values.size() * sizeof(double)));
}

void checkpoint_save(const DPStage& stage, const DPParams& p,
                     const std::filesystem::path& path) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write checkpoint '" + tmp.string() + "'");
    out.write(kMagic, sizeof kMagic);
    put(out, kCheckpointVersion);
    const std::string h = p.hash();
    out.write(h.data(), 16);
    put(out, static_cast<std::int32_t>(stage.k));
    put(out, static_cast<std::uint8_t>(stage.prune ? 1 : 0));
    put(out, static_cast<std::uint64_t>(stage.values.size()));
    out.write(reinterpret_cast<const char*>(stage.values.data()),
              static_cast<std::streamsize>(stage.values.size() * sizeof(double)));
    put(out, static_cast<std::uint32_t>(stage.backpointers.size()));
    for (const auto& bp : stage.backpointers) {
      put(out, static_cast<std::uint64_t>(bp.size()));
      out.write(reinterpret_cast<const char*>(bp.data()),
                static_cast<std::streamsize>(bp.size() * sizeof(std::uint16_t)));
    }
    if (!out) throw CheckpointError("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

DPStage checkpoint_load(const std::filesystem::path& path, const DPParams& p) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot read checkpoint '" + path.string() + "'");
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw CheckpointError("not a checkpoint file: '" + path.string() + "'");
  std::uint32_t version = 0;
  get(in, version);
  if (version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  char h[16];
  if (!in.read(h, sizeof h)) throw CheckpointError("truncated checkpoint");
  if (std::string(h, 16) != p.hash()) throw CheckpointError("checkpoint/params mismatch");

  DPStage stage;
  std::int32_t k = 0;
  std::uint8_t prune = 0;
  std::uint64_t count = 0;
  get(in, k);
  get(in, prune);
  get(in, count);
  if (k < 0 || k > p.n) throw CheckpointError("checkpoint stage out of range");
  stage.k = k;
  stage.prune = prune != 0;
  stage.values.resize(count);
  if (!in.read(reinterpret_cast<char*>(stage.values.data()),
               static_cast<std::streamsize>(count * sizeof(double))))
    throw CheckpointError("truncated checkpoint");
  std::uint32_t tables = 0;
  get(in, tables);
  for (std::uint32_t t = 0; t < tables; ++t) {
    std::uint64_t size = 0;
    get(in, size);
    std::vector<std::uint16_t> bp(size);
    if (!in.read(reinterpret_cast<char*>(bp.data()),
                 static_cast<std::streamsize>(size * sizeof(std::uint16_t))))
      throw CheckpointError("truncated checkpoint");
    stage.backpointers.push_back(std::move(bp));
  }
  return stage;
}

// ---------------------------------------------------------------------------

DPResult dp_search(const DPParams& p, const DPOptions& options) {
  if (options.threads < 1) throw DomainError("threads must be >= 1");
  const int n = p.n;
  const int L = p.levels;
  const int threads = options.threads;
  const bool prune = options.prune;
  DPResult result;

  std::vector<std::vector<std::uint16_t>> bps;
  std::vector<double> values;
  int start = 0;
  const auto ckpt = options.checkpoint_dir.empty()
                        ? std::filesystem::path()
                        : options.checkpoint_dir / checkpoint_name;

  if (options.resume && !ckpt.empty() && std::filesystem::exists(ckpt)) {
    DPStage st = checkpoint_load(ckpt, p);
    if (st.prune != prune) throw CheckpointError("checkpoint/params mismatch");
    if (options.argmax && static_cast<int>(st.backpointers.size()) != st.k)
      throw CheckpointError("checkpoint has no backpointers; rerun without resume");
    start = st.k;
    values = std::move(st.values);
    bps = std::move(st.backpointers);
    result.resumed_from = start;
  }

  StageLayout cur(p, start, prune);
  if (result.resumed_from >= 0) {
    if (values.size() != cur.cells())
      throw CheckpointError("checkpoint cell count does not match the layout");
  } else {
    values.assign(cur.cells(), 0.0);
  }
  result.peak_cells = cur.cells();
  std::uint64_t bp_bytes = 0;
  for (const auto& b : bps) bp_bytes += b.size() * sizeof(std::uint16_t);

  for (int k = start; k < n; ++k) {
    StageLayout next(p, k + 1, prune);
    const std::uint64_t need =
        (cur.cells() + next.cells()) * sizeof(double) + cur.bytes() + next.bytes() +
        (options.argmax ? bp_bytes + (cur.cells() + next.cells()) * 2 : 0);
    if (need > options.memory_budget_bytes) {
      throw ResourceError("memory budget exceeded at stage " + std::to_string(k + 1) +
                          "/" + std::to_string(n) + ": " + std::to_string(cur.cells()) +
                          " + " + std::to_string(next.cells()) + " cells need " +
                          std::to_string(need) + " bytes, budget " +
                          std::to_string(options.memory_budget_bytes));
    }
    result.peak_cells = std::max(result.peak_cells, cur.cells() + next.cells());

    // Suffix maxima over z within every row of the current stage.
    std::vector<std::uint16_t> arg_z;
    if (options.argmax) arg_z.resize(cur.cells());
    detail::parallel_for(cur.y_max() + 1, threads, [&](std::int64_t Y) {
      const std::int64_t r0 = cur.first_row(Y);
      const std::int64_t r1 = cur.first_row(Y + 1);
      for (std::int64_t r = r0; r < r1; ++r) {
        const std::uint64_t off = cur.offset(r);
        const int zmin = cur.zmin(r);
        double best = kNegInf;
        int best_z = L;
        for (int z = L; z >= zmin; --z) {
          double& v = values[off + (z - zmin)];
          if (v > best) {
            best = v;
            best_z = z;
          }
          v = best;
          if (options.argmax) arg_z[off + (z - zmin)] = static_cast<std::uint16_t>(best_z);
        }
      }
    });

    std::vector<double> next_values(next.cells());
    std::vector<std::uint16_t> next_bp;
    if (options.argmax) next_bp.resize(next.cells());
    detail::parallel_for(next.y_max() + 1, threads, [&](std::int64_t Y) {
      const std::int64_t xlo = next.x_lo(Y);
      const std::int64_t xhi = next.x_hi(Y);
      for (std::int64_t X = xlo; X <= xhi; ++X) {
        const std::int64_t r = next.first_row(Y) + (X - xlo);
        const std::uint64_t off = next.offset(r);
        const int zmin = next.zmin(r);
        for (int z = zmin; z <= L; ++z) {
          const std::int64_t sx = X + static_cast<std::int64_t>(z) * z / L;
          const std::int64_t sy = Y + z;
          const std::int64_t sr = cur.row(sx, sy);
          double v = kNegInf;
          std::uint16_t from = 0;
          if (sr >= 0) {
            const int szmin = cur.zmin(sr);
            const int s = std::max(z, szmin);
            if (s <= L) {
              const std::uint64_t idx = cur.offset(sr) + (s - szmin);
              const double best = values[idx];
              if (best != kNegInf) {
                v = best + increment(p.beta, p.g1, n, L, X, Y, z);
                if (options.argmax) from = arg_z[idx];
              }
            }
          }
          next_values[off + (z - zmin)] = v;
          if (options.argmax) next_bp[off + (z - zmin)] = from;
        }
      }
    });

    result.cells_touched += next.cells();
    values = std::move(next_values);
    cur = std::move(next);
    if (options.argmax) {
      bp_bytes += next_bp.size() * sizeof(std::uint16_t);
      bps.push_back(std::move(next_bp));
    }
    if (options.progress)
      std::fprintf(stderr, "stage %d/%d cells %llu\n", k + 1, n,
                   static_cast<unsigned long long>(cur.cells()));

    if (!ckpt.empty()) {
      std::filesystem::create_directories(options.checkpoint_dir);
      DPStage st;
      st.k = k + 1;
      st.prune = prune;
      st.values = values;
      if (options.argmax) st.backpointers = bps;
      checkpoint_save(st, p, ckpt);
      result.checkpoint_hashes.push_back(table_hash(values));
    }
    if (options.halt_after_stage == k + 1 && k + 1 < n) {
      result.completed = false;
      result.M = std::numeric_limits<double>::quiet_NaN();
      return result;
    }
  }

  // Terminal reduction, first maximum in layout order wins.
  double M = kNegInf;
  std::int64_t best_x = 0, best_y = 0;
  int best_z = 0;
  for (std::int64_t Y = 0; Y <= cur.y_max(); ++Y) {
    if (options.strict_terminal && Y > 1) break;
    const std::int64_t xlo = cur.x_lo(Y);
    const std::int64_t xhi = options.strict_terminal ? std::min<std::int64_t>(cur.x_hi(Y), 1)
                                                     : cur.x_hi(Y);
    for (std::int64_t X = xlo; X <= xhi; ++X) {
      const std::int64_t r = cur.first_row(Y) + (X - xlo);
      const std::uint64_t off = cur.offset(r);
      const int zmin = cur.zmin(r);
      for (int z = zmin; z <= L; ++z) {
        const double v = values[off + (z - zmin)];
        if (v > M) {
          M = v;
          best_x = X;
          best_y = Y;
          best_z = z;
        }
      }
    }
  }
  if (M == kNegInf) throw ValidationError("no reachable terminal cell");
  result.M = M;

  if (options.argmax) {
    std::vector<int> levels(n);
    std::int64_t X = best_x, Y = best_y;
    int z = best_z;
    for (int k = n; k >= 1; --k) {
      levels[k - 1] = z;
      if (k == 1) break;
      const StageLayout lay(p, k, prune);
      const std::int64_t r = lay.row(X, Y);
      const std::uint16_t from = bps[k - 1][lay.offset(r) + (z - lay.zmin(r))];
      X += static_cast<std::int64_t>(z) * z / L;
      Y += z;
      z = from;
    }
    result.argmax_levels = levels;
    for (int l : levels) result.argmax_curve.push_back(static_cast<double>(l) / L);
  }
  return result;
}

std::uint64_t curve_count(const DPParams& p) {
  // C(n + L, L) computed incrementally; exact while it fits.
  const std::uint64_t cap = 1ULL << 62;
  std::uint64_t c = 1;
  const std::uint64_t L = p.levels;
  for (std::uint64_t i = 1; i <= L; ++i) {
    const std::uint64_t num = static_cast<std::uint64_t>(p.n) + i;
    if (c > cap / num) return cap;
    c = c * num / i;
  }
  return c;
}

double brute_force_search(const DPParams& p) {
  const std::uint64_t count = curve_count(p);
  if (count > 1000000)
    throw ResourceError("brute force over " + std::to_string(count) +
                        " curves exceeds the 1e6 limit");
  std::vector<int> levels(p.n);
  double best = kNegInf;
  auto rec = [&](auto&& self, int i, int cap) -> void {
    if (i == p.n) {
      best = std::max(best, replay_objective(p, levels));
      return;
    }
    for (int l = 0; l <= cap; ++l) {
      levels[i] = l;
      self(self, i + 1, l);
    }
  };
  rec(rec, 0, p.levels);
  return best;
}

// ---------------------------------------------------------------------------

nlohmann::json BoundCertificate::to_json() const {
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["version"] = kVersion;
  j["beta"] = beta;
  j["n"] = n;
  j["eps"] = eps;
  j["M"] = M;
  j["err"] = err;
  j["obj_bound"] = obj_bound;
  j["certified"] = certified;
  j["delta"] = delta;
  j["runtime_s"] = runtime_s;
  j["cells_touched"] = cells_touched;
  j["argmax_curve"] = argmax_curve;
  if (!argmax_measure_hash.empty()) {
    j["argmax_measure_hash"] = argmax_measure_hash;
    j["argmax_price_mass"] = argmax_price_mass;
  }
  j["checkpoint_hashes"] = checkpoint_hashes;
  return j;
}

BoundCertificate certify_lower_bound(const DPParams& p, const DPOptions& options,
                                     double delta) {
  if (!(delta >= 0.0 && delta < 1.0)) throw DomainError("delta must lie in [0,1)");
  const double err = discretization_error(p.beta, p.n, p.eps);
  const auto t0 = std::chrono::steady_clock::now();
  const DPResult r = dp_search(p, options);
  if (!r.completed) throw ResourceError("search halted before the last stage");
  const auto t1 = std::chrono::steady_clock::now();

  BoundCertificate c;
  c.beta = p.beta;
  c.n = p.n;
  c.eps = p.eps;
  c.M = r.M;
  c.err = err;
  c.obj_bound = r.M + err;
  c.delta = delta;
  c.certified = c.obj_bound <= 1.0 - delta && c.obj_bound < 1.0;
  c.runtime_s = std::chrono::duration<double>(t1 - t0).count();
  c.cells_touched = r.cells_touched;
  c.argmax_curve = r.argmax_curve;
  c.checkpoint_hashes = r.checkpoint_hashes;
  if (!r.argmax_curve.empty()) {
    std::vector<double> grid(p.n + 1);
    for (int i = 0; i <= p.n; ++i) grid[i] = static_cast<double>(i) / p.n;
    const PriceMeasure m(SurvivalCurve::step(grid, r.argmax_curve, p.g1), p.beta);
    c.argmax_measure_hash = m.content_hash();
    c.argmax_price_mass = m.mass();
  }
  if (c.certified && !(c.M + c.err < 1.0))
    throw ValidationError("internal: certified verdict without M + err < 1");
  return c;
}

}  // namespace tradecert
