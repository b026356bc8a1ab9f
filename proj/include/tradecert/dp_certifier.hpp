#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace tradecert {

/// Parameters of the discretized search. Levels of H are multiples of
/// eps = 1 / levels; the unit interval is cut into n segments.
struct DPParams {
  double beta = 0.0;
  int n = 0;
  double eps = 0.0;
  int levels = 0;   // 1 / eps
  double g1 = 0.0;  // tail mass (1 - beta) / beta

  /// Validates and snaps eps so that 1/eps is an integer (tolerance 1e-9).
  /// Throws DomainError.
  static DPParams make(double beta, int n, double eps);

  /// 16-hex-digit digest identifying the parameters (checkpoint headers).
  std::string hash() const;
};

/// beta ln((1 - beta) / (1 - beta (1 + eps + 1/n))). Throws DomainError
/// "error bound diverges" when beta (1 + eps + 1/n) >= 1.
double discretization_error(double beta, int n, double eps);

/// Integral of the relaxed density over one segment of width `width`, with
/// level z, G and K taken at the right end of the segment:
///   [beta (z g - k) + (1 - beta) g1] / [g (g + width z)] * width.
double segment_objective(double z_next, double g_next, double k_next, double beta,
                         double width, double g1);
/// Same with the normalized tail g1 = (1 - beta) / beta.
double segment_objective(double z_next, double g_next, double k_next, double beta,
                         double width);

/// The two moment inequalities on a suffix [s, 1] of a decreasing H:
///   (1 - s) x >= y^2  and  z y >= x,
/// with x = int H^2, y = int H and z = H(s). Continuous form, no slack.
bool keep_state(double s_k, double x, double y, double z);

/// Integer form used by the search at stage k. X counts floor(l^2 / L) and Y
/// counts l over the remaining n - k segments, Z is the current level. The
/// slack covers the floor in X exactly, so no consistent curve is discarded.
bool keep_state(const DPParams& p, int k, std::int64_t X, std::int64_t Y, int Z);

/// Objective increment of the segment ending at stage k+1 whose level is Z,
/// given the integer suffix sums X, Y after that segment.
double segment_increment(const DPParams& p, std::int64_t X, std::int64_t Y, int Z);

/// Accumulated objective of the step curve with levels l_1 >= ... >= l_n
/// (integers in [0, L]), summed left to right exactly as the search does.
double replay_objective(const DPParams& p, std::span<const int> levels);

/// Cell layout of one stage. Cells are grouped in rows (X, Y); each row holds
/// the admissible levels Z in [zmin, L]. With pruning only states satisfying
/// keep_state() are laid out; without it the full box X, Y in [0, nL].
class StageLayout {
 public:
  StageLayout(const DPParams& p, int k, bool prune);

  int stage() const noexcept { return k_; }
  std::uint64_t cells() const noexcept { return offsets_.back(); }
  std::uint64_t rows() const noexcept { return offsets_.size() - 1; }
  std::int64_t y_max() const noexcept { return y_max_; }
  std::int64_t x_lo(std::int64_t Y) const { return x_lo_[Y]; }
  std::int64_t x_hi(std::int64_t Y) const;
  int levels() const noexcept { return L_; }

  /// Row index of (X, Y) or -1 when absent.
  std::int64_t row(std::int64_t X, std::int64_t Y) const;
  std::uint64_t offset(std::int64_t row) const { return offsets_[row]; }
  int zmin(std::int64_t row) const {
    return L_ + 1 - static_cast<int>(offsets_[row + 1] - offsets_[row]);
  }
  /// First row of the Y-block.
  std::int64_t first_row(std::int64_t Y) const { return first_row_[Y]; }

  /// Bytes needed for the layout itself.
  std::uint64_t bytes() const noexcept;

 private:
  int k_;
  int L_;
  bool prune_;
  std::int64_t y_max_;
  std::int64_t box_;
  std::vector<std::int64_t> x_lo_;
  std::vector<std::int64_t> first_row_;
  std::vector<std::uint64_t> offsets_;
};

/// Value table of one stage; -inf marks unreached cells.
struct DPStage {
  int k = 0;
  bool prune = true;
  std::vector<double> values;
  /// Chosen source level for every cell of stages 1..k (optional).
  std::vector<std::vector<std::uint16_t>> backpointers;
};

struct DPOptions {
  int threads = 1;
  bool prune = true;
  /// Reduce only over terminal cells with X, Y <= 1 (index units).
  bool strict_terminal = false;
  /// Record backpointers and reconstruct the maximizing curve.
  bool argmax = false;
  /// Budget for live tables, layouts and backpointers.
  std::uint64_t memory_budget_bytes = 3ULL << 30;
  /// Save a checkpoint after every stage when non-empty.
  std::filesystem::path checkpoint_dir;
  bool resume = false;
  /// Stop after finishing this stage (testing interrupted runs); -1 = never.
  int halt_after_stage = -1;
  bool progress = false;
};

struct DPResult {
  double M = 0.0;
  bool completed = true;
  /// Levels l_1..l_n of the maximizing curve as multiples of eps (if argmax).
  std::vector<double> argmax_curve;
  std::vector<int> argmax_levels;
  std::uint64_t cells_touched = 0;
  std::uint64_t peak_cells = 0;
  int resumed_from = -1;
  std::vector<std::string> checkpoint_hashes;
};

DPResult dp_search(const DPParams& p, const DPOptions& options = {});

/// Exhaustive maximum of replay_objective() over all decreasing level
/// sequences. Throws ResourceError above 1e6 curves.
double brute_force_search(const DPParams& p);

/// Number of decreasing level sequences, C(n + L, L), saturated at 2^62.
std::uint64_t curve_count(const DPParams& p);

struct BoundCertificate {
  double beta = 0.0;
  int n = 0;
  double eps = 0.0;
  double M = 0.0;
  double err = 0.0;
  double obj_bound = 0.0;
  double delta = 1e-6;
  bool certified = false;
  double runtime_s = 0.0;
  std::uint64_t cells_touched = 0;
  std::vector<double> argmax_curve;
  std::string argmax_measure_hash;
  double argmax_price_mass = 0.0;
  std::vector<std::string> checkpoint_hashes;

  nlohmann::json to_json() const;
};

/// Runs the search and assembles the certificate. The verdict is
/// M + err <= 1 - delta.
BoundCertificate certify_lower_bound(const DPParams& p, const DPOptions& options = {},
                                     double delta = 1e-6);

/// Binary checkpoint: header (magic, version, params hash, stage, prune flag,
/// cell count), the value table, then optional backpointer tables.
void checkpoint_save(const DPStage& stage, const DPParams& p,
                     const std::filesystem::path& path);
/// Throws CheckpointError on a bad file and "checkpoint/params mismatch" when
/// the file belongs to other parameters.
DPStage checkpoint_load(const std::filesystem::path& path, const DPParams& p);

/// FNV-1a digest of a value table, as 16 hex digits.
std::string table_hash(std::span<const double> values);

}  // namespace tradecert
