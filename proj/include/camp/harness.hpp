#pragma once

// Sweep engine for phase-diagram experiments.
//
// A sweep runs the solver on freshly generated instances for every point of
// the product grid alpha x rho x P x sigma2 x N, `replicates` times each. The
// instance seed of a replicate depends only on (base_seed, alpha index,
// rho index, replicate), so results do not depend on the thread count or the
// order in which cells are executed, and cells that differ only in P, sigma2,
// N or solver options reuse the same seeds.

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "camp/solver.hpp"

namespace camp {

struct SweepAxes {
  std::vector<double> alpha;
  std::vector<double> rho;
  std::vector<int> P;
  std::vector<double> sigma2;
  std::vector<int> N;
};

struct SolverOverrides {
  double damping = 0.5;
  double crit_tol = 1e-13;
  double delta_reg = 1e-17;
  int stall_window = 100;
  int max_iters = 2000;
  double inflation_factor = kDefaultGainInflation;
  GainMode gain_mode = GainMode::kBlind;
  UpdateSchedule schedule = UpdateSchedule::kProjectionFirst;
};

struct SweepSpec {
  SweepAxes axes;
  int replicates = 1;
  std::uint64_t base_seed = 0;
  SolverOverrides solver;
  double success_threshold = 1e-8;

  void validate() const;
};

void to_json(nlohmann::json& j, const SweepSpec& spec);
void from_json(const nlohmann::json& j, SweepSpec& spec);
SweepSpec load_sweep_spec(const std::string& path);

/// Smallest dimension accepted on the N axis.
inline constexpr int kMinSweepN = 16;

/// Pr / (P - 1); +inf for P = 1.
double alpha_min(int P, double rho);

/// round(alpha N), the number of sensors used for a cell.
int sensors_for(double alpha, int N);
/// round(rho N), the nominal number of non-zeros per signal.
int nonzeros_for(double rho, int N);

/// Seed of one replicate.
std::uint64_t replicate_seed(std::uint64_t base_seed, std::size_t alpha_index,
                             std::size_t rho_index, int replicate);

/// Outcome label of a replicate: a SolveStatus name, or "diverged".
inline constexpr const char* kDivergedStatus = "diverged";

struct RunRecord {
  double alpha = 0.0;
  double rho = 0.0;
  int P = 1;
  double sigma2 = 0.0;
  int N = 0;
  int replicate = 0;
  std::uint64_t seed = 0;
  double mse_corr = std::numeric_limits<double>::infinity();
  int iterations = 0;
  std::string status;
};

struct CellKey {
  double alpha, rho;
  int P;
  double sigma2;
  int N;
  auto operator<=>(const CellKey&) const = default;
};

struct CellAggregate {
  CellKey key{};
  int replicates = 0;
  int successes = 0;
  double success_rate = 0.0;
  /// Mean of log10(max(mse_corr, kMseFloor)).
  double mean_log10_mse = 0.0;
  /// Mean iterations over successful replicates; NaN when there are none.
  double mean_iterations_success = std::numeric_limits<double>::quiet_NaN();
  double alpha_min = 0.0;
};

/// MSE values are floored here before taking log10.
inline constexpr double kMseFloor = 1e-300;

struct GridResult {
  std::vector<RunRecord> rows;        // cell-major, replicate-minor
  std::vector<CellAggregate> cells;   // in the same cell order as rows
  double success_threshold = 1e-8;

  const CellAggregate& cell(const CellKey& key) const;
};

/// Recomputes per-cell aggregates from raw rows.
std::vector<CellAggregate> aggregate(const std::vector<RunRecord>& rows, double success_threshold);

/// Builds the generation and solver configuration of one replicate.
GenerationConfig generation_config_for(double alpha, double rho, int P, double sigma2, int N,
                                       std::uint64_t seed);
SolverConfig solver_config_for(const SweepSpec& spec, const GenerationConfig& gen);

/// Runs every cell of the grid on `threads` workers (>= 1).
GridResult run_sweep(const SweepSpec& spec, int threads = 1);

/// alpha x rho grid at fixed (P, sigma2, N).
GridResult run_phase_diagram(const SweepSpec& spec, int threads = 1);
/// alpha x N grid at fixed (rho, P, sigma2).
GridResult run_transition_profile(const SweepSpec& spec, int threads = 1);
/// sigma2 x P grid at fixed (rho, alpha, N).
GridResult run_sigma_p_diagram(const SweepSpec& spec, int threads = 1);

// ---------------------------------------------------------------------------
// Grid CSV: header alpha,rho,P,sigma2,N,seed,mse_corr,iterations,converged,
// floats with 17 significant digits, one row per replicate.

inline constexpr const char* kGridCsvHeader =
    "alpha,rho,P,sigma2,N,seed,mse_corr,iterations,converged";

void write_grid_csv(std::ostream& out, const std::vector<RunRecord>& rows);
void write_grid_csv(const std::string& path, const std::vector<RunRecord>& rows);
std::vector<RunRecord> read_grid_csv(const std::string& path);

/// An overlay line for `annotate`: either a constant alpha or a table of
/// (rho, alpha) points interpolated linearly in rho.
struct ReferenceLine {
  std::string name;
  std::map<double, double> alpha_of_rho;

  double at(double rho) const;
  static ReferenceLine constant(std::string name, double alpha);
  /// CSV with header "rho,alpha".
  static ReferenceLine from_table(std::string name, const std::string& path);
};

/// Copies a grid CSV, appending an alpha_min column and one column per line.
void annotate_grid_csv(const std::string& in_path, const std::string& out_path,
                       const std::vector<ReferenceLine>& lines);

// ---------------------------------------------------------------------------
// Transition analysis

/// Success probability modelled as 1 / (1 + exp(-(alpha - center) / width)).
struct LogisticFit {
  double center = 0.0;
  double width = 0.0;
  /// d(rate)/d(alpha) at the 50% crossing, 1 / (4 width).
  double slope() const { return 0.25 / width; }
};

/// Maximum-likelihood fit to binomial counts. Needs at least one success and
/// one failure overall; throws ConfigError otherwise.
LogisticFit fit_logistic(const std::vector<double>& alpha, const std::vector<int>& successes,
                         const std::vector<int>& trials);

}  // namespace camp
