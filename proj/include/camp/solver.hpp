#pragma once

// Calibration-AMP: joint estimation of P sparse signals and per-sensor gains.

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "camp/output_channel.hpp"
#include "camp/priors.hpp"
#include "camp/problem_model.hpp"

namespace camp {

enum class GainMode { kBlind, kKnown };

enum class SolveStatus { kConverged, kStalled, kMaxIters };

/// Order of the output-side updates inside one sweep.
///
/// kProjectionFirst: omega <- F a - V e_prev, then gains and (e, h) are
///   evaluated at that new omega. This is the usual GAMP ordering.
/// kMessagesFirst: (e, h) are evaluated at the previous omega with the new V,
///   and the same e feeds both the Onsager term and R. Kept for comparison;
///   it does not converge even with known gains.
enum class UpdateSchedule { kProjectionFirst, kMessagesFirst };

std::string to_string(GainMode mode);
std::string to_string(SolveStatus status);
std::string to_string(UpdateSchedule schedule);
UpdateSchedule parse_schedule(const std::string& s);
GainMode parse_gain_mode(const std::string& s);

/// NaN or Inf appeared in the iteration.
class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(int iteration)
      : std::runtime_error("divergence at iteration " + std::to_string(iteration)),
        iteration_(iteration) {}
  int iteration() const { return iteration_; }

 private:
  int iteration_;
};

/// Default ratio between the solver's assumed gain variance and the variance
/// the gains were drawn with.
inline constexpr double kDefaultGainInflation = 1.1;

/// Gain prior used by the solver: same center, variance scaled by `inflation`.
UniformGainPrior assumed_gain_prior(const UniformGainPrior& truth,
                                    double inflation = kDefaultGainInflation);

struct SolverConfig {
  int max_iters = 2000;
  /// new <- damping * new + (1 - damping) * old, applied to a, v, k, l.
  double damping = 0.5;
  /// Variance added to V in every output message.
  double delta_reg = 1e-17;
  /// Assumed measurement-noise variance, on top of delta_reg.
  double noise_variance = 0.0;
  double crit_tol = 1e-13;
  /// Stop after this many iterations without a new minimum of crit.
  int stall_window = 100;
  GaussBernoulliPrior signal_prior;
  UniformGainPrior gain_prior;
  GainMode gain_mode = GainMode::kBlind;
  UpdateSchedule schedule = UpdateSchedule::kProjectionFirst;

  void validate() const;
  double channel_delta() const { return noise_variance + delta_reg; }
};

struct SolverState {
  Matrix a, v;          // N x P
  Matrix omega, V;      // M x P
  Matrix e, h;          // M x P
  Matrix Sigma2, R;     // N x P
  Vector k, l;          // M
  Vector C2, T;         // M
  int iter = 0;
  std::vector<double> crit_trace;
};

struct SolveResult {
  Matrix a_final;
  Vector k_final;
  int iterations = 0;       // iterations performed
  int best_iteration = 0;   // iteration the returned estimate comes from
  SolveStatus status = SolveStatus::kMaxIters;
  double crit_final = 0.0;  // crit of the returned estimate
  std::optional<double> mse_corr;
  std::optional<double> s_hat;
  std::vector<double> crit_trace;
};

/// {converged, iterations, crit_final, mse_corr, s_hat}; missing metrics are null.
nlohmann::json to_json(const SolveResult& result);

/// Writes "iteration,crit" rows.
void write_crit_trace_csv(const std::string& path, const std::vector<double>& trace);

struct MseCorr {
  double mse_corr = 0.0;
  double s_hat = 0.0;
};

/// s_hat = mean(d0 / k), MSE = mean over (i, l) of (x0 - s_hat a)^2.
MseCorr compute_mse_corr(const Matrix& a, const Vector& k, const Matrix& X0, const Vector& d0);

/// (1 / MP) sum (k_mu y_{mu l} - (F a)_{mu l})^2.
double compute_crit(const SolverState& state, const ProblemInstance& instance);

/// Runs C-AMP on one instance. The instance must outlive the solver.
///
/// One sweep (iterate_once) with the default schedule performs, in order:
///   1. V      <- F^2 v
///   2. omega  <- F a - V e            (e from the previous sweep)
///   3. C2, T  <- gain field at the new omega
///   4. k, l   <- gain posterior moments (pinned to d0, 0 in known mode)
///   5. e, h   <- output messages at omega, k, l
///   6. Sigma2 <- 1 / (F^2)^T h,  R <- a + Sigma2 F^T e
///   7. a, v   <- signal posterior moments
/// with damping on a, v, k and l.
class CampSolver {
 public:
  CampSolver(const ProblemInstance& instance, SolverConfig config,
             const OutputChannel& channel = default_channel());

  /// omega = Y, (a, v) and (k, l) set to the prior moments.
  SolverState initialize() const;
  /// State at the ground truth: a = X0, k = d0, omega = F X0, variances at the floor.
  SolverState at_ground_truth() const;

  /// Throws DivergenceError if any field becomes non-finite.
  void iterate_once(SolverState& state) const;
  double crit(const SolverState& state) const;

  SolveResult run() const { return run_from(initialize()); }
  SolveResult run_from(SolverState state) const;

  const SolverConfig& config() const { return config_; }

  static const OutputChannel& default_channel();

 private:
  void update_gains(SolverState& s, double delta) const;

  const ProblemInstance& instance_;
  SolverConfig config_;
  const OutputChannel& channel_;
  Matrix F2_;
};

/// Convenience wrapper: CampSolver(instance, config).run().
SolveResult solve(const ProblemInstance& instance, const SolverConfig& config);

}  // namespace camp
