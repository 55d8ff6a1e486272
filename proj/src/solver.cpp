#include "camp/solver.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

namespace camp {
namespace {

constexpr double kSigma2Max = 1e18;

bool all_finite(const Matrix& m) { return m.allFinite(); }
bool all_finite(const Vector& v) { return v.allFinite(); }

void damp(Matrix& target, const Matrix& fresh, double damping) {
  target = damping * fresh + (1.0 - damping) * target;
}
void damp(Vector& target, const Vector& fresh, double damping) {
  target = damping * fresh + (1.0 - damping) * target;
}

}  // namespace

std::string to_string(GainMode mode) { return mode == GainMode::kBlind ? "blind" : "known"; }

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::kConverged: return "converged";
    case SolveStatus::kStalled: return "stalled";
    case SolveStatus::kMaxIters: return "max_iters";
  }
  return "unknown";
}

std::string to_string(UpdateSchedule schedule) {
  return schedule == UpdateSchedule::kProjectionFirst ? "projection_first" : "messages_first";
}

UpdateSchedule parse_schedule(const std::string& s) {
  if (s == "projection_first") return UpdateSchedule::kProjectionFirst;
  if (s == "messages_first") return UpdateSchedule::kMessagesFirst;
  throw ConfigError("schedule must be 'projection_first' or 'messages_first', got '" + s + "'");
}

GainMode parse_gain_mode(const std::string& s) {
  if (s == "blind") return GainMode::kBlind;
  if (s == "known") return GainMode::kKnown;
  throw ConfigError("gain_mode must be 'blind' or 'known', got '" + s + "'");
}

UniformGainPrior assumed_gain_prior(const UniformGainPrior& truth, double inflation) {
  if (!(inflation > 0.0)) throw ConfigError("gain prior inflation must be > 0");
  UniformGainPrior assumed{truth.center, truth.variance * inflation};
  assumed.validate();
  return assumed;
}

void SolverConfig::validate() const {
  if (max_iters < 1) throw ConfigError("max_iters must be >= 1");
  if (!(damping > 0.0 && damping <= 1.0)) throw ConfigError("damping must lie in (0, 1]");
  if (!(delta_reg >= 0.0)) throw ConfigError("delta_reg must be >= 0");
  if (!(noise_variance >= 0.0)) throw ConfigError("noise_variance must be >= 0");
  if (!(crit_tol > 0.0)) throw ConfigError("crit_tol must be > 0");
  if (stall_window < 1) throw ConfigError("stall_window must be >= 1");
  signal_prior.validate();
  gain_prior.validate();
}

nlohmann::json to_json(const SolveResult& r) {
  nlohmann::json j;
  j["converged"] = to_string(r.status);
  j["iterations"] = r.iterations;
  j["crit_final"] = r.crit_final;
  j["mse_corr"] = r.mse_corr ? nlohmann::json(*r.mse_corr) : nlohmann::json(nullptr);
  j["s_hat"] = r.s_hat ? nlohmann::json(*r.s_hat) : nlohmann::json(nullptr);
  return j;
}

void write_crit_trace_csv(const std::string& path, const std::vector<double>& trace) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "iteration,crit\n" << std::setprecision(17);
  for (std::size_t t = 0; t < trace.size(); ++t) out << t + 1 << ',' << trace[t] << '\n';
  if (!out) throw IoError("write failed: " + path);
}

MseCorr compute_mse_corr(const Matrix& a, const Vector& k, const Matrix& X0, const Vector& d0) {
  if (a.rows() != X0.rows() || a.cols() != X0.cols() || k.size() != d0.size())
    throw ConfigError("compute_mse_corr: dimension mismatch");
  if ((k.array() == 0.0).any()) throw ConfigError("compute_mse_corr: zero gain estimate");
  const double s_hat = (d0.array() / k.array()).mean();
  const double mse = (X0 - s_hat * a).squaredNorm() / static_cast<double>(X0.size());
  return {mse, s_hat};
}

double compute_crit(const SolverState& state, const ProblemInstance& instance) {
  const Matrix residual =
      (instance.Y.array().colwise() * state.k.array()).matrix() - instance.F * state.a;
  return residual.squaredNorm() / static_cast<double>(residual.size());
}

const OutputChannel& CampSolver::default_channel() {
  static const ProductChannel channel;
  return channel;
}

CampSolver::CampSolver(const ProblemInstance& instance, SolverConfig config,
                       const OutputChannel& channel)
    : instance_(instance), config_(std::move(config)), channel_(channel) {
  config_.validate();
  if (instance_.F.rows() != instance_.Y.rows() || instance_.F.cols() != instance_.X0.rows())
    throw ConfigError("solver: instance dimensions disagree");
  F2_ = instance_.F.array().square().matrix();
}

SolverState CampSolver::initialize() const {
  const Eigen::Index N = instance_.N(), M = instance_.M(), P = instance_.P();
  SolverState s;
  s.a = Matrix::Constant(N, P, config_.signal_prior.mixture_mean());
  s.v = Matrix::Constant(N, P, std::max(config_.signal_prior.mixture_variance(), kVarianceFloor));
  s.omega = instance_.Y;
  s.V = Matrix::Zero(M, P);
  s.e = Matrix::Zero(M, P);
  s.h = Matrix::Zero(M, P);
  s.Sigma2 = Matrix::Zero(N, P);
  s.R = Matrix::Zero(N, P);
  s.C2 = Vector::Zero(M);
  s.T = Vector::Zero(M);
  if (config_.gain_mode == GainMode::kKnown) {
    s.k = instance_.d0;
    s.l = Vector::Zero(M);
  } else {
    s.k = Vector::Constant(M, config_.gain_prior.center);
    s.l = Vector::Constant(M, config_.gain_prior.variance);
  }
  return s;
}

SolverState CampSolver::at_ground_truth() const {
  SolverState s = initialize();
  s.a = instance_.X0;
  s.v.setConstant(kVarianceFloor);
  s.omega = instance_.F * instance_.X0;
  s.k = instance_.d0;
  s.l.setConstant(config_.gain_mode == GainMode::kKnown ? 0.0 : kVarianceFloor);
  return s;
}

void CampSolver::update_gains(SolverState& s, double delta) const {
  auto field = channel_.gain_field(instance_.Y, s.omega, s.V, delta);
  s.C2 = std::move(field.C2);
  s.T = std::move(field.T);
  const int P = instance_.P();
  Vector k_new(s.k.size()), l_new(s.l.size());
  for (Eigen::Index mu = 0; mu < s.k.size(); ++mu) {
    const auto g = gain_posterior_moments(config_.gain_prior, P, s.C2(mu), s.T(mu));
    k_new(mu) = g.k;
    l_new(mu) = g.l;
  }
  damp(s.k, k_new, config_.damping);
  damp(s.l, l_new, config_.damping);
}

void CampSolver::iterate_once(SolverState& s) const {
  const double delta = config_.channel_delta();
  const Matrix& F = instance_.F;
  const Matrix& Y = instance_.Y;

  s.V = (F2_ * s.v).cwiseMax(kVarianceFloor);

  if (config_.schedule == UpdateSchedule::kProjectionFirst) {
    s.omega = F * s.a - s.V.cwiseProduct(s.e);
    if (config_.gain_mode == GainMode::kBlind) update_gains(s, delta);
    auto msgs = channel_.messages(Y, s.omega, s.V, s.k, s.l, delta);
    s.e = std::move(msgs.e);
    s.h = std::move(msgs.h);
  } else {
    auto msgs = channel_.messages(Y, s.omega, s.V, s.k, s.l, delta);
    s.e = std::move(msgs.e);
    s.h = std::move(msgs.h);
    s.omega = F * s.a - s.V.cwiseProduct(s.e);
    if (config_.gain_mode == GainMode::kBlind) update_gains(s, delta);
  }

  // Sum of F^2 h can dip below zero when l y^2 is large; treat that as an
  // uninformative field.
  const Matrix precision = F2_.transpose() * s.h;
  s.Sigma2 = precision.unaryExpr([](double p) {
    return p > 0.0 ? std::clamp(1.0 / p, kVarianceFloor, kSigma2Max) : kSigma2Max;
  });
  s.R = s.a + s.Sigma2.cwiseProduct(F.transpose() * s.e);

  Matrix a_new(s.a.rows(), s.a.cols()), v_new(s.v.rows(), s.v.cols());
  for (Eigen::Index l = 0; l < s.a.cols(); ++l)
    for (Eigen::Index i = 0; i < s.a.rows(); ++i) {
      const auto post = signal_posterior_moments(config_.signal_prior, s.Sigma2(i, l), s.R(i, l));
      a_new(i, l) = post.mean;
      v_new(i, l) = post.variance;
    }
  damp(s.a, a_new, config_.damping);
  damp(s.v, v_new, config_.damping);
  s.v = s.v.cwiseMax(kVarianceFloor);
  s.l = s.l.cwiseMax(0.0);

  ++s.iter;
  if (!all_finite(s.a) || !all_finite(s.v) || !all_finite(s.omega) || !all_finite(s.k) ||
      !all_finite(s.l) || !all_finite(s.e) || !all_finite(s.h))
    throw DivergenceError(s.iter);
}

double CampSolver::crit(const SolverState& state) const { return compute_crit(state, instance_); }

SolveResult CampSolver::run_from(SolverState state) const {
  SolveResult result;
  double best = std::numeric_limits<double>::infinity();
  int since_best = 0;
  result.a_final = state.a;
  result.k_final = state.k;

  while (state.iter < config_.max_iters) {
    iterate_once(state);
    const double c = crit(state);
    if (!std::isfinite(c)) throw DivergenceError(state.iter);
    state.crit_trace.push_back(c);

    if (c < best) {
      best = c;
      since_best = 0;
      result.a_final = state.a;
      result.k_final = state.k;
      result.best_iteration = state.iter;
    } else {
      ++since_best;
    }

    if (c < config_.crit_tol) {
      result.status = SolveStatus::kConverged;
      break;
    }
    if (since_best >= config_.stall_window) {
      result.status = SolveStatus::kStalled;
      break;
    }
  }

  result.iterations = state.iter;
  result.crit_final = best;
  result.crit_trace = std::move(state.crit_trace);
  if (instance_.X0.size() > 0 && instance_.d0.size() == result.k_final.size() &&
      !(result.k_final.array() == 0.0).any()) {
    const auto m = compute_mse_corr(result.a_final, result.k_final, instance_.X0, instance_.d0);
    result.mse_corr = m.mse_corr;
    result.s_hat = m.s_hat;
  }
  return result;
}

SolveResult solve(const ProblemInstance& instance, const SolverConfig& config) {
  return CampSolver(instance, config).run();
}

}  // namespace camp
