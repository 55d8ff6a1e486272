#pragma once

// Posterior-moment ("denoising") functions of the C-AMP input side.
//
// Signals:  M_X(x) ∝ P_X(x) exp(-(x - R)^2 / (2 Sigma2)),  P_X Gauss-Bernoulli.
// Gains:    M_D(d) ∝ P_D(d) |d|^P exp(-(d - T)^2 / (2 C2)), P_D uniform.
//
// The signal moments are closed form. The gain moments use a Gauss-Legendre
// rule. quadrature_oracle() is a brute-force integrator kept independent of
// both, for validation.

#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "camp/problem_model.hpp"

namespace camp {

/// Variances below this are replaced by it before being used downstream.
inline constexpr double kVarianceFloor = 1e-18;

/// A measure's weight collapsed to nothing (all log-weights are -inf).
class DegenerateMeasure : public std::runtime_error {
 public:
  DegenerateMeasure() : std::runtime_error("degenerate measure") {}
};

struct PosteriorStats {
  double mean = 0.0;
  double variance = 0.0;
};

/// Posterior mean (k) and variance (l) of a sensor gain.
struct GainMoments {
  double k = 0.0;
  double l = 0.0;
};

/// Mean and variance of x under M_X. Throws ConfigError if sigma2 <= 0.
PosteriorStats signal_posterior_moments(const GaussBernoulliPrior& prior, double sigma2, double R);

/// Mean and variance of d under M_D, P signals contributing the |d|^P tilt.
/// Throws ConfigError if C2 <= 0 or the prior support is invalid.
GainMoments gain_posterior_moments(const UniformGainPrior& prior, int P, double C2, double T);

/// Number of Gauss-Legendre nodes used by gain_posterior_moments.
inline constexpr int kGainQuadratureNodes = 512;

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
QuadratureRule gauss_legendre(int n);

// ---------------------------------------------------------------------------
// Validation oracle

struct Interval {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  bool is_real_line() const { return std::isinf(lo) && std::isinf(hi); }
};

/// A point mass added on top of the continuous part, with log of its mass.
struct Atom {
  double x = 0.0;
  double log_mass = 0.0;
};

struct OracleMoments {
  double mean = 0.0;
  double variance = 0.0;
  double log_normalizer = 0.0;
};

/// Trapezoidal integration of exp(log_weight) over a bounded interval, or
/// over the real line through x = t / (1 - t^2). Atoms are added exactly.
/// Throws DegenerateMeasure when every weight underflows.
OracleMoments quadrature_oracle(const std::function<double(double)>& log_weight,
                                Interval support, int nodes, std::span<const Atom> atoms = {});

}  // namespace camp
