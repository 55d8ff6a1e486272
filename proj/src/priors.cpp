#include "camp/priors.hpp"

#include <algorithm>
#include <numbers>

namespace camp {
namespace {

double log_normal_pdf(double x, double mean, double var) {
  const double r = x - mean;
  return -0.5 * (r * r / var + std::log(2.0 * std::numbers::pi * var));
}

// Weighted mean/variance of the points xs, weights given in log form.
// Shifts by the max log-weight before exponentiating. `logw` is overwritten
// with the shifted linear weights.
OracleMoments log_weighted_moments(std::span<const double> xs, std::span<double> logw) {
  double top = -std::numeric_limits<double>::infinity();
  for (double lw : logw) top = std::max(top, lw);
  if (!std::isfinite(top)) throw DegenerateMeasure();

  double z = 0.0, s1 = 0.0;
  for (std::size_t j = 0; j < xs.size(); ++j) {
    logw[j] = std::exp(logw[j] - top);
    z += logw[j];
    s1 += logw[j] * xs[j];
  }
  const double mean = s1 / z;
  double s2 = 0.0;
  for (std::size_t j = 0; j < xs.size(); ++j) {
    const double r = xs[j] - mean;
    s2 += logw[j] * r * r;
  }
  return {mean, s2 / z, top + std::log(z)};
}

using GainArray = Eigen::Array<double, kGainQuadratureNodes, 1>;

struct LogRule {
  GainArray nodes;
  GainArray log_weights;
};

const LogRule& gain_rule() {
  static const LogRule rule = [] {
    const QuadratureRule gl = gauss_legendre(kGainQuadratureNodes);
    LogRule r;
    for (int j = 0; j < kGainQuadratureNodes; ++j) {
      r.nodes(j) = gl.nodes[j];
      r.log_weights(j) = std::log(gl.weights[j]);
    }
    return r;
  }();
  return rule;
}

}  // namespace

PosteriorStats signal_posterior_moments(const GaussBernoulliPrior& prior, double sigma2, double R) {
  if (!(sigma2 > 0.0)) throw ConfigError("signal_posterior_moments: sigma2 must be > 0");

  const double s = prior.variance;
  const double slab_mean = (prior.mean * sigma2 + R * s) / (s + sigma2);
  const double slab_var = s * sigma2 / (s + sigma2);

  double pi_slab = 1.0;
  if (prior.rho < 1.0) {
    // log-odds slab vs spike, both marginal densities of R
    const double log_slab = std::log(prior.rho) + log_normal_pdf(R, prior.mean, s + sigma2);
    const double log_spike = std::log1p(-prior.rho) + log_normal_pdf(R, 0.0, sigma2);
    pi_slab = 1.0 / (1.0 + std::exp(log_spike - log_slab));
  }

  const double mean = pi_slab * slab_mean;
  // pi v1 + pi (1 - pi) mu1^2, written without cancellation
  const double var = pi_slab * slab_var + pi_slab * (1.0 - pi_slab) * slab_mean * slab_mean;
  return {mean, std::max(var, 0.0)};
}

QuadratureRule gauss_legendre(int n) {
  if (n < 1) throw ConfigError("gauss_legendre: n must be >= 1");
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  return rule;
}

GainMoments gain_posterior_moments(const UniformGainPrior& prior, int P, double C2, double T) {
  if (!(C2 > 0.0)) throw ConfigError("gain_posterior_moments: C2 must be > 0");
  if (P < 0) throw ConfigError("gain_posterior_moments: P must be >= 0");
  prior.validate();
  if (prior.is_point_mass()) return {prior.center, 0.0};

  const double lo = prior.lower();
  const double hi = prior.upper();
  const double C = std::sqrt(C2);

  // Log-integrand P ln d - (d - T)^2 / (2 C2) is concave on d > 0 with
  // curvature at most -1/C2, so the mass sits within a few C of its
  // constrained maximiser. Integrate only over that window so that narrow
  // peaks stay resolved.
  double peak = T;
  if (P > 0) {
    const double disc = std::sqrt(T * T + 4.0 * P * C2);
    peak = T >= 0.0 ? 0.5 * (T + disc) : 2.0 * P * C2 / (disc - T);
  }
  double half = 15.0 * C;
  if (peak <= lo || peak >= hi) {
    peak = std::clamp(peak, lo, hi);
    const double slope = std::abs(P / peak - (peak - T) / C2);
    if (slope > 0.0) half = std::min(half, 40.0 / slope);
  }
  const double a = std::max(lo, peak - half);
  const double b = std::min(hi, peak + half);

  const LogRule& rule = gain_rule();
  const double mid = 0.5 * (a + b);
  const double rad = 0.5 * (b - a);
  if (!(rad > 0.0)) return {peak, 0.0};

  const GainArray d = mid + rad * rule.nodes;
  GainArray logw = rule.log_weights - (0.5 / C2) * (d - T).square();
  if (P > 0) logw += P * d.log();
  const double top = logw.maxCoeff();
  if (!std::isfinite(top)) throw DegenerateMeasure();
  const GainArray w = (logw - top).exp();
  const double z = w.sum();
  const double mean = (w * d).sum() / z;
  const double var = (w * (d - mean).square()).sum() / z;
  return {std::clamp(mean, lo, hi), std::max(var, 0.0)};
}

OracleMoments quadrature_oracle(const std::function<double(double)>& log_weight,
                                Interval support, int nodes, std::span<const Atom> atoms) {
  if (nodes < 2) throw ConfigError("quadrature_oracle: need at least 2 nodes");
  if (!(support.lo < support.hi)) throw ConfigError("quadrature_oracle: empty support");
  if (std::isinf(support.lo) != std::isinf(support.hi))
    throw ConfigError("quadrature_oracle: half-infinite supports are not supported");

  std::vector<double> xs, logw;
  xs.reserve(nodes + atoms.size());
  logw.reserve(nodes + atoms.size());

  if (support.is_real_line()) {
    // x = t / (1 - t^2), dx = (1 + t^2) / (1 - t^2)^2 dt, endpoints excluded
    const double h = 2.0 / (nodes + 1);
    for (int j = 1; j <= nodes; ++j) {
      const double t = -1.0 + j * h;
      const double u = 1.0 - t * t;
      const double x = t / u;
      xs.push_back(x);
      logw.push_back(std::log(h * (1.0 + t * t) / (u * u)) + log_weight(x));
    }
  } else {
    const double h = (support.hi - support.lo) / (nodes - 1);
    for (int j = 0; j < nodes; ++j) {
      const double x = support.lo + j * h;
      const double w = (j == 0 || j == nodes - 1) ? 0.5 * h : h;
      xs.push_back(x);
      logw.push_back(std::log(w) + log_weight(x));
    }
  }
  for (const auto& atom : atoms) {
    xs.push_back(atom.x);
    logw.push_back(atom.log_mass);
  }
  for (double& lw : logw)
    if (std::isnan(lw)) lw = -std::numeric_limits<double>::infinity();
  return log_weighted_moments(xs, logw);
}

}  // namespace camp
