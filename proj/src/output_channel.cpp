#include "camp/output_channel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace camp {

OutputMessages product_eh(const Matrix& Y, const Matrix& omega, const Matrix& V, const Vector& k,
                          const Vector& l, double delta) {
  const Eigen::Index M = Y.rows(), P = Y.cols();
  if (omega.rows() != M || omega.cols() != P || V.rows() != M || V.cols() != P ||
      k.size() != M || l.size() != M)
    throw ChannelError("product_eh: dimension mismatch");

  OutputMessages out{Matrix(M, P), Matrix(M, P)};
  for (Eigen::Index n = 0; n < P; ++n) {
    for (Eigen::Index mu = 0; mu < M; ++mu) {
      const double s = V(mu, n) + delta;
      if (!(s > 0.0)) throw ChannelError("product_eh: V + delta must be > 0");
      const double y = Y(mu, n);
      out.e(mu, n) = (k(mu) * y - omega(mu, n)) / s;
      out.h(mu, n) = 1.0 / s - l(mu) * y * y / (s * s);
    }
  }
  return out;
}

GainField gain_CT(const Matrix& Y, const Matrix& omega, const Matrix& V, double delta) {
  const Eigen::Index M = Y.rows(), P = Y.cols();
  if (omega.rows() != M || omega.cols() != P || V.rows() != M || V.cols() != P)
    throw ChannelError("gain_CT: dimension mismatch");

  GainField out{Vector(M), Vector(M)};
  for (Eigen::Index mu = 0; mu < M; ++mu) {
    double precision = 0.0, field = 0.0;
    for (Eigen::Index n = 0; n < P; ++n) {
      const double s = V(mu, n) + delta;
      if (!(s > 0.0)) throw ChannelError("gain_CT: V + delta must be > 0");
      const double y = Y(mu, n);
      precision += y * y / s;
      field += y * omega(mu, n) / s;
    }
    if (!(precision > 0.0) || !std::isfinite(1.0 / precision)) throw UninformativeSensor(mu);
    out.C2(mu) = 1.0 / precision;
    out.T(mu) = field / precision;
  }
  return out;
}

double numeric_G(std::span<const double> y, std::span<const double> omega,
                 std::span<const double> V, double theta, const UniformGainPrior& prior,
                 double delta, int quad_nodes) {
  if (y.size() != omega.size() || y.size() != V.size())
    throw ChannelError("numeric_G: row lengths differ");
  prior.validate();

  auto log_integrand = [&](double d) {
    double acc = theta * d;
    for (std::size_t n = 0; n < y.size(); ++n) {
      const double s = V[n] + delta;
      if (!(s > 0.0)) throw ChannelError("numeric_G: V + delta must be > 0");
      const double r = y[n] * d - omega[n];
      acc += std::log(std::abs(d)) + 0.5 * std::log(V[n] / s) - 0.5 * r * r / s;
    }
    return acc;
  };

  if (prior.is_point_mass()) return log_integrand(prior.center);

  const QuadratureRule rule = gauss_legendre(quad_nodes);
  const double mid = prior.center;
  const double rad = prior.half_width();
  std::vector<double> terms(rule.nodes.size());
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < terms.size(); ++j) {
    // uniform density 1 / (2 rad) times the Jacobian rad of the map to [-1, 1]
    terms[j] = std::log(0.5 * rule.weights[j]) + log_integrand(mid + rad * rule.nodes[j]);
    top = std::max(top, terms[j]);
  }
  if (!std::isfinite(top)) throw DegenerateMeasure();
  double sum = 0.0;
  for (double t : terms) sum += std::exp(t - top);
  return top + std::log(sum);
}

}  // namespace camp
