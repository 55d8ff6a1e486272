#pragma once

// Output side of C-AMP. For the product transfer function y = (z + w) / d the
// generating function integrals are Gaussian and the output messages reduce to
//
//   e  = (k y - omega) / (V + delta)
//   h  = 1 / (V + delta) - l y^2 / (V + delta)^2
//   C2 = [sum_n y_n^2 / (V_n + delta)]^-1
//   T  = C2 sum_n y_n omega_n / (V_n + delta)
//
// numeric_G() evaluates the generating function by quadrature and only exists
// to check those closed forms.

#include <span>
#include <stdexcept>
#include <string>

#include "camp/priors.hpp"
#include "camp/problem_model.hpp"

namespace camp {

/// A channel input violated its domain (e.g. V + delta <= 0).
class ChannelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A sensor whose readings are all zero carries no information on its gain.
class UninformativeSensor : public ChannelError {
 public:
  explicit UninformativeSensor(Eigen::Index sensor)
      : ChannelError("uninformative sensor " + std::to_string(sensor)), sensor_(sensor) {}
  Eigen::Index sensor() const { return sensor_; }

 private:
  Eigen::Index sensor_;
};

struct ChannelState {
  Matrix omega;  // M x P
  Matrix V;      // M x P
  Matrix e;      // M x P
  Matrix h;      // M x P
};

struct GainChannelState {
  Vector C2;
  Vector T;
  Vector k;
  Vector l;
};

struct OutputMessages {
  Matrix e;
  Matrix h;
};

struct GainField {
  Vector C2;
  Vector T;
};

OutputMessages product_eh(const Matrix& Y, const Matrix& omega, const Matrix& V, const Vector& k,
                          const Vector& l, double delta);

GainField gain_CT(const Matrix& Y, const Matrix& omega, const Matrix& V, double delta);

/// Interface of a transfer function as seen by the solver.
class OutputChannel {
 public:
  virtual ~OutputChannel() = default;
  virtual OutputMessages messages(const Matrix& Y, const Matrix& omega, const Matrix& V,
                                  const Vector& k, const Vector& l, double delta) const = 0;
  virtual GainField gain_field(const Matrix& Y, const Matrix& omega, const Matrix& V,
                               double delta) const = 0;
};

class ProductChannel final : public OutputChannel {
 public:
  OutputMessages messages(const Matrix& Y, const Matrix& omega, const Matrix& V, const Vector& k,
                          const Vector& l, double delta) const override {
    return product_eh(Y, omega, V, k, l, delta);
  }
  GainField gain_field(const Matrix& Y, const Matrix& omega, const Matrix& V,
                       double delta) const override {
    return gain_CT(Y, omega, V, delta);
  }
};

/// ln ∫ dd P_D(d) prod_n G~(y_n, d, omega_n, V_n) e^{theta d} for one sensor.
///
/// For the product channel the (z, w) integral of G~ is done analytically:
///
///   G~ = |d| sqrt(V / (V + delta)) exp(-(y d - omega)^2 / (2 (V + delta)))
///
/// which is the exact integral with the unnormalised Gaussian weight in z.
/// With a point-mass prior at 1 and delta = 0 this gives
/// G = -sum_n (y_n - omega_n)^2 / (2 V_n); a normalised density convention
/// would differ by the constant -1/2 sum_n ln(2 pi V_n). Derivatives in theta
/// and omega do not depend on the convention.
///
/// The d-integral uses a quad_nodes-point Gauss-Legendre rule over the whole
/// prior support. Intended for small P and validation only.
double numeric_G(std::span<const double> y, std::span<const double> omega,
                 std::span<const double> V, double theta, const UniformGainPrior& prior,
                 double delta, int quad_nodes);

}  // namespace camp
