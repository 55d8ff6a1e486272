#pragma once

// Measurement model for blind calibration:
//
//   y_{mu l} = (sum_i F_{mu i} x_{il} + w_{mu l}) / d_mu,   w ~ N(0, delta)
//
// with P sparse signals sharing one unknown gain per sensor.

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <json.hpp>

namespace camp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Invalid parameters or configuration. The CLI maps this to exit code 2.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// File could not be read or written. The CLI maps this to exit code 3.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Spike-and-slab law: 0 with probability 1 - rho, else N(mean, variance).
struct GaussBernoulliPrior {
  double rho = 1.0;
  double mean = 0.0;
  double variance = 1.0;

  void validate() const;
  /// First two moments of the mixture itself.
  double mixture_mean() const { return rho * mean; }
  double mixture_variance() const {
    return rho * (variance + mean * mean) - mixture_mean() * mixture_mean();
  }
};

/// Uniform law on [center - sqrt(3 variance), center + sqrt(3 variance)].
/// The support has to stay strictly positive since readings are divided by
/// the gain.
struct UniformGainPrior {
  double center = 1.0;
  double variance = 0.0;

  void validate() const;
  double half_width() const;
  double lower() const { return center - half_width(); }
  double upper() const { return center + half_width(); }
  bool is_point_mass() const { return variance == 0.0; }
};

struct GenerationConfig {
  int N = 1;
  int M = 1;
  int P = 1;
  GaussBernoulliPrior signal_prior;
  UniformGainPrior gain_prior;
  double delta = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

void to_json(nlohmann::json& j, const GenerationConfig& c);
void from_json(const nlohmann::json& j, GenerationConfig& c);

struct ProblemInstance {
  Matrix F;   // M x N
  Matrix X0;  // N x P
  Vector d0;  // M
  Matrix Y;   // M x P
  double delta = 0.0;
  std::uint64_t seed = 0;

  int N() const { return static_cast<int>(F.cols()); }
  int M() const { return static_cast<int>(F.rows()); }
  int P() const { return static_cast<int>(Y.cols()); }
};

// Random streams. Every component of an instance draws from its own stream so
// that e.g. the matrix for a seed does not depend on P or on the gain prior.
enum class Stream : std::uint64_t { kMatrix = 1, kSignals = 2, kGains = 3, kNoise = 4 };

std::mt19937_64 make_stream(std::uint64_t seed, Stream stream);

/// splitmix64 finalizer; used to derive child seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

/// iid N(0, 1/N) entries.
Matrix generate_matrix(int N, int M, std::uint64_t seed);
Matrix generate_signals(int N, int P, const GaussBernoulliPrior& prior, std::uint64_t seed);
Vector generate_gains(int M, const UniformGainPrior& prior, std::uint64_t seed);

/// Y = (F X0 + W) ./ d0 row-wise, W iid N(0, delta) drawn from the noise stream of `seed`.
Matrix forward_product_channel(const Matrix& F, const Matrix& X0, const Vector& d0,
                               double delta, std::uint64_t seed);

ProblemInstance generate_instance(const GenerationConfig& config);

/// Debug dumps: CSV with one matrix row per line, 17 significant digits.
void write_matrix_csv(const std::string& path, const Matrix& m);
Matrix read_matrix_csv(const std::string& path);

}  // namespace camp
