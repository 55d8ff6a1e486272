#include "camp/problem_model.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <vector>

namespace camp {

void GaussBernoulliPrior::validate() const {
  if (!(rho > 0.0 && rho <= 1.0)) throw ConfigError("signal prior: rho must lie in (0, 1]");
  if (!(variance > 0.0)) throw ConfigError("signal prior: variance must be positive");
  if (!std::isfinite(mean)) throw ConfigError("signal prior: mean must be finite");
}

double UniformGainPrior::half_width() const { return std::sqrt(3.0 * variance); }

void UniformGainPrior::validate() const {
  if (!(variance >= 0.0) || !std::isfinite(variance))
    throw ConfigError("gain prior: variance must be finite and >= 0");
  if (!std::isfinite(center)) throw ConfigError("gain prior: center must be finite");
  if (lower() <= 0.0) throw ConfigError("gain prior: support must exclude 0");
}

void GenerationConfig::validate() const {
  if (N < 1 || M < 1 || P < 1) throw ConfigError("N, M and P must be >= 1");
  if (!(delta >= 0.0)) throw ConfigError("delta must be >= 0");
  signal_prior.validate();
  gain_prior.validate();
}

void to_json(nlohmann::json& j, const GenerationConfig& c) {
  j = nlohmann::json{{"N", c.N},
                     {"M", c.M},
                     {"P", c.P},
                     {"rho", c.signal_prior.rho},
                     {"sigma2", c.gain_prior.variance},
                     {"delta", c.delta},
                     {"seed", c.seed},
                     {"signal_mean", c.signal_prior.mean},
                     {"signal_variance", c.signal_prior.variance},
                     {"gain_center", c.gain_prior.center}};
}

void from_json(const nlohmann::json& j, GenerationConfig& c) {
  try {
    c.N = j.at("N").get<int>();
    c.M = j.at("M").get<int>();
    c.P = j.at("P").get<int>();
    c.signal_prior.rho = j.at("rho").get<double>();
    c.gain_prior.variance = j.at("sigma2").get<double>();
    c.delta = j.value("delta", 0.0);
    c.seed = j.value("seed", std::uint64_t{0});
    c.signal_prior.mean = j.value("signal_mean", 0.0);
    c.signal_prior.variance = j.value("signal_variance", 1.0);
    c.gain_prior.center = j.value("gain_center", 1.0);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("generation config: ") + e.what());
  }
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::mt19937_64 make_stream(std::uint64_t seed, Stream stream) {
  const auto id = static_cast<std::uint64_t>(stream);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(id)};
  return std::mt19937_64(seq);
}

Matrix generate_matrix(int N, int M, std::uint64_t seed) {
  if (N < 1 || M < 1) throw ConfigError("generate_matrix: N and M must be >= 1");
  auto rng = make_stream(seed, Stream::kMatrix);
  std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(static_cast<double>(N)));
  Matrix F(M, N);
  // Row-major fill so that a matrix's leading rows do not depend on M.
  for (int mu = 0; mu < M; ++mu)
    for (int i = 0; i < N; ++i) F(mu, i) = gauss(rng);
  return F;
}

Matrix generate_signals(int N, int P, const GaussBernoulliPrior& prior, std::uint64_t seed) {
  if (N < 1 || P < 1) throw ConfigError("generate_signals: N and P must be >= 1");
  prior.validate();
  auto rng = make_stream(seed, Stream::kSignals);
  std::bernoulli_distribution nonzero(prior.rho);
  std::normal_distribution<double> slab(prior.mean, std::sqrt(prior.variance));
  Matrix X(N, P);
  for (int l = 0; l < P; ++l)
    for (int i = 0; i < N; ++i) {
      // Both draws always happen so the slab values do not depend on rho.
      const bool on = nonzero(rng);
      const double value = slab(rng);
      X(i, l) = on ? value : 0.0;
    }
  return X;
}

Vector generate_gains(int M, const UniformGainPrior& prior, std::uint64_t seed) {
  if (M < 1) throw ConfigError("generate_gains: M must be >= 1");
  prior.validate();
  Vector d(M);
  if (prior.is_point_mass()) {
    d.setConstant(prior.center);
    return d;
  }
  auto rng = make_stream(seed, Stream::kGains);
  std::uniform_real_distribution<double> unif(prior.lower(), prior.upper());
  for (int mu = 0; mu < M; ++mu) d(mu) = unif(rng);
  return d;
}

Matrix forward_product_channel(const Matrix& F, const Matrix& X0, const Vector& d0,
                               double delta, std::uint64_t seed) {
  if (F.cols() != X0.rows() || F.rows() != d0.size())
    throw ConfigError("forward_product_channel: dimension mismatch");
  if (!(delta >= 0.0)) throw ConfigError("forward_product_channel: delta must be >= 0");
  if ((d0.array() == 0.0).any()) throw ConfigError("forward_product_channel: zero gain");

  Matrix Z = F * X0;
  if (delta > 0.0) {
    auto rng = make_stream(seed, Stream::kNoise);
    std::normal_distribution<double> noise(0.0, std::sqrt(delta));
    for (Eigen::Index l = 0; l < Z.cols(); ++l)
      for (Eigen::Index mu = 0; mu < Z.rows(); ++mu) Z(mu, l) += noise(rng);
  }
  return Z.array().colwise() / d0.array();
}

ProblemInstance generate_instance(const GenerationConfig& config) {
  config.validate();
  ProblemInstance inst;
  inst.F = generate_matrix(config.N, config.M, config.seed);
  inst.X0 = generate_signals(config.N, config.P, config.signal_prior, config.seed);
  inst.d0 = generate_gains(config.M, config.gain_prior, config.seed);
  inst.Y = forward_product_channel(inst.F, inst.X0, inst.d0, config.delta, config.seed);
  inst.delta = config.delta;
  inst.seed = config.seed;
  return inst;
}

void write_matrix_csv(const std::string& path, const Matrix& m) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << std::setprecision(17);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out << ',';
      out << m(r, c);
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

Matrix read_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw IoError("malformed number in " + path + ": '" + cell + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw IoError("ragged matrix in " + path);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) return Matrix(0, 0);
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c];
  return m;
}

}  // namespace camp
