#include "camp/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <mutex>
#include <sstream>
#include <thread>

namespace camp {
namespace {

template <typename T>
void require_nonempty(const std::vector<T>& axis, const char* name) {
  if (axis.empty()) throw ConfigError(std::string("sweep axis '") + name + "' is empty");
}

std::string format_double(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_double(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const double x = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return x;
  } catch (const std::exception&) {
    throw IoError("malformed number '" + s + "' in " + where);
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Spec

void SweepSpec::validate() const {
  require_nonempty(axes.alpha, "alpha");
  require_nonempty(axes.rho, "rho");
  require_nonempty(axes.P, "P");
  require_nonempty(axes.sigma2, "sigma2");
  require_nonempty(axes.N, "N");
  for (double a : axes.alpha)
    if (!(a > 0.0) || !std::isfinite(a)) throw ConfigError("alpha values must be > 0");
  for (double r : axes.rho)
    if (!(r > 0.0 && r <= 1.0)) throw ConfigError("rho values must lie in (0, 1]");
  for (int p : axes.P)
    if (p < 1) throw ConfigError("P values must be >= 1");
  for (double s : axes.sigma2) {
    if (!(s >= 0.0) || !std::isfinite(s)) throw ConfigError("sigma2 values must be >= 0");
    UniformGainPrior{1.0, s * solver.inflation_factor}.validate();
  }
  for (int n : axes.N)
    if (n < kMinSweepN) throw ConfigError("N values must be >= " + std::to_string(kMinSweepN));
  for (double a : axes.alpha)
    for (int n : axes.N)
      if (sensors_for(a, n) < 1) throw ConfigError("round(alpha N) must be >= 1");
  if (replicates < 1) throw ConfigError("replicates must be >= 1");
  if (!(success_threshold > 0.0)) throw ConfigError("success_threshold must be > 0");
  if (!(solver.inflation_factor > 0.0)) throw ConfigError("inflation_factor must be > 0");
  SolverConfig probe;
  probe.damping = solver.damping;
  probe.crit_tol = solver.crit_tol;
  probe.delta_reg = solver.delta_reg;
  probe.stall_window = solver.stall_window;
  probe.max_iters = solver.max_iters;
  probe.validate();
}

void to_json(nlohmann::json& j, const SweepSpec& s) {
  j = nlohmann::json{
      {"axes",
       {{"alpha", s.axes.alpha},
        {"rho", s.axes.rho},
        {"P", s.axes.P},
        {"sigma2", s.axes.sigma2},
        {"N", s.axes.N}}},
      {"replicates", s.replicates},
      {"base_seed", s.base_seed},
      {"solver",
       {{"damping", s.solver.damping},
        {"crit_tol", s.solver.crit_tol},
        {"delta_reg", s.solver.delta_reg},
        {"stall_window", s.solver.stall_window},
        {"max_iters", s.solver.max_iters},
        {"inflation_factor", s.solver.inflation_factor},
        {"gain_mode", to_string(s.solver.gain_mode)},
        {"schedule", to_string(s.solver.schedule)}}},
      {"success_threshold", s.success_threshold}};
}

void from_json(const nlohmann::json& j, SweepSpec& s) {
  try {
    const auto& axes = j.at("axes");
    s.axes.alpha = axes.at("alpha").get<std::vector<double>>();
    s.axes.rho = axes.at("rho").get<std::vector<double>>();
    s.axes.P = axes.at("P").get<std::vector<int>>();
    s.axes.sigma2 = axes.at("sigma2").get<std::vector<double>>();
    s.axes.N = axes.at("N").get<std::vector<int>>();
    s.replicates = j.value("replicates", 1);
    s.base_seed = j.value("base_seed", std::uint64_t{0});
    s.success_threshold = j.value("success_threshold", 1e-8);
    s.solver = SolverOverrides{};
    if (j.contains("solver")) {
      const auto& o = j.at("solver");
      s.solver.damping = o.value("damping", s.solver.damping);
      s.solver.crit_tol = o.value("crit_tol", s.solver.crit_tol);
      s.solver.delta_reg = o.value("delta_reg", s.solver.delta_reg);
      s.solver.stall_window = o.value("stall_window", s.solver.stall_window);
      s.solver.max_iters = o.value("max_iters", s.solver.max_iters);
      s.solver.inflation_factor = o.value("inflation_factor", s.solver.inflation_factor);
      s.solver.gain_mode = parse_gain_mode(o.value("gain_mode", std::string("blind")));
      s.solver.schedule = parse_schedule(o.value("schedule", std::string("projection_first")));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("sweep spec: ") + e.what());
  }
}

SweepSpec load_sweep_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open sweep spec " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("sweep spec " + path + ": " + e.what());
  }
  auto spec = j.get<SweepSpec>();
  spec.validate();
  return spec;
}

double alpha_min(int P, double rho) {
  if (P <= 1) return std::numeric_limits<double>::infinity();
  return P * rho / (P - 1.0);
}

int sensors_for(double alpha, int N) { return static_cast<int>(std::lround(alpha * N)); }
int nonzeros_for(double rho, int N) { return static_cast<int>(std::lround(rho * N)); }

std::uint64_t replicate_seed(std::uint64_t base_seed, std::size_t alpha_index,
                             std::size_t rho_index, int replicate) {
  std::uint64_t s = mix_seed(base_seed, alpha_index);
  s = mix_seed(s, rho_index);
  return mix_seed(s, static_cast<std::uint64_t>(replicate));
}

// ---------------------------------------------------------------------------
// Running

GenerationConfig generation_config_for(double alpha, double rho, int P, double sigma2, int N,
                                       std::uint64_t seed) {
  GenerationConfig g;
  g.N = N;
  g.M = sensors_for(alpha, N);
  g.P = P;
  g.signal_prior.rho = rho;
  g.gain_prior.variance = sigma2;
  g.delta = 0.0;
  g.seed = seed;
  return g;
}

SolverConfig solver_config_for(const SweepSpec& spec, const GenerationConfig& gen) {
  SolverConfig c;
  c.damping = spec.solver.damping;
  c.crit_tol = spec.solver.crit_tol;
  c.delta_reg = spec.solver.delta_reg;
  c.stall_window = spec.solver.stall_window;
  c.max_iters = spec.solver.max_iters;
  c.gain_mode = spec.solver.gain_mode;
  c.schedule = spec.solver.schedule;
  c.signal_prior = gen.signal_prior;
  c.gain_prior = assumed_gain_prior(gen.gain_prior, spec.solver.inflation_factor);
  return c;
}

namespace {

struct Job {
  std::size_t ia, ir, ip, is, in;
  int replicate;
};

RunRecord run_job(const SweepSpec& spec, const Job& job) {
  RunRecord rec;
  rec.alpha = spec.axes.alpha[job.ia];
  rec.rho = spec.axes.rho[job.ir];
  rec.P = spec.axes.P[job.ip];
  rec.sigma2 = spec.axes.sigma2[job.is];
  rec.N = spec.axes.N[job.in];
  rec.replicate = job.replicate;
  rec.seed = replicate_seed(spec.base_seed, job.ia, job.ir, job.replicate);

  const auto gen = generation_config_for(rec.alpha, rec.rho, rec.P, rec.sigma2, rec.N, rec.seed);
  const auto instance = generate_instance(gen);
  try {
    const auto result = solve(instance, solver_config_for(spec, gen));
    rec.mse_corr = result.mse_corr.value_or(std::numeric_limits<double>::infinity());
    rec.iterations = result.iterations;
    rec.status = to_string(result.status);
  } catch (const DivergenceError& e) {
    rec.mse_corr = std::numeric_limits<double>::infinity();
    rec.iterations = e.iteration();
    rec.status = kDivergedStatus;
  } catch (const ChannelError&) {
    rec.mse_corr = std::numeric_limits<double>::infinity();
    rec.status = kDivergedStatus;
  }
  return rec;
}

}  // namespace

GridResult run_sweep(const SweepSpec& spec, int threads) {
  spec.validate();
  if (threads < 1) throw ConfigError("threads must be >= 1");

  std::vector<Job> jobs;
  const auto& ax = spec.axes;
  for (std::size_t ia = 0; ia < ax.alpha.size(); ++ia)
    for (std::size_t ir = 0; ir < ax.rho.size(); ++ir)
      for (std::size_t ip = 0; ip < ax.P.size(); ++ip)
        for (std::size_t is = 0; is < ax.sigma2.size(); ++is)
          for (std::size_t in = 0; in < ax.N.size(); ++in)
            for (int r = 0; r < spec.replicates; ++r) jobs.push_back({ia, ir, ip, is, in, r});

  GridResult grid;
  grid.success_threshold = spec.success_threshold;
  grid.rows.resize(jobs.size());

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      try {
        grid.rows[j] = run_job(spec, jobs[j]);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = jobs.size();
      }
    }
  };

  const int n_workers = std::min<int>(threads, static_cast<int>(jobs.size()));
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < n_workers; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  grid.cells = aggregate(grid.rows, spec.success_threshold);
  return grid;
}

namespace {

void require_single(std::size_t n, const char* axis, const char* program) {
  if (n != 1)
    throw ConfigError(std::string(program) + ": axis '" + axis + "' must hold exactly one value");
}

}  // namespace

GridResult run_phase_diagram(const SweepSpec& spec, int threads) {
  require_single(spec.axes.P.size(), "P", "phase diagram");
  require_single(spec.axes.sigma2.size(), "sigma2", "phase diagram");
  require_single(spec.axes.N.size(), "N", "phase diagram");
  return run_sweep(spec, threads);
}

GridResult run_transition_profile(const SweepSpec& spec, int threads) {
  require_single(spec.axes.rho.size(), "rho", "transition profile");
  require_single(spec.axes.P.size(), "P", "transition profile");
  require_single(spec.axes.sigma2.size(), "sigma2", "transition profile");
  if (spec.axes.alpha.size() < 2)
    throw ConfigError("transition profile: alpha axis needs at least two values");
  return run_sweep(spec, threads);
}

GridResult run_sigma_p_diagram(const SweepSpec& spec, int threads) {
  require_single(spec.axes.rho.size(), "rho", "sigma2-P diagram");
  require_single(spec.axes.alpha.size(), "alpha", "sigma2-P diagram");
  require_single(spec.axes.N.size(), "N", "sigma2-P diagram");
  return run_sweep(spec, threads);
}

std::vector<CellAggregate> aggregate(const std::vector<RunRecord>& rows, double success_threshold) {
  std::vector<CellAggregate> cells;
  std::map<CellKey, std::size_t> index;
  std::vector<double> log_sum, iter_sum;
  for (const auto& r : rows) {
    const CellKey key{r.alpha, r.rho, r.P, r.sigma2, r.N};
    auto [it, inserted] = index.try_emplace(key, cells.size());
    if (inserted) {
      CellAggregate c;
      c.key = key;
      c.alpha_min = alpha_min(r.P, r.rho);
      cells.push_back(c);
      log_sum.push_back(0.0);
      iter_sum.push_back(0.0);
    }
    const std::size_t i = it->second;
    auto& c = cells[i];
    ++c.replicates;
    log_sum[i] += std::log10(std::max(r.mse_corr, kMseFloor));
    if (r.mse_corr < success_threshold) {
      ++c.successes;
      iter_sum[i] += r.iterations;
    }
  }
  for (std::size_t i = 0; i < cells.size(); ++i) {
    auto& c = cells[i];
    c.success_rate = static_cast<double>(c.successes) / c.replicates;
    c.mean_log10_mse = log_sum[i] / c.replicates;
    if (c.successes > 0) c.mean_iterations_success = iter_sum[i] / c.successes;
  }
  return cells;
}

const CellAggregate& GridResult::cell(const CellKey& key) const {
  for (const auto& c : cells)
    if (c.key == key) return c;
  throw ConfigError("no such cell in grid");
}

// ---------------------------------------------------------------------------
// CSV

void write_grid_csv(std::ostream& out, const std::vector<RunRecord>& rows) {
  out << kGridCsvHeader << '\n';
  for (const auto& r : rows) {
    out << format_double(r.alpha) << ',' << format_double(r.rho) << ',' << r.P << ','
        << format_double(r.sigma2) << ',' << r.N << ',' << r.seed << ','
        << format_double(r.mse_corr) << ',' << r.iterations << ',' << r.status << '\n';
  }
}

void write_grid_csv(const std::string& path, const std::vector<RunRecord>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  write_grid_csv(out, rows);
  if (!out) throw IoError("write failed: " + path);
}

std::vector<RunRecord> read_grid_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind(kGridCsvHeader, 0) != 0)
    throw IoError(path + ": not a grid CSV (bad header)");
  std::vector<RunRecord> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() < 9) throw IoError(path + ": short row");
    RunRecord r;
    r.alpha = parse_double(cells[0], path);
    r.rho = parse_double(cells[1], path);
    r.P = static_cast<int>(parse_double(cells[2], path));
    r.sigma2 = parse_double(cells[3], path);
    r.N = static_cast<int>(parse_double(cells[4], path));
    try {
      r.seed = std::stoull(cells[5]);
    } catch (const std::exception&) {
      throw IoError(path + ": malformed seed '" + cells[5] + "'");
    }
    r.mse_corr = parse_double(cells[6], path);
    r.iterations = static_cast<int>(parse_double(cells[7], path));
    r.status = cells[8];
    rows.push_back(std::move(r));
  }
  return rows;
}

ReferenceLine ReferenceLine::constant(std::string name, double alpha) {
  ReferenceLine line;
  line.name = std::move(name);
  line.alpha_of_rho[0.0] = alpha;
  return line;
}

ReferenceLine ReferenceLine::from_table(std::string name, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open reference table " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("rho,alpha", 0) != 0)
    throw IoError(path + ": expected header 'rho,alpha'");
  ReferenceLine ref;
  ref.name = std::move(name);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() < 2) throw IoError(path + ": short row");
    ref.alpha_of_rho[parse_double(cells[0], path)] = parse_double(cells[1], path);
  }
  if (ref.alpha_of_rho.empty()) throw IoError(path + ": empty reference table");
  return ref;
}

double ReferenceLine::at(double rho) const {
  if (alpha_of_rho.size() == 1) return alpha_of_rho.begin()->second;
  auto hi = alpha_of_rho.lower_bound(rho);
  if (hi == alpha_of_rho.begin()) return hi->second;
  if (hi == alpha_of_rho.end()) return std::prev(hi)->second;
  auto lo = std::prev(hi);
  const double t = (rho - lo->first) / (hi->first - lo->first);
  return lo->second + t * (hi->second - lo->second);
}

void annotate_grid_csv(const std::string& in_path, const std::string& out_path,
                       const std::vector<ReferenceLine>& lines) {
  const auto rows = read_grid_csv(in_path);
  std::ifstream in(in_path);
  std::vector<std::string> raw;
  std::string line;
  std::getline(in, line);
  const std::string header = line;
  while (std::getline(in, line))
    if (!line.empty()) raw.push_back(line);

  std::ofstream out(out_path);
  if (!out) throw IoError("cannot open " + out_path + " for writing");
  out << header << ",alpha_min";
  for (const auto& l : lines) out << ',' << l.name;
  out << '\n';
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out << raw[i] << ',' << format_double(alpha_min(rows[i].P, rows[i].rho));
    for (const auto& l : lines) out << ',' << format_double(l.at(rows[i].rho));
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + out_path);
}

// ---------------------------------------------------------------------------
// Logistic fit

LogisticFit fit_logistic(const std::vector<double>& alpha, const std::vector<int>& successes,
                         const std::vector<int>& trials) {
  const std::size_t n = alpha.size();
  if (n < 2 || successes.size() != n || trials.size() != n)
    throw ConfigError("fit_logistic: need >= 2 points with matching counts");
  int total_s = 0, total_t = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (successes[i] < 0 || successes[i] > trials[i]) throw ConfigError("fit_logistic: bad counts");
    total_s += successes[i];
    total_t += trials[i];
  }
  if (total_s == 0 || total_s == total_t)
    throw ConfigError("fit_logistic: need both successes and failures");

  double shift = 0.0;
  for (double a : alpha) shift += a;
  shift /= n;

  // logit p = b0 + b1 (alpha - shift); tiny ridge on b1 keeps separable data finite
  constexpr double ridge = 1e-6;
  auto objective = [&](double b0, double b1) {
    double ll = -ridge * b1 * b1;
    for (std::size_t i = 0; i < n; ++i) {
      const double eta = b0 + b1 * (alpha[i] - shift);
      // log sigma(eta) and log(1 - sigma(eta)), stable
      const double log_p = -std::log1p(std::exp(-std::abs(eta))) + std::min(eta, 0.0);
      const double log_q = log_p - eta;
      ll += successes[i] * log_p + (trials[i] - successes[i]) * log_q;
    }
    return ll;
  };

  double b0 = 0.0, b1 = 1.0;
  double current = objective(b0, b1);
  for (int it = 0; it < 500; ++it) {
    double g0 = 0.0, g1 = -2.0 * ridge * b1;
    double h00 = 0.0, h01 = 0.0, h11 = -2.0 * ridge;
    for (std::size_t i = 0; i < n; ++i) {
      const double x = alpha[i] - shift;
      const double p = 1.0 / (1.0 + std::exp(-(b0 + b1 * x)));
      const double r = successes[i] - trials[i] * p;
      const double w = trials[i] * p * (1.0 - p);
      g0 += r;
      g1 += r * x;
      h00 -= w;
      h01 -= w * x;
      h11 -= w * x * x;
    }
    const double det = h00 * h11 - h01 * h01;
    if (det == 0.0) break;
    double d0 = -(h11 * g0 - h01 * g1) / det;
    double d1 = -(-h01 * g0 + h00 * g1) / det;
    double step = 1.0;
    double trial = objective(b0 + d0, b1 + d1);
    while (trial < current && step > 1e-10) {
      step *= 0.5;
      trial = objective(b0 + step * d0, b1 + step * d1);
    }
    b0 += step * d0;
    b1 += step * d1;
    const bool done = std::abs(trial - current) < 1e-12 * (1.0 + std::abs(current));
    current = trial;
    if (done) break;
  }
  return {shift - b0 / b1, 1.0 / b1};
}

}  // namespace camp
