// camp: generate blind-calibration instances, solve them with C-AMP, and run
// phase-diagram sweeps.
//
// Exit codes: 0 success, 1 solver failure, 2 configuration error, 3 I/O error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "camp/harness.hpp"
#include "camp/solver.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitSolver = 1;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw camp::IoError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw camp::ConfigError(path + ": " + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw camp::IoError("cannot open " + path + " for writing");
  out << text;
  if (!out) throw camp::IoError("write failed: " + path);
}

struct GenerateArgs {
  std::string config_path;
  camp::GenerationConfig config;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
};

camp::GenerationConfig resolve_generation(const GenerateArgs& args) {
  camp::GenerationConfig cfg = args.config;
  if (!args.config_path.empty()) cfg = read_json_file(args.config_path).get<camp::GenerationConfig>();
  if (args.seed) cfg.seed = *args.seed;
  cfg.validate();
  return cfg;
}

void add_generation_flags(CLI::App* cmd, GenerateArgs& args) {
  cmd->add_option("--config", args.config_path, "generation config JSON")->check(CLI::ExistingFile);
  cmd->add_option("--N", args.config.N, "signal dimension");
  cmd->add_option("--M", args.config.M, "number of sensors");
  cmd->add_option("--P", args.config.P, "number of signals");
  cmd->add_option("--rho", args.config.signal_prior.rho, "density of non-zeros");
  cmd->add_option("--sigma2", args.config.gain_prior.variance, "variance of the gains");
  cmd->add_option("--delta", args.config.delta, "measurement noise variance");
  cmd->add_option("--seed", args.seed, "RNG seed");
}

int cmd_generate(const GenerateArgs& args) {
  const auto cfg = resolve_generation(args);
  const auto inst = camp::generate_instance(cfg);
  std::error_code ec;
  fs::create_directories(args.out_dir, ec);
  if (ec) throw camp::IoError("cannot create " + args.out_dir + ": " + ec.message());
  const fs::path dir(args.out_dir);
  write_text((dir / "config.json").string(), json(cfg).dump(2) + "\n");
  camp::write_matrix_csv((dir / "F.csv").string(), inst.F);
  camp::write_matrix_csv((dir / "X0.csv").string(), inst.X0);
  camp::write_matrix_csv((dir / "d0.csv").string(), inst.d0);
  camp::write_matrix_csv((dir / "Y.csv").string(), inst.Y);
  std::cout << "wrote instance N=" << cfg.N << " M=" << cfg.M << " P=" << cfg.P << " to "
            << args.out_dir << "\n";
  return 0;
}

camp::ProblemInstance load_instance_dir(const std::string& dir, camp::GenerationConfig& cfg) {
  const fs::path d(dir);
  cfg = read_json_file((d / "config.json").string()).get<camp::GenerationConfig>();
  cfg.validate();
  camp::ProblemInstance inst;
  inst.F = camp::read_matrix_csv((d / "F.csv").string());
  inst.X0 = camp::read_matrix_csv((d / "X0.csv").string());
  const camp::Matrix d0 = camp::read_matrix_csv((d / "d0.csv").string());
  inst.Y = camp::read_matrix_csv((d / "Y.csv").string());
  if (d0.cols() != 1) throw camp::IoError("d0.csv must hold a single column");
  inst.d0 = d0.col(0);
  inst.delta = cfg.delta;
  inst.seed = cfg.seed;
  if (inst.F.rows() != cfg.M || inst.F.cols() != cfg.N || inst.Y.rows() != cfg.M ||
      inst.Y.cols() != cfg.P || inst.X0.rows() != cfg.N || inst.X0.cols() != cfg.P ||
      inst.d0.size() != cfg.M)
    throw camp::IoError("instance files in " + dir + " disagree with config.json");
  return inst;
}

struct SolveArgs {
  GenerateArgs gen;
  std::string instance_dir;
  camp::SweepSpec overrides;  // only .solver is used
  std::string gain_mode = "blind";
  std::string schedule = "projection_first";
  std::string trace_path;
  std::string out_path;
};

int cmd_solve(SolveArgs& args) {
  camp::GenerationConfig cfg;
  camp::ProblemInstance inst;
  if (!args.instance_dir.empty()) {
    inst = load_instance_dir(args.instance_dir, cfg);
  } else {
    cfg = resolve_generation(args.gen);
    inst = camp::generate_instance(cfg);
  }
  args.overrides.solver.gain_mode = camp::parse_gain_mode(args.gain_mode);
  args.overrides.solver.schedule = camp::parse_schedule(args.schedule);
  const auto solver_cfg = camp::solver_config_for(args.overrides, cfg);

  camp::SolveResult result;
  try {
    result = camp::solve(inst, solver_cfg);
  } catch (const camp::DivergenceError& e) {
    std::cerr << "camp: " << e.what() << "\n";
    return kExitSolver;
  }
  if (!args.trace_path.empty()) camp::write_crit_trace_csv(args.trace_path, result.crit_trace);
  const std::string text = camp::to_json(result).dump(2) + "\n";
  if (args.out_path.empty())
    std::cout << text;
  else
    write_text(args.out_path, text);
  return 0;
}

struct SweepArgs {
  std::string spec_path;
  std::string out_path;
  int threads = 1;
  std::optional<std::uint64_t> seed;
};

int cmd_sweep(const SweepArgs& args) {
  auto spec = camp::load_sweep_spec(args.spec_path);
  if (args.seed) spec.base_seed = *args.seed;
  const auto grid = camp::run_sweep(spec, args.threads);
  camp::write_grid_csv(args.out_path, grid.rows);
  for (const auto& c : grid.cells) {
    std::cerr << "alpha=" << c.key.alpha << " rho=" << c.key.rho << " P=" << c.key.P
              << " sigma2=" << c.key.sigma2 << " N=" << c.key.N << "  success " << c.successes
              << "/" << c.replicates << "  mean log10 mse " << c.mean_log10_mse << "\n";
  }
  return 0;
}

struct AnnotateArgs {
  std::string csv_path;
  std::string out_path;
  std::vector<std::string> refs;
  std::vector<std::string> ref_tables;
};

std::pair<std::string, std::string> split_assignment(const std::string& s) {
  const auto eq = s.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == s.size())
    throw camp::ConfigError("expected NAME=VALUE, got '" + s + "'");
  return {s.substr(0, eq), s.substr(eq + 1)};
}

int cmd_annotate(const AnnotateArgs& args) {
  std::vector<camp::ReferenceLine> lines;
  for (const auto& r : args.refs) {
    auto [name, value] = split_assignment(r);
    double alpha = 0.0;
    try {
      alpha = std::stod(value);
    } catch (const std::exception&) {
      throw camp::ConfigError("reference line " + name + ": not a number: " + value);
    }
    lines.push_back(camp::ReferenceLine::constant(name, alpha));
  }
  for (const auto& r : args.ref_tables) {
    auto [name, path] = split_assignment(r);
    lines.push_back(camp::ReferenceLine::from_table(name, path));
  }
  camp::annotate_grid_csv(args.csv_path, args.out_path, lines);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Blind calibration with calibration-AMP"};
  app.require_subcommand(1);

  GenerateArgs gen_args;
  auto* generate = app.add_subcommand("generate", "write a random instance to a directory");
  add_generation_flags(generate, gen_args);
  generate->add_option("--out", gen_args.out_dir, "output directory")->required();

  SolveArgs solve_args;
  auto* solve = app.add_subcommand("solve", "solve one instance and print the result as JSON");
  add_generation_flags(solve, solve_args.gen);
  solve->add_option("--instance", solve_args.instance_dir, "instance directory from 'generate'")
      ->check(CLI::ExistingDirectory);
  auto& so = solve_args.overrides.solver;
  solve->add_option("--damping", so.damping, "damping factor in (0, 1]");
  solve->add_option("--crit-tol", so.crit_tol, "convergence threshold on crit");
  solve->add_option("--delta-reg", so.delta_reg, "variance stabilizer");
  solve->add_option("--stall-window", so.stall_window, "iterations without improvement");
  solve->add_option("--max-iters", so.max_iters, "iteration cap");
  solve->add_option("--inflation", so.inflation_factor, "assumed / true gain variance");
  solve->add_option("--gain-mode", solve_args.gain_mode, "blind or known");
  solve->add_option("--schedule", solve_args.schedule, "projection_first or messages_first");
  solve->add_option("--trace", solve_args.trace_path, "write the crit trace to this CSV");
  solve->add_option("--out", solve_args.out_path, "write the JSON here instead of stdout");

  SweepArgs sweep_args;
  auto* sweep = app.add_subcommand("sweep", "run a sweep spec and write the grid CSV");
  sweep->add_option("--spec", sweep_args.spec_path, "sweep spec JSON")->required();
  sweep->add_option("--out", sweep_args.out_path, "grid CSV")->required();
  sweep->add_option("--threads", sweep_args.threads, "worker threads")->check(CLI::PositiveNumber);
  sweep->add_option("--seed", sweep_args.seed, "override base_seed");

  AnnotateArgs ann_args;
  auto* annotate = app.add_subcommand("annotate", "append alpha_min and reference lines to a grid CSV");
  annotate->add_option("--csv", ann_args.csv_path, "grid CSV")->required();
  annotate->add_option("--out", ann_args.out_path, "annotated CSV")->required();
  annotate->add_option("--ref", ann_args.refs, "constant line NAME=ALPHA");
  annotate->add_option("--ref-table", ann_args.ref_tables, "line NAME=PATH, CSV 'rho,alpha'");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*generate) return cmd_generate(gen_args);
    if (*solve) return cmd_solve(solve_args);
    if (*sweep) return cmd_sweep(sweep_args);
    if (*annotate) return cmd_annotate(ann_args);
  } catch (const camp::ConfigError& e) {
    std::cerr << "camp: configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const camp::IoError& e) {
    std::cerr << "camp: I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "camp: " << e.what() << "\n";
    return kExitSolver;
  }
  return kExitConfig;
}
