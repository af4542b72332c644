// varinv: minimization-based EIT reconstruction and its verification harness.
//
// Subcommands: generate | solve | sweep | toy | convexity.
// Configs are JSON validated against schema/runconfig.schema.json; outputs are
// byte-reproducible under a fixed seed (timing goes to the console only).

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "varinv/harness.hpp"
#include "varinv/io.hpp"
#include "varinv/run_config.hpp"

namespace {

varinv::RunConfig load_config(const std::string& path, const std::optional<std::string>& mode,
                              const std::optional<std::uint64_t>& seed) {
  nlohmann::json j = varinv::load_json(path);
  if (mode) j["mode"] = *mode;
  if (seed) j["noise"]["seed"] = *seed;
  return varinv::RunConfig::from_json(j);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"minimization-based EIT inversion (varinv)"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::optional<std::string> mode;
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_path, "run configuration JSON")->required(false);
  app.add_option("--out", out_dir, "output directory (defaults to the config's output_dir)");
  app.add_option("--mode", mode, "override the solve mode (aao-ls | maao-ls | maao-kv)");
  app.add_option("--seed", seed, "override the noise seed");

  auto* generate = app.add_subcommand("generate", "manufacture mesh, truth and boundary data");

  auto* solve = app.add_subcommand("solve", "run one regularized reconstruction");
  std::string data_dir;
  std::string history_name;
  solve->add_option("--data", data_dir, "directory with generate outputs (defaults to --out)");
  solve->add_option("--history", history_name, "also write the iteration history CSV");

  auto* sweep = app.add_subcommand("sweep", "delta -> 0 convergence sweep");
  std::vector<double> deltas;
  sweep->add_option("--deltas", deltas, "noise levels, non-increasing")->delimiter(',');

  auto* toy = app.add_subcommand("toy", "dense toy-problem solvers and sweep");
  std::uint64_t toy_seed = 1;
  int toy_dim = 4;
  double toy_delta = 1e-2;
  double toy_alpha = 1e-2;
  bool toy_sweep = false;
  toy->add_option("--seed", toy_seed, "toy instance seed");
  toy->add_option("--dim", toy_dim, "toy dimension (<= 10)");
  toy->add_option("--delta", toy_delta, "noise level");
  toy->add_option("--alpha", toy_alpha, "regularization weight");
  toy->add_flag("--sweep", toy_sweep, "also run the delta sweep");

  auto* convexity = app.add_subcommand("convexity", "Hessian / nonlinearity diagnostics");
  varinv::ConvexityCmdOptions copts;
  convexity->add_flag("--toy", copts.toy, "run on the linear toy problem");
  convexity->add_flag("--at-solution", copts.at_solution, "evaluate at the solver output");
  convexity->add_flag("--fixpoint", copts.fixpoint, "run the alpha fixed-point iteration");
  convexity->add_option("--max-iter", copts.fixpoint_max_iter, "fixed-point iteration cap");
  convexity->add_option("--samples", copts.ratio_samples, "Monte-Carlo directions");

  CLI11_PARSE(app, argc, argv);

  try {
    if (toy->parsed()) {
      const std::string out = out_dir.empty() ? "out" : out_dir;
      return varinv::cmd_toy(toy_seed, toy_dim, toy_delta, toy_alpha, out, toy_sweep);
    }

    if (config_path.empty()) {
      std::cerr << "--config is required\n";
      return 1;
    }
    const varinv::RunConfig cfg = load_config(config_path, mode, seed);
    const std::string out = out_dir.empty() ? cfg.output_dir : out_dir;

    if (generate->parsed()) return varinv::cmd_generate(cfg, out);
    if (solve->parsed()) {
      const std::string data = data_dir.empty() ? out : data_dir;
      std::optional<std::string> history;
      if (!history_name.empty()) history = history_name;
      return varinv::cmd_solve(cfg, data, out, history);
    }
    if (sweep->parsed()) {
      if (deltas.empty()) {
        std::cerr << "sweep: --deltas is required\n";
        return 1;
      }
      return varinv::cmd_sweep(cfg, deltas, out);
    }
    if (convexity->parsed()) return varinv::cmd_convexity(cfg, out, copts);
  } catch (const varinv::InfeasibleError& err) {
    std::cerr << "infeasible: " << err.what() << "\n";
    return 3;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 1;
}
