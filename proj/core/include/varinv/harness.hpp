#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "varinv/convexity.hpp"
#include "varinv/optimizer.hpp"
#include "varinv/run_config.hpp"
#include "varinv/toy.hpp"

namespace varinv {

/// Everything one EIT experiment needs: geometry, operators, ground truth
/// and both clean and noisy boundary records.
struct EitInstance {
  TriMesh mesh;
  ElementGradients eg;
  BoundaryTrace trace;
  RegOperators reg_ops;
  RegConfig reg;
  ConductivityField sigma_true;
  StateEnsemble state_true;
  BoundaryRecord exact;
  BoundaryRecord noisy;
};

/// Manufactures the phantom, its exact states and boundary data and applies
/// the configured noise. Affine/layered phantoms have machine-exact states
/// (residual 0); the disk phantom is manufactured through the forward solves
/// so its truth carries the discretization residual.
EitInstance build_instance(const RunConfig& config);

/// Phantom conductivity on a given mesh (triangle-midpoint sampling for the
/// disk inclusion).
Eigen::VectorXd phantom_sigma(const TriMesh& mesh, const ElementGradients& eg,
                              const PhantomSpec& phantom);

/// Nodal boundary current of a P1 field: per-edge flux sigma * grad(phi).nu
/// from the adjacent triangle, averaged at the nodes (corner nodes carry the
/// mean of the two one-sided values).
Eigen::VectorXd nodal_current(const TriMesh& mesh, const ElementGradients& eg,
                              const BoundaryTrace& trace, const Eigen::VectorXd& sigma,
                              const Eigen::VectorXd& phi);

nlohmann::json record_to_json(const BoundaryRecord& record);
BoundaryRecord record_from_json(const nlohmann::json& j);

nlohmann::json state_to_json(const StateEnsemble& state);
StateEnsemble state_from_json(const nlohmann::json& j);

/// SolveReport as JSON. wall_time is intentionally omitted so solve outputs
/// are byte-reproducible under a fixed seed.
nlohmann::json report_to_json(const SolveReport& report);

std::string sigma_to_csv(const Eigen::VectorXd& sigma);
Eigen::VectorXd sigma_from_csv(const std::string& text);

std::string history_to_csv(const SolveReport& report);

/// Area-weighted L2 distance between two per-triangle fields.
double sigma_l2_error(const ElementGradients& eg, const Eigen::VectorXd& a,
                      const Eigen::VectorXd& b);

/// EIT row of the delta sweep: regenerate noise at this delta (seed xored
/// with the row index), pick alpha from the schedule, solve from the default
/// start, report errors against the truth.
SweepRow eit_sweep_row(const EitInstance& instance, const RunConfig& config, double delta,
                       std::size_t row_index);

/// Thread cap for sweep rows: VARINV_THREADS when set, else 1.
int sweep_thread_cap();

// ---------------------------------------------------------------------------
// CLI commands (exit codes: 0 ok, 1 usage/config error, 2 solver
// non-convergence, 3 infeasible constraints).

int cmd_generate(const RunConfig& config, const std::filesystem::path& out_dir);
int cmd_solve(const RunConfig& config, const std::filesystem::path& data_dir,
              const std::filesystem::path& out_dir,
              const std::optional<std::string>& history_csv = std::nullopt);
int cmd_sweep(const RunConfig& config, const std::vector<double>& deltas,
              const std::filesystem::path& out_dir);
int cmd_toy(std::uint64_t seed, int dim, double delta, double alpha,
            const std::filesystem::path& out_dir, bool sweep);
struct ConvexityCmdOptions {
  bool toy = false;
  bool at_solution = false;  ///< default: at the manufactured truth
  bool fixpoint = false;
  int fixpoint_max_iter = 8;
  int ratio_samples = 200;
  std::uint64_t ratio_seed = 7;
};
int cmd_convexity(const RunConfig& config, const std::filesystem::path& out_dir,
                  const ConvexityCmdOptions& opts);

}  // namespace varinv
