#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "varinv/eit.hpp"
#include "varinv/regularization.hpp"

namespace varinv {

/// aao_ls : smooth boundary-misfit + Q_A + alpha.R over the sigma box
/// maao_ls: Q_A + alpha.R over sigma box and L-inf trace boxes (width tau*delta)
/// maao_kv: J_KV + alpha.R over sigma box, phi trace boxes, and the W^{1,1}
///          ball for the psi traces (augmented Lagrangian; pinned for width 0)
enum class SolveMode { aao_ls, maao_ls, maao_kv };

SolveMode parse_mode(const std::string& name);
std::string to_string(SolveMode mode);

/// Inconsistent constraints (empty sigma box, empty trace interval).
struct InfeasibleError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct SolverOptions {
  int max_outer = 5000;
  int max_inner = 150;             ///< PG iterations per state sweep
  double tol_rel_decrease = 1e-10;
  double tol_pg = 1e-9;
  double armijo = 1e-4;
  int max_halvings = 50;
  int al_max_passes = 25;
  double al_penalty0 = 10.0;
  double al_slack_tol = 1e-8;
  bool record_history = true;
  bool record_component_history = false;  ///< also track qa / r / violation per pass
};

struct SolveReport {
  std::vector<double> objective_history;   ///< T_alpha after each outer pass
  std::vector<int> history_segments;       ///< first index of each AL pass
  std::vector<double> qa_history;          ///< optional (record_component_history)
  std::vector<double> r_history;
  std::vector<double> violation_history;
  double final_qa = 0.0;
  double final_jkv = 0.0;
  std::vector<double> final_r;             ///< R components
  double final_objective = 0.0;
  double box_violation = 0.0;
  double morozov_slack = 0.0;
  double w11_slack = 0.0;
  double minimality_gap = 0.0;             ///< T(solution) - T(reference)
  bool truth_admissible = false;
  double truth_objective = 0.0;
  int iterations = 0;
  double wall_time = 0.0;                  ///< seconds; not serialized
  double stability_norm = 0.0;
  bool converged = false;
  std::string stop_reason;
  std::vector<double> alpha;
  std::uint64_t seed = 0;
  std::string config_hash;
};

/// Minimizer of 1/2 (sigma |g|^2 + |h|^2 / sigma) over [lo, hi]:
/// clamp(|h|/|g|) when |g| > 0, hi when only |h| > 0, the box midpoint when
/// both vanish. Shared by the Q_A and J_KV objectives (their sigma
/// dependence differs by a sigma-independent term). Throws for lo <= 0.
double sigma_closed_form(const Eigen::Vector2d& g, const Eigen::Vector2d& h, double lo, double hi);

/// Same stationary point from pre-aggregated squared norms (stacked
/// experiments enter through sums of |g|^2 and |h|^2).
double sigma_closed_form_sq(double g_sq, double h_sq, double lo, double hi);

/// Objective callback: returns the value; fills *grad when non-null.
using ObjectiveFn = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)>;

struct BoxBounds {
  Eigen::VectorXd lo, hi;  ///< elementwise, +-inf allowed

  Eigen::VectorXd project(const Eigen::VectorXd& x) const {
    return x.cwiseMax(lo).cwiseMin(hi);
  }
  static BoxBounds free(int n);
};

struct PgOptions {
  int max_iterations = 500;
  double tol_pg = 1e-9;
  double tol_rel_decrease = 0.0;  ///< 0 disables the decrease test
  double armijo = 1e-4;
  int max_halvings = 50;
};

struct PgResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
  bool stationary = false;  ///< line search exhausted (flagged, not an error)
};

/// Barzilai-Borwein trial step with Armijo backtracking on the projected arc.
/// Returns a feasible point with objective <= f(x); sets *stationary when the
/// line search fails after max_halvings halvings. step_hint is updated with
/// the BB step for the next call.
Eigen::VectorXd projected_gradient_step(const ObjectiveFn& f, const Eigen::VectorXd& x,
                                        const BoxBounds& bounds, double* step_hint,
                                        bool* stationary, const PgOptions& opts = {});

/// Full BB/Armijo projected-gradient loop.
PgResult projected_gradient(const ObjectiveFn& f, const Eigen::VectorXd& x0,
                            const BoxBounds& bounds, const PgOptions& opts = {});

/// Immutable assembled context for one EIT solve.
struct EitProblem {
  const TriMesh* mesh = nullptr;
  const ElementGradients* eg = nullptr;
  const BoundaryTrace* trace = nullptr;
  const RegOperators* reg_ops = nullptr;
  RegConfig reg;
  BoundaryRecord record;
  SolveMode mode = SolveMode::maao_ls;
  std::vector<double> alpha;
  Eigen::VectorXd boundary_weights;  ///< trapezoid node weights (aao_ls misfit)

  static EitProblem make(const TriMesh& mesh, const ElementGradients& eg,
                         const BoundaryTrace& trace, const RegOperators& reg_ops,
                         const RegConfig& reg, const BoundaryRecord& record, SolveMode mode,
                         std::vector<double> alpha);

  /// Full T_alpha(sigma, state) with gradients (J-part + data misfit + alpha.R).
  ObjectiveEval objective(const ConductivityField& sigma, const StateEnsemble& state) const;
  double objective_value(const ConductivityField& sigma, const StateEnsemble& state) const;
};

struct EitSolution {
  ConductivityField sigma;
  StateEnsemble state;
  SolveReport report;
};

/// Box-center sigma, states harmonic-lifted from the noisy traces
/// (sigma0-weighted Dirichlet solves): a feasible, data-consistent start.
void make_default_start(const EitProblem& problem, double sigma_lower, double sigma_upper,
                        ConductivityField& sigma0, StateEnsemble& state0);

/// Alternating minimization: exact per-triangle sigma updates and projected
/// gradient sweeps on the states; augmented-Lagrangian wrapper for the
/// W^{1,1} constraint in maao_kv mode. When truth is given the report carries
/// the minimality gap against it.
EitSolution solve_instance(const EitProblem& problem, const ConductivityField& start_sigma,
                           const StateEnsemble& start_state, const SolverOptions& opts = {},
                           const ConductivityField* truth_sigma = nullptr,
                           const StateEnsemble* truth_state = nullptr);

struct QpPolishInfo {
  int iterations = 0;
  bool converged = false;
  bool hessian_psd = true;
  double min_probe_curvature = 0.0;
};

/// For fixed sigma the state problem is a convex box-QP; runs projected
/// gradient to tight tolerance and certifies convexity with Hessian-vector
/// probes (exact for a quadratic: H v = grad(u0+v) - grad(u0)).
StateEnsemble state_qp_polish(const EitProblem& problem, const ConductivityField& sigma,
                              const StateEnsemble& start, double tol, QpPolishInfo* info = nullptr,
                              int max_iterations = 20000);

/// (normBEIT)-style diagnostic: |sigma|_inf + |(Phi,Psi)|_{H^{3/2-eps}}^2
/// + |trace|_inf.
double stability_norm(const EitProblem& problem, const ConductivityField& sigma,
                      const StateEnsemble& state);

/// Packing order: [phi_0; psi_0; phi_1; psi_1; ...].
Eigen::VectorXd pack_state(const StateEnsemble& state);
void unpack_state(const Eigen::VectorXd& x, StateEnsemble& state);

/// Trace box bounds for the packed state vector under the given mode
/// (interior coordinates unbounded).
BoxBounds state_bounds(const EitProblem& problem);

}  // namespace varinv
