#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "varinv/optimizer.hpp"

namespace varinv {

/// Scalar objective with analytic gradient (second derivatives are always
/// taken by finite differences of this gradient).
struct GradientFn {
  std::function<double(const Eigen::VectorXd&)> value;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;
};

/// Central finite-difference Hessian of the gradient (step 1e-4), symmetrized.
Eigen::MatrixXd fd_hessian(const GradientFn& f, const Eigen::VectorXd& x, double step = 1e-4);

/// Smallest eigenvalue of H restricted to the coordinates not in `active`.
/// Returns +infinity when every coordinate is active.
double projected_min_eigenvalue(const Eigen::MatrixXd& h, const std::vector<int>& active);

/// Coordinates of the packed [sigma; state] vector sitting at an active
/// box bound (tolerance on the distance to the bound).
std::vector<int> active_coordinates(const EitProblem& problem, const ConductivityField& sigma,
                                    const StateEnsemble& state, double tol = 1e-10);

/// T_alpha as a GradientFn over the packed [sigma; state] vector.
GradientFn eit_objective_fn(const EitProblem& problem, const ConductivityField& sigma_template,
                            const StateEnsemble& state_template);

/// Vector-valued map with its input/output dimensions; derivatives are taken
/// by central differences of eval.
struct VectorFn {
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> eval;
  int dim_in = 0;
  int dim_out = 0;
};

/// EIT residual as a VectorFn over packed [sigma; state]; outputs are scaled
/// by sqrt(|T|) so the Euclidean output norm is the L2(Omega) residual norm.
VectorFn eit_residual_fn(const EitProblem& problem, const ConductivityField& sigma_template,
                         const StateEnsemble& state_template);

/// |L h|_Z built from the regularization operators: fractional sigma norm of
/// the interpolated sigma direction plus the fractional state norms.
std::function<double(const Eigen::VectorXd&)> eit_l_norm(const EitProblem& problem,
                                                         int experiments);

enum class RatioKind {
  reduced,  ///< |F''(h,h)| / (|F'h| |Lh|)
  cbar,     ///< |F''(h,h)| / |Lh|^2
};

struct RatioOptions {
  int samples = 200;
  std::uint64_t seed = 7;
  RatioKind kind = RatioKind::reduced;
  double kernel_floor = 1e-14;  ///< |F'h| below this counts as a kernel direction
  double fd_step = 1e-4;
};

struct RatioResult {
  double sup_ratio = 0.0;
  int kernel_directions = 0;  ///< reported separately, never folded into the sup
  int samples = 0;
};

/// Monte-Carlo sup of the nonlinearity ratio over random unit directions.
/// Vanishes (up to FD noise) for linear maps.
RatioResult nonlinearity_ratio(const VectorFn& f,
                               const std::function<double(const Eigen::VectorXd&)>& l_norm,
                               const Eigen::VectorXd& x, const RatioOptions& opts = {});

struct FixpointOptions {
  int max_iter = 20;
  double rtol = 1e-6;
  double alpha_floor = 1e-8;
};

/// alpha_{k+1} = max(cbar * |A(solution(alpha_k))|_W, floor). Convergence is
/// not guaranteed; the history is returned either way (non-convergence is a
/// reported outcome, not an error).
std::vector<double> alpha_convexity_fixpoint(
    const std::function<double(double)>& residual_norm_at_alpha, double cbar, double alpha0,
    const FixpointOptions& opts = {});

/// The four nonnegative terms of the completed-square quadratic form for the
/// Kohn-Vogelius objective at a zero of the residual (rot90 grad psi =
/// sigma grad phi), evaluated for a direction (dir_sigma, dir_state).
struct CompletedSquare {
  std::array<double, 4> terms{};
  double total = 0.0;
};
CompletedSquare kv_completed_square(const TriMesh& mesh, const ElementGradients& eg,
                                    const ConductivityField& sigma, const StateEnsemble& state,
                                    const Eigen::VectorXd& dir_sigma,
                                    const StateEnsemble& dir_state);

/// The same quadratic form written out (diagonal terms plus the mixed terms
/// at half weight); identical to the completed-square total for every
/// direction — an algebraic identity used as its own test.
double kv_halfcross_quadratic_form(const TriMesh& mesh, const ElementGradients& eg,
                                   const ConductivityField& sigma, const StateEnsemble& state,
                                   const Eigen::VectorXd& dir_sigma,
                                   const StateEnsemble& dir_state);

struct ConvexityReport {
  double min_eigenvalue_projected = 0.0;
  double nonlinearity_ratio = 0.0;
  int kernel_directions = 0;
  double cbar = 0.0;
  std::vector<double> alpha_fixpoint_history;
  std::string point_description;
};

}  // namespace varinv
