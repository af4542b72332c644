#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "varinv/eit.hpp"
#include "varinv/fem.hpp"
#include "varinv/mesh.hpp"

namespace varinv {

/// Regularization weights, fractional exponents and the parameter schedule
/// alpha_j(delta) = max(c_j delta^{p_j}, alpha_min).
struct RegConfig {
  std::vector<double> alpha_c{1.0};
  std::vector<double> alpha_p{1.0};
  double alpha_min = 1e-8;
  double eps = 0.25;        ///< state exponent s = 3/2 - eps
  double eps_tilde = 0.1;   ///< sigma exponent s = 1 - eps_tilde
  double tau = 1.5;
  bool sigma_component = false;  ///< enable the second (sigma) component

  int components() const { return sigma_component ? 2 : 1; }
  double s_state() const { return 1.5 - eps; }
  double s_sigma() const { return 1.0 - eps_tilde; }
};

struct AlphaChoice {
  std::vector<double> alpha;
  double ratio;  ///< delta / min_j alpha_j
  double min_alpha() const;
};

/// alpha_j = max(c_j delta^{p_j}, alpha_min); reports delta / min alpha.
/// For delta = 0 the positive floor alpha_min keeps the solves well-posed.
AlphaChoice alpha_schedule(const RegConfig& config, double delta);

/// Assembled fractional-norm machinery for one mesh: the state norm with
/// exponent 3/2 - eps, optionally the sigma norm with exponent 1 - eps_tilde
/// acting on the area-weighted interpolation of sigma onto nodes.
struct RegOperators {
  FractionalNormOperator state_norm;
  std::optional<FractionalNormOperator> sigma_norm;
  SparseMat tri_to_node;  ///< area-weighted triangle-to-node interpolation

  static RegOperators assemble(const TriMesh& mesh, const ElementGradients& eg,
                               const RegConfig& config);
};

/// Component values and gradients of R:
///   R_1 = 1/2 sum_i (|phi_i|_s^2 + |psi_i|_s^2),   s = 3/2 - eps
///   R_2 = |P sigma|_{s'}^2 (optional),              s' = 1 - eps_tilde
struct RegEval {
  std::vector<double> components;
  Eigen::VectorXd grad_sigma;  ///< of R_2 (zero when absent)
  std::vector<Eigen::VectorXd> grad_phi;
  std::vector<Eigen::VectorXd> grad_psi;

  double weighted(const std::vector<double>& alpha) const;
};
RegEval eval_r(const RegOperators& ops, const RegConfig& config, const ConductivityField& sigma,
               const StateEnsemble& state);

/// Componentwise projection onto the admissible set: sigma clamped to its
/// box, boundary values of phi_i / psi_i clamped to [data - tau delta,
/// data + tau delta]; interior nodes untouched. Idempotent, nonexpansive.
/// Throws if the sigma box is empty.
void project_admissible(ConductivityField& sigma, StateEnsemble& state,
                        const BoundaryRecord& record, const BoundaryTrace& trace);

/// Largest constraint violation of (sigma, state) w.r.t. the admissible set
/// (0 for feasible points).
double admissible_violation(const ConductivityField& sigma, const StateEnsemble& state,
                            const BoundaryRecord& record, const BoundaryTrace& trace);

/// Discrete W^{1,1} norm of boundary nodal values g over the closed loop:
/// trapezoid of |g| plus the exact total variation sum |g_b - g_a| over every
/// loop edge (corner jumps included).
double w11_boundary_norm(const TriMesh& mesh, const BoundaryTrace& trace,
                         const Eigen::VectorXd& g);

}  // namespace varinv
