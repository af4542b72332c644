#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "varinv/fem.hpp"
#include "varinv/mesh.hpp"

namespace varinv {

/// Piecewise-constant conductivity with its admissible box [lower, upper].
struct ConductivityField {
  Eigen::VectorXd values;  ///< one positive value per triangle
  double lower = 0.0;      ///< > 0
  double upper = 0.0;      ///< >= lower

  double box_center() const { return 0.5 * (lower + upper); }
  double box_radius() const { return 0.5 * (upper - lower); }
};

/// Nodal P1 coefficients of the voltage potentials phi_i and stream
/// functions psi_i for I experiments.
struct StateEnsemble {
  std::vector<Eigen::VectorXd> phi;
  std::vector<Eigen::VectorXd> psi;

  int experiments() const { return static_cast<int>(phi.size()); }
  static StateEnsemble zeros(int experiments, int nodes);
};

/// Boundary data per experiment, stored in boundary-loop order:
/// voltages upsilon_i, stream traces gamma_i (gamma_i(0) = 0 convention),
/// currents j_i with vanishing loop integral. delta is the noise level and
/// tau > 1 the safety factor widening the trace boxes.
struct BoundaryRecord {
  std::vector<Eigen::VectorXd> upsilon;
  std::vector<Eigen::VectorXd> gamma;
  std::vector<Eigen::VectorXd> current;
  double delta = 0.0;
  double tau = 1.5;
  std::uint64_t seed = 0;

  int experiments() const { return static_cast<int>(upsilon.size()); }
};

/// Per-experiment model residual, one 2-vector per triangle (column t):
///   A_{i,T} = sqrt(sigma_T) grad(phi_i)|_T - (1/sqrt(sigma_T)) rot90(grad(psi_i))|_T.
/// Throws if sigma has a nonpositive entry.
using ResidualField = std::vector<Eigen::Matrix<double, 2, Eigen::Dynamic>>;
ResidualField residual_a(const TriMesh& mesh, const ElementGradients& eg,
                         const ConductivityField& sigma, const StateEnsemble& state);

/// Objective value plus analytic gradients w.r.t. sigma and all state fields.
struct ObjectiveEval {
  double value = 0.0;
  Eigen::VectorXd grad_sigma;
  std::vector<Eigen::VectorXd> grad_phi;
  std::vector<Eigen::VectorXd> grad_psi;
};

/// Q_A = 1/2 sum_{i,T} |T| |A_{i,T}|^2. Zero iff the residual vanishes.
ObjectiveEval eval_qa(const TriMesh& mesh, const ElementGradients& eg,
                      const ConductivityField& sigma, const StateEnsemble& state);

/// J_KV = 1/2 sum_{i,T} |T| (sigma_T |grad phi|^2 + |rot90 grad psi|^2 / sigma_T).
ObjectiveEval eval_jkv(const TriMesh& mesh, const ElementGradients& eg,
                       const ConductivityField& sigma, const StateEnsemble& state);

/// The algebraic decomposition J_KV = Q_A + cross_volume together with the
/// discrete Green identity cross_volume = -boundary_form, where
/// boundary_form is the loop pairing of the traces (tr phi_i, tr psi_i).
/// gap is identically zero up to round-off.
struct KvIdentity {
  double gap = 0.0;            ///< J_KV - Q_A - cross_volume
  double cross_volume = 0.0;   ///< sum_{i,T} |T| grad(phi).rot90(grad(psi))
  double boundary_form = 0.0;  ///< equals -cross_volume for P1 fields
  double qa = 0.0;
  double jkv = 0.0;
};
KvIdentity kv_identity_gap(const TriMesh& mesh, const ElementGradients& eg,
                           const BoundaryTrace& trace, const ConductivityField& sigma,
                           const StateEnsemble& state);

/// gamma(s_k) = -trapezoid(j, 0..s_k) along the boundary loop, gamma(0) = 0.
/// Requires loop-compatible current: |loop integral of j| <= tol, otherwise
/// throws with the closure residual in the message.
Eigen::VectorXd gamma_from_current(const TriMesh& mesh, const BoundaryTrace& trace,
                                   const Eigen::VectorXd& current, double tol = 1e-8);

/// P1 Galerkin solve of -div(w grad u) = 0 with Dirichlet data given on the
/// boundary loop (values in loop order). The psi-problem uses w = 1/sigma;
/// rot90 preserves the P1 bilinear form, so the assembly is identical.
/// Used only to manufacture synthetic data, never inside the minimization.
Eigen::VectorXd forward_dirichlet(const TriMesh& mesh, const ElementGradients& eg,
                                  const Eigen::VectorXd& weights, const BoundaryTrace& trace,
                                  const Eigen::VectorXd& boundary_values);

/// Neumann counterpart: w du/dn = j on the loop (trapezoid-lumped load),
/// grounded at trace node `ground_index` (loop position) to `ground_value`.
/// Throws on incompatible current.
Eigen::VectorXd forward_neumann(const TriMesh& mesh, const ElementGradients& eg,
                                const Eigen::VectorXd& weights, const BoundaryTrace& trace,
                                const Eigen::VectorXd& current, int ground_index = 0,
                                double ground_value = 0.0);

/// Gather nodal values at the boundary loop (loop order).
Eigen::VectorXd trace_values(const BoundaryTrace& trace, const Eigen::VectorXd& u);

/// i.i.d. uniform perturbations in [-delta, delta] on every boundary value of
/// upsilon and gamma; currents are untouched. The L-infinity noise bound
/// holds by construction and output is deterministic under the seed.
BoundaryRecord add_noise(const BoundaryRecord& record, double delta, std::uint64_t seed);

}  // namespace varinv
