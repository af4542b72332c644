#include "varinv/regularization.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace varinv {

double AlphaChoice::min_alpha() const {
  return *std::min_element(alpha.begin(), alpha.end());
}

AlphaChoice alpha_schedule(const RegConfig& config, double delta) {
  if (delta < 0.0) throw std::invalid_argument("alpha_schedule: delta must be >= 0");
  if (config.alpha_c.size() != config.alpha_p.size() || config.alpha_c.empty())
    throw std::invalid_argument("alpha_schedule: schedule constants inconsistent");

  AlphaChoice out;
  const std::size_t m = static_cast<std::size_t>(config.components());
  for (std::size_t j = 0; j < m; ++j) {
    const std::size_t jj = std::min(j, config.alpha_c.size() - 1);
    const double aj = config.alpha_c[jj] * std::pow(delta, config.alpha_p[jj]);
    out.alpha.push_back(std::max(aj, config.alpha_min));
  }
  out.ratio = delta / out.min_alpha();
  return out;
}

RegOperators RegOperators::assemble(const TriMesh& mesh, const ElementGradients& eg,
                                    const RegConfig& config) {
  RegOperators ops;
  const SparseMat k = weighted_stiffness(mesh, eg, Eigen::VectorXd::Ones(mesh.triangle_count()));
  const SparseMat m = mass_matrix(mesh, eg);
  ops.state_norm = FractionalNormOperator(k, m, config.s_state());
  if (config.sigma_component) ops.sigma_norm = FractionalNormOperator(k, m, config.s_sigma());

  // Area-weighted average of the triangles incident to each node.
  Eigen::VectorXd node_area = Eigen::VectorXd::Zero(mesh.node_count());
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    for (int v : mesh.triangles[static_cast<std::size_t>(t)])
      node_area[v] += eg.areas[static_cast<std::size_t>(t)];
  }
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(3) * mesh.triangles.size());
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    for (int v : mesh.triangles[static_cast<std::size_t>(t)])
      trip.emplace_back(v, t, eg.areas[static_cast<std::size_t>(t)] / node_area[v]);
  }
  ops.tri_to_node = SparseMat(mesh.node_count(), mesh.triangle_count());
  ops.tri_to_node.setFromTriplets(trip.begin(), trip.end());
  return ops;
}

RegEval eval_r(const RegOperators& ops, const RegConfig& config, const ConductivityField& sigma,
               const StateEnsemble& state) {
  RegEval out;
  const int ne = state.experiments();
  out.grad_phi.resize(static_cast<std::size_t>(ne));
  out.grad_psi.resize(static_cast<std::size_t>(ne));

  double r1 = 0.0;
  for (int i = 0; i < ne; ++i) {
    const auto& phi = state.phi[static_cast<std::size_t>(i)];
    const auto& psi = state.psi[static_cast<std::size_t>(i)];
    r1 += 0.5 * (ops.state_norm.norm_squared(phi) + ops.state_norm.norm_squared(psi));
    out.grad_phi[static_cast<std::size_t>(i)] = ops.state_norm.apply(phi);
    out.grad_psi[static_cast<std::size_t>(i)] = ops.state_norm.apply(psi);
  }
  out.components.push_back(r1);

  out.grad_sigma = Eigen::VectorXd::Zero(sigma.values.size());
  if (config.sigma_component) {
    if (!ops.sigma_norm) throw std::invalid_argument("eval_r: sigma norm operator not assembled");
    const Eigen::VectorXd nodal = ops.tri_to_node * sigma.values;
    out.components.push_back(ops.sigma_norm->norm_squared(nodal));
    out.grad_sigma = ops.tri_to_node.transpose() * ops.sigma_norm->gradient(nodal);
  }
  return out;
}

double RegEval::weighted(const std::vector<double>& alpha) const {
  if (alpha.size() != components.size())
    throw std::invalid_argument("RegEval: alpha component count mismatch");
  double s = 0.0;
  for (std::size_t j = 0; j < alpha.size(); ++j) s += alpha[j] * components[j];
  return s;
}

void project_admissible(ConductivityField& sigma, StateEnsemble& state,
                        const BoundaryRecord& record, const BoundaryTrace& trace) {
  if (sigma.upper < sigma.lower)
    throw std::invalid_argument("project_admissible: empty sigma box");
  if (record.experiments() != state.experiments())
    throw std::invalid_argument("project_admissible: record/state experiment mismatch");

  sigma.values = sigma.values.cwiseMax(sigma.lower).cwiseMin(sigma.upper);

  const double half = record.tau * record.delta;
  for (int i = 0; i < state.experiments(); ++i) {
    auto& phi = state.phi[static_cast<std::size_t>(i)];
    auto& psi = state.psi[static_cast<std::size_t>(i)];
    const auto& ups = record.upsilon[static_cast<std::size_t>(i)];
    const auto& gam = record.gamma[static_cast<std::size_t>(i)];
    for (int k = 0; k < trace.size(); ++k) {
      const int node = trace.nodes[static_cast<std::size_t>(k)];
      phi[node] = std::clamp(phi[node], ups[k] - half, ups[k] + half);
      psi[node] = std::clamp(psi[node], gam[k] - half, gam[k] + half);
    }
  }
}

double admissible_violation(const ConductivityField& sigma, const StateEnsemble& state,
                            const BoundaryRecord& record, const BoundaryTrace& trace) {
  double v = 0.0;
  for (int t = 0; t < sigma.values.size(); ++t) {
    v = std::max(v, sigma.lower - sigma.values[t]);
    v = std::max(v, sigma.values[t] - sigma.upper);
  }
  // Bounds are formed exactly as in project_admissible so a projected point
  // reports violation 0 without round-off residue.
  const double half = record.tau * record.delta;
  for (int i = 0; i < state.experiments(); ++i) {
    const auto& phi = state.phi[static_cast<std::size_t>(i)];
    const auto& psi = state.psi[static_cast<std::size_t>(i)];
    const auto& ups = record.upsilon[static_cast<std::size_t>(i)];
    const auto& gam = record.gamma[static_cast<std::size_t>(i)];
    for (int k = 0; k < trace.size(); ++k) {
      const int node = trace.nodes[static_cast<std::size_t>(k)];
      v = std::max(v, phi[node] - (ups[k] + half));
      v = std::max(v, (ups[k] - half) - phi[node]);
      v = std::max(v, psi[node] - (gam[k] + half));
      v = std::max(v, (gam[k] - half) - psi[node]);
    }
  }
  return std::max(v, 0.0);
}

double w11_boundary_norm(const TriMesh& mesh, const BoundaryTrace& trace,
                         const Eigen::VectorXd& g) {
  if (g.size() != trace.size()) throw std::invalid_argument("w11_boundary_norm: size mismatch");
  const double perim = mesh.perimeter();
  const int b = trace.size();
  double value = 0.0;
  for (int k = 0; k < b; ++k) {
    const int k1 = (k + 1) % b;
    value += 0.5 * trace.edge_length(k, perim) * (std::abs(g[k]) + std::abs(g[k1]));
    value += std::abs(g[k1] - g[k]);
  }
  return value;
}

}  // namespace varinv
