#include "varinv/eit.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/SparseCholesky>

#include "varinv/rng.hpp"

namespace varinv {

namespace {

void check_sigma(const TriMesh& mesh, const ConductivityField& sigma) {
  if (sigma.values.size() != mesh.triangle_count())
    throw std::invalid_argument("sigma: size mismatch with mesh");
  if ((sigma.values.array() <= 0.0).any())
    throw std::invalid_argument("sigma: nonpositive conductivity");
}

void check_state(const TriMesh& mesh, const StateEnsemble& state) {
  if (state.phi.empty() || state.phi.size() != state.psi.size())
    throw std::invalid_argument("state: need matching phi/psi, I >= 1");
  for (int i = 0; i < state.experiments(); ++i) {
    if (state.phi[static_cast<std::size_t>(i)].size() != mesh.node_count() ||
        state.psi[static_cast<std::size_t>(i)].size() != mesh.node_count())
      throw std::invalid_argument("state: nodal vector size mismatch");
  }
}

}  // namespace

StateEnsemble StateEnsemble::zeros(int experiments, int nodes) {
  StateEnsemble s;
  s.phi.assign(static_cast<std::size_t>(experiments), Eigen::VectorXd::Zero(nodes));
  s.psi.assign(static_cast<std::size_t>(experiments), Eigen::VectorXd::Zero(nodes));
  return s;
}

ResidualField residual_a(const TriMesh& mesh, const ElementGradients& eg,
                         const ConductivityField& sigma, const StateEnsemble& state) {
  check_sigma(mesh, sigma);
  check_state(mesh, state);
  const int nt = mesh.triangle_count();
  ResidualField res(static_cast<std::size_t>(state.experiments()));
  for (int i = 0; i < state.experiments(); ++i) {
    auto& r = res[static_cast<std::size_t>(i)];
    r.resize(2, nt);
    const auto& phi = state.phi[static_cast<std::size_t>(i)];
    const auto& psi = state.psi[static_cast<std::size_t>(i)];
    for (int t = 0; t < nt; ++t) {
      const double rt = std::sqrt(sigma.values[t]);
      const Eigen::Vector2d g = eg.field_gradient(mesh, phi, t);
      const Eigen::Vector2d h = rot90(eg.field_gradient(mesh, psi, t));
      r.col(t) = rt * g - h / rt;
    }
  }
  return res;
}

namespace {

// Shared accumulation for Q_A and J_KV: both have the same sigma derivative
// 1/2 |T| (|g|^2 - |h|^2 / sigma^2); they differ in the state derivatives.
ObjectiveEval eval_objective(const TriMesh& mesh, const ElementGradients& eg,
                             const ConductivityField& sigma, const StateEnsemble& state,
                             bool kohn_vogelius) {
  check_sigma(mesh, sigma);
  check_state(mesh, state);

  ObjectiveEval out;
  const int nt = mesh.triangle_count();
  const int nn = mesh.node_count();
  const int ne = state.experiments();
  out.grad_sigma = Eigen::VectorXd::Zero(nt);
  out.grad_phi.assign(static_cast<std::size_t>(ne), Eigen::VectorXd::Zero(nn));
  out.grad_psi.assign(static_cast<std::size_t>(ne), Eigen::VectorXd::Zero(nn));

  for (int i = 0; i < ne; ++i) {
    const auto& phi = state.phi[static_cast<std::size_t>(i)];
    const auto& psi = state.psi[static_cast<std::size_t>(i)];
    auto& gphi = out.grad_phi[static_cast<std::size_t>(i)];
    auto& gpsi = out.grad_psi[static_cast<std::size_t>(i)];
    for (int t = 0; t < nt; ++t) {
      const auto& tri = mesh.triangles[static_cast<std::size_t>(t)];
      const auto& hat = eg.grads[static_cast<std::size_t>(t)];
      const double area = eg.areas[static_cast<std::size_t>(t)];
      const double s = sigma.values[t];
      const Eigen::Vector2d g = eg.field_gradient(mesh, phi, t);
      const Eigen::Vector2d h = rot90(eg.field_gradient(mesh, psi, t));

      const double g2 = g.squaredNorm();
      const double h2 = h.squaredNorm();
      out.value += kohn_vogelius ? 0.5 * area * (s * g2 + h2 / s)
                                 : 0.5 * area * (s * g2 - 2.0 * g.dot(h) + h2 / s);
      out.grad_sigma[t] += 0.5 * area * (g2 - h2 / (s * s));

      const Eigen::Vector2d dphi_dir = kohn_vogelius ? (s * g).eval() : (s * g - h).eval();
      const Eigen::Vector2d dpsi_dir = kohn_vogelius ? (h / s).eval() : (h / s - g).eval();
      for (int v = 0; v < 3; ++v) {
        gphi[tri[v]] += area * dphi_dir.dot(hat[v]);
        gpsi[tri[v]] += area * dpsi_dir.dot(rot90(hat[v]));
      }
    }
  }
  return out;
}

}  // namespace

ObjectiveEval eval_qa(const TriMesh& mesh, const ElementGradients& eg,
                      const ConductivityField& sigma, const StateEnsemble& state) {
  return eval_objective(mesh, eg, sigma, state, false);
}

ObjectiveEval eval_jkv(const TriMesh& mesh, const ElementGradients& eg,
                       const ConductivityField& sigma, const StateEnsemble& state) {
  return eval_objective(mesh, eg, sigma, state, true);
}

KvIdentity kv_identity_gap(const TriMesh& mesh, const ElementGradients& eg,
                           const BoundaryTrace& trace, const ConductivityField& sigma,
                           const StateEnsemble& state) {
  check_sigma(mesh, sigma);
  check_state(mesh, state);

  KvIdentity out;
  const int nt = mesh.triangle_count();
  for (int i = 0; i < state.experiments(); ++i) {
    const auto& phi = state.phi[static_cast<std::size_t>(i)];
    const auto& psi = state.psi[static_cast<std::size_t>(i)];
    double cross = 0.0;
    for (int t = 0; t < nt; ++t) {
      const Eigen::Vector2d g = eg.field_gradient(mesh, phi, t);
      const Eigen::Vector2d h = rot90(eg.field_gradient(mesh, psi, t));
      cross += eg.areas[static_cast<std::size_t>(t)] * g.dot(h);
    }
    out.cross_volume += cross;
    out.boundary_form +=
        boundary_pairing(mesh, trace, trace_values(trace, phi), trace_values(trace, psi));
  }
  out.qa = eval_qa(mesh, eg, sigma, state).value;
  out.jkv = eval_jkv(mesh, eg, sigma, state).value;
  out.gap = out.jkv - out.qa - out.cross_volume;
  return out;
}

Eigen::VectorXd gamma_from_current(const TriMesh& mesh, const BoundaryTrace& trace,
                                   const Eigen::VectorXd& current, double tol) {
  if (current.size() != trace.size())
    throw std::invalid_argument("gamma_from_current: size mismatch");
  const double perim = mesh.perimeter();
  const int b = trace.size();

  double closure = 0.0;
  for (int k = 0; k < b; ++k) {
    closure += 0.5 * trace.edge_length(k, perim) * (current[k] + current[(k + 1) % b]);
  }
  if (std::abs(closure) > tol)
    throw std::invalid_argument("gamma_from_current: incompatible current, closure residual " +
                                std::to_string(closure));

  Eigen::VectorXd gamma(b);
  gamma[0] = 0.0;
  for (int k = 0; k + 1 < b; ++k) {
    gamma[k + 1] = gamma[k] - 0.5 * trace.edge_length(k, perim) * (current[k] + current[k + 1]);
  }
  return gamma;
}

Eigen::VectorXd trace_values(const BoundaryTrace& trace, const Eigen::VectorXd& u) {
  Eigen::VectorXd v(trace.size());
  for (int k = 0; k < trace.size(); ++k) v[k] = u[trace.nodes[static_cast<std::size_t>(k)]];
  return v;
}

Eigen::VectorXd forward_dirichlet(const TriMesh& mesh, const ElementGradients& eg,
                                  const Eigen::VectorXd& weights, const BoundaryTrace& trace,
                                  const Eigen::VectorXd& boundary_values) {
  if (boundary_values.size() != trace.size())
    throw std::invalid_argument("forward_dirichlet: boundary data size mismatch");
  const SparseMat k = weighted_stiffness(mesh, eg, weights);
  const int nn = mesh.node_count();

  std::vector<char> on_boundary(static_cast<std::size_t>(nn), 0);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(nn);
  for (int kk = 0; kk < trace.size(); ++kk) {
    const int node = trace.nodes[static_cast<std::size_t>(kk)];
    on_boundary[static_cast<std::size_t>(node)] = 1;
    u[node] = boundary_values[kk];
  }

  std::vector<int> interior;
  std::vector<int> pos(static_cast<std::size_t>(nn), -1);
  for (int v = 0; v < nn; ++v) {
    if (!on_boundary[static_cast<std::size_t>(v)]) {
      pos[static_cast<std::size_t>(v)] = static_cast<int>(interior.size());
      interior.push_back(v);
    }
  }
  if (interior.empty()) return u;

  const int ni = static_cast<int>(interior.size());
  std::vector<Eigen::Triplet<double>> trip;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(ni);
  for (int col = 0; col < k.outerSize(); ++col) {
    for (SparseMat::InnerIterator it(k, col); it; ++it) {
      const int r = static_cast<int>(it.row());
      const int c = static_cast<int>(it.col());
      if (!on_boundary[static_cast<std::size_t>(r)]) {
        if (!on_boundary[static_cast<std::size_t>(c)]) {
          trip.emplace_back(pos[static_cast<std::size_t>(r)], pos[static_cast<std::size_t>(c)],
                            it.value());
        } else {
          rhs[pos[static_cast<std::size_t>(r)]] -= it.value() * u[c];
        }
      }
    }
  }
  SparseMat kii(ni, ni);
  kii.setFromTriplets(trip.begin(), trip.end());
  Eigen::SimplicialLDLT<SparseMat> solver(kii);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("forward_dirichlet: factorization failed");
  const Eigen::VectorXd ui = solver.solve(rhs);
  for (int idx = 0; idx < ni; ++idx) u[interior[static_cast<std::size_t>(idx)]] = ui[idx];
  return u;
}

Eigen::VectorXd forward_neumann(const TriMesh& mesh, const ElementGradients& eg,
                                const Eigen::VectorXd& weights, const BoundaryTrace& trace,
                                const Eigen::VectorXd& current, int ground_index,
                                double ground_value) {
  if (current.size() != trace.size())
    throw std::invalid_argument("forward_neumann: current size mismatch");
  if (ground_index < 0 || ground_index >= trace.size())
    throw std::invalid_argument("forward_neumann: ground index out of range");
  const double perim = mesh.perimeter();
  const int b = trace.size();

  double closure = 0.0;
  for (int k = 0; k < b; ++k)
    closure += 0.5 * trace.edge_length(k, perim) * (current[k] + current[(k + 1) % b]);
  if (std::abs(closure) > 1e-8)
    throw std::invalid_argument("forward_neumann: incompatible current, loop integral " +
                                std::to_string(closure));

  const SparseMat k = weighted_stiffness(mesh, eg, weights);
  const int nn = mesh.node_count();

  // Trapezoid-lumped load: each loop edge contributes len/2 * j at both ends.
  Eigen::VectorXd load = Eigen::VectorXd::Zero(nn);
  for (int kk = 0; kk < b; ++kk) {
    const double len = trace.edge_length(kk, perim);
    load[trace.nodes[static_cast<std::size_t>(kk)]] += 0.5 * len * current[kk];
    load[trace.nodes[static_cast<std::size_t>((kk + 1) % b)]] +=
        0.5 * len * current[(kk + 1) % b];
  }

  const int ground_node = trace.nodes[static_cast<std::size_t>(ground_index)];
  std::vector<int> pos(static_cast<std::size_t>(nn), -1);
  int next = 0;
  for (int v = 0; v < nn; ++v) {
    if (v != ground_node) pos[static_cast<std::size_t>(v)] = next++;
  }

  std::vector<Eigen::Triplet<double>> trip;
  Eigen::VectorXd rhs(nn - 1);
  for (int v = 0; v < nn; ++v) {
    if (v != ground_node) rhs[pos[static_cast<std::size_t>(v)]] = load[v];
  }
  for (int col = 0; col < k.outerSize(); ++col) {
    for (SparseMat::InnerIterator it(k, col); it; ++it) {
      const int r = static_cast<int>(it.row());
      const int c = static_cast<int>(it.col());
      if (r == ground_node) continue;
      if (c == ground_node) {
        rhs[pos[static_cast<std::size_t>(r)]] -= it.value() * ground_value;
      } else {
        trip.emplace_back(pos[static_cast<std::size_t>(r)], pos[static_cast<std::size_t>(c)],
                          it.value());
      }
    }
  }
  SparseMat kred(nn - 1, nn - 1);
  kred.setFromTriplets(trip.begin(), trip.end());
  Eigen::SimplicialLDLT<SparseMat> solver(kred);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("forward_neumann: factorization failed");
  const Eigen::VectorXd ured = solver.solve(rhs);

  Eigen::VectorXd u(nn);
  u[ground_node] = ground_value;
  for (int v = 0; v < nn; ++v) {
    if (v != ground_node) u[v] = ured[pos[static_cast<std::size_t>(v)]];
  }
  return u;
}

BoundaryRecord add_noise(const BoundaryRecord& record, double delta, std::uint64_t seed) {
  if (delta < 0.0) throw std::invalid_argument("add_noise: delta must be >= 0");
  BoundaryRecord out = record;
  out.delta = delta;
  out.seed = seed;
  Rng rng(seed);
  for (auto& ups : out.upsilon) {
    for (int k = 0; k < ups.size(); ++k) ups[k] += delta * rng.symmetric();
  }
  for (auto& gam : out.gamma) {
    for (int k = 0; k < gam.size(); ++k) gam[k] += delta * rng.symmetric();
  }
  return out;
}

}  // namespace varinv
