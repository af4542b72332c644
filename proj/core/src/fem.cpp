#include "varinv/fem.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace varinv {

Eigen::Vector2d ElementGradients::field_gradient(const TriMesh& mesh, const Eigen::VectorXd& u,
                                                 int t) const {
  const auto& tri = mesh.triangles[static_cast<std::size_t>(t)];
  const auto& g = grads[static_cast<std::size_t>(t)];
  return u[tri[0]] * g[0] + u[tri[1]] * g[1] + u[tri[2]] * g[2];
}

ElementGradients p1_gradients(const TriMesh& mesh) {
  ElementGradients eg;
  const int nt = mesh.triangle_count();
  eg.grads.resize(static_cast<std::size_t>(nt));
  eg.areas.resize(static_cast<std::size_t>(nt));
  for (int t = 0; t < nt; ++t) {
    const double area = mesh.signed_area(t);
    if (area <= 0.0) throw std::invalid_argument("p1_gradients: degenerate triangle");
    const auto& tri = mesh.triangles[static_cast<std::size_t>(t)];
    const Eigen::Vector2d a = mesh.nodes[static_cast<std::size_t>(tri[0])];
    const Eigen::Vector2d b = mesh.nodes[static_cast<std::size_t>(tri[1])];
    const Eigen::Vector2d c = mesh.nodes[static_cast<std::size_t>(tri[2])];
    // grad h_a is the inward rotation of the opposite edge over 2|T|.
    const double inv2a = 1.0 / (2.0 * area);
    eg.grads[static_cast<std::size_t>(t)] = {
        Eigen::Vector2d(b.y() - c.y(), c.x() - b.x()) * inv2a,
        Eigen::Vector2d(c.y() - a.y(), a.x() - c.x()) * inv2a,
        Eigen::Vector2d(a.y() - b.y(), b.x() - a.x()) * inv2a,
    };
    eg.areas[static_cast<std::size_t>(t)] = area;
  }
  return eg;
}

SparseMat weighted_stiffness(const TriMesh& mesh, const ElementGradients& eg,
                             const Eigen::VectorXd& sigma) {
  if (sigma.size() != mesh.triangle_count())
    throw std::invalid_argument("weighted_stiffness: sigma size mismatch");
  if ((sigma.array() <= 0.0).any())
    throw std::invalid_argument("weighted_stiffness: nonpositive weight");

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(9) * mesh.triangles.size());
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    const auto& tri = mesh.triangles[static_cast<std::size_t>(t)];
    const auto& g = eg.grads[static_cast<std::size_t>(t)];
    const double w = sigma[t] * eg.areas[static_cast<std::size_t>(t)];
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        trip.emplace_back(tri[a], tri[b], w * g[a].dot(g[b]));
      }
    }
  }
  SparseMat k(mesh.node_count(), mesh.node_count());
  k.setFromTriplets(trip.begin(), trip.end());
  return k;
}

SparseMat mass_matrix(const TriMesh& mesh, const ElementGradients& eg) {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(9) * mesh.triangles.size());
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    const auto& tri = mesh.triangles[static_cast<std::size_t>(t)];
    const double w = eg.areas[static_cast<std::size_t>(t)] / 12.0;
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        trip.emplace_back(tri[a], tri[b], w * (a == b ? 2.0 : 1.0));
      }
    }
  }
  SparseMat m(mesh.node_count(), mesh.node_count());
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

double boundary_integral(const TriMesh& mesh, const BoundaryTrace& trace,
                         const Eigen::VectorXd& f) {
  if (f.size() != trace.size()) throw std::invalid_argument("boundary_integral: size mismatch");
  const double perim = mesh.perimeter();
  double s = 0.0;
  const int b = trace.size();
  for (int k = 0; k < b; ++k) {
    const double len = trace.edge_length(k, perim);
    s += 0.5 * len * (f[k] + f[(k + 1) % b]);
  }
  return s;
}

double boundary_pairing(const TriMesh& mesh, const BoundaryTrace& trace,
                        const Eigen::VectorXd& f, const Eigen::VectorXd& g) {
  (void)mesh;
  if (f.size() != trace.size() || g.size() != trace.size())
    throw std::invalid_argument("boundary_pairing: size mismatch");
  double s = 0.0;
  const int b = trace.size();
  for (int k = 0; k < b; ++k) {
    const int k1 = (k + 1) % b;
    s += 0.5 * (f[k] + f[k1]) * (g[k1] - g[k]);
  }
  return s;
}

FractionalNormOperator::FractionalNormOperator(const SparseMat& stiffness, const SparseMat& mass,
                                               double exponent)
    : exponent_(exponent) {
  const Eigen::MatrixXd k = Eigen::MatrixXd(stiffness);
  const Eigen::MatrixXd m = Eigen::MatrixXd(mass);
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(k, m);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("FractionalNormOperator: eigendecomposition failed");
  eigenvalues_ = solver.eigenvalues().cwiseMax(0.0);  // clip eigensolver noise
  weights_ = (1.0 + eigenvalues_.array()).pow(exponent_).matrix();
  m_modes_ = m * solver.eigenvectors();
}

double FractionalNormOperator::norm_squared(const Eigen::VectorXd& u) const {
  if (u.size() != dimension())
    throw std::invalid_argument("FractionalNormOperator: dimension mismatch");
  const Eigen::VectorXd c = m_modes_.transpose() * u;  // <u, v_k>_M
  return (weights_.array() * c.array().square()).sum();
}

Eigen::VectorXd FractionalNormOperator::gradient(const Eigen::VectorXd& u) const {
  return 2.0 * apply(u);
}

Eigen::VectorXd FractionalNormOperator::apply(const Eigen::VectorXd& u) const {
  if (u.size() != dimension())
    throw std::invalid_argument("FractionalNormOperator: dimension mismatch");
  const Eigen::VectorXd c = m_modes_.transpose() * u;
  return m_modes_ * (weights_.array() * c.array()).matrix();
}

Eigen::MatrixXd FractionalNormOperator::weight_matrix() const {
  return m_modes_ * weights_.asDiagonal() * m_modes_.transpose();
}

}  // namespace varinv
