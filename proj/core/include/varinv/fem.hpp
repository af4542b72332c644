#pragma once

#include <array>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "varinv/mesh.hpp"

namespace varinv {

using SparseMat = Eigen::SparseMatrix<double>;

/// 90-degree rotation (-v2, v1). For a P1 field u, the rotated gradient on a
/// triangle is rot90(grad u).
inline Eigen::Vector2d rot90(const Eigen::Vector2d& v) { return {-v.y(), v.x()}; }

/// Constant P1 hat-function gradients per triangle, plus areas.
/// The three gradients of a triangle sum to zero.
struct ElementGradients {
  std::vector<std::array<Eigen::Vector2d, 3>> grads;
  std::vector<double> areas;

  int triangle_count() const { return static_cast<int>(areas.size()); }

  /// Gradient of the P1 interpolant of nodal values u on triangle t.
  Eigen::Vector2d field_gradient(const TriMesh& mesh, const Eigen::VectorXd& u, int t) const;
};

/// Throws on degenerate (nonpositive-area) triangles.
ElementGradients p1_gradients(const TriMesh& mesh);

/// sigma-weighted P1 stiffness matrix, K[a,b] = sum_T sigma_T |T| grad h_a . grad h_b.
/// Symmetric positive semidefinite with constants in the kernel.
/// Throws if any weight is nonpositive.
SparseMat weighted_stiffness(const TriMesh& mesh, const ElementGradients& eg,
                             const Eigen::VectorXd& sigma);

/// Exact (consistent) P1 mass matrix.
SparseMat mass_matrix(const TriMesh& mesh, const ElementGradients& eg);

/// Trapezoid rule over the boundary loop for nodal values f (in loop order);
/// exact for edgewise-linear integrands.
double boundary_integral(const TriMesh& mesh, const BoundaryTrace& trace,
                         const Eigen::VectorXd& f);

/// Loop pairing  sum_edges (f_a + f_b)/2 (g_b - g_a), i.e. the trapezoid
/// evaluation of the closed-loop integral of f dg/ds. For P1 fields this
/// pairs the traces so that  sum_T |T| grad(f) . rot90(grad(g)) = -pairing
/// exactly (elementwise divergence theorem; rot90 gradients have continuous
/// normal flux across edges).
double boundary_pairing(const TriMesh& mesh, const BoundaryTrace& trace,
                        const Eigen::VectorXd& f, const Eigen::VectorXd& g);

/// Spectral realization of the fractional Sobolev norm
///   |u|_s^2 = sum_k (1 + lambda_k)^s <u, v_k>_M^2
/// from the generalized eigenpairs K v = lambda M v with M-orthonormal
/// eigenvectors. s=0 recovers the L2 norm, s=1 the full H1 norm.
/// Immutable after construction; evaluations are pure and reentrant.
class FractionalNormOperator {
 public:
  FractionalNormOperator() = default;
  /// Dense generalized symmetric eigendecomposition of (K, M).
  FractionalNormOperator(const SparseMat& stiffness, const SparseMat& mass, double exponent);

  double exponent() const { return exponent_; }
  int dimension() const { return static_cast<int>(weights_.size()); }
  const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }

  /// |u|_s^2. Throws on dimension mismatch.
  double norm_squared(const Eigen::VectorXd& u) const;
  /// Gradient of norm_squared: 2 sum_k (1+lambda_k)^s <u,v_k>_M M v_k.
  Eigen::VectorXd gradient(const Eigen::VectorXd& u) const;
  /// Dense weight matrix W with norm_squared(u) = u' W u (for QP assembly).
  Eigen::MatrixXd weight_matrix() const;
  /// W u without forming W.
  Eigen::VectorXd apply(const Eigen::VectorXd& u) const;

 private:
  double exponent_ = 0.0;
  Eigen::VectorXd eigenvalues_;  // lambda_k >= 0
  Eigen::VectorXd weights_;      // (1 + lambda_k)^s
  Eigen::MatrixXd m_modes_;      // columns M v_k
};

}  // namespace varinv
