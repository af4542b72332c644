#pragma once

#include <array>
#include <iosfwd>
#include <vector>

#include <Eigen/Core>

namespace varinv {

/// 2-D conforming triangulation of the unit square with an arclength
/// parametrized boundary loop.
///
/// Conventions (fixed, relied on by everything downstream):
///  - triangles are counter-clockwise (positive signed area),
///  - the boundary loop is a single closed counter-clockwise cycle starting
///    at the corner (0,0),
///  - boundary_arclength[k] is the arclength coordinate of boundary_nodes[k],
///    strictly increasing with boundary_arclength[0] == 0.
///
/// A TriMesh is immutable after construction and safe to share across
/// concurrent solver instances.
struct TriMesh {
  std::vector<Eigen::Vector2d> nodes;
  std::vector<std::array<int, 3>> triangles;
  std::vector<std::array<int, 2>> boundary_edges;  ///< ordered closed loop
  std::vector<int> boundary_nodes;                 ///< loop order
  std::vector<double> boundary_arclength;          ///< per boundary node

  int node_count() const { return static_cast<int>(nodes.size()); }
  int triangle_count() const { return static_cast<int>(triangles.size()); }
  int boundary_count() const { return static_cast<int>(boundary_nodes.size()); }

  /// Total arclength of the boundary loop.
  double perimeter() const;

  /// Signed area of triangle t (positive for a valid mesh).
  double signed_area(int t) const;
};

/// Ordered boundary view: node indices counter-clockwise from (0,0) with
/// their arclength coordinates.
struct BoundaryTrace {
  std::vector<int> nodes;
  std::vector<double> arclength;

  int size() const { return static_cast<int>(nodes.size()); }
  /// Length of the loop edge leaving node k (wraps at the end).
  double edge_length(int k, double perimeter) const;
};

/// Uniform n x n grid of the unit square, each cell split along the
/// lower-left -> upper-right diagonal. (n+1)^2 nodes, 2 n^2 triangles,
/// perimeter 4. Throws std::invalid_argument for n < 1.
TriMesh build_structured_mesh(int n);

/// Boundary nodes in loop order starting at (0,0), with arclength.
BoundaryTrace boundary_trace_indices(const TriMesh& mesh);

/// Checks all structural invariants (positive areas, closed single loop,
/// strictly increasing arclength). Throws std::invalid_argument on the first
/// violation.
void validate_mesh(const TriMesh& mesh);

/// Text format: header "N T B", then N node lines "x y", T triangle lines
/// "i j k", B boundary loop lines "i j". Indices are 0-based.
void write_mesh(std::ostream& os, const TriMesh& mesh);
TriMesh read_mesh(std::istream& is);

}  // namespace varinv
