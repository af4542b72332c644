#include "varinv/mesh.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace varinv {

namespace {

double triangle_signed_area(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                            const Eigen::Vector2d& c) {
  return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y()));
}

}  // namespace

double TriMesh::signed_area(int t) const {
  const auto& tri = triangles[static_cast<std::size_t>(t)];
  return triangle_signed_area(nodes[static_cast<std::size_t>(tri[0])],
                              nodes[static_cast<std::size_t>(tri[1])],
                              nodes[static_cast<std::size_t>(tri[2])]);
}

double TriMesh::perimeter() const {
  double s = 0.0;
  for (const auto& e : boundary_edges) {
    s += (nodes[static_cast<std::size_t>(e[1])] - nodes[static_cast<std::size_t>(e[0])]).norm();
  }
  return s;
}

double BoundaryTrace::edge_length(int k, double perimeter) const {
  const int b = size();
  if (k + 1 < b) return arclength[static_cast<std::size_t>(k + 1)] - arclength[static_cast<std::size_t>(k)];
  return perimeter - arclength[static_cast<std::size_t>(k)];
}

TriMesh build_structured_mesh(int n) {
  if (n < 1) throw std::invalid_argument("build_structured_mesh: n must be >= 1");

  TriMesh mesh;
  const int m = n + 1;
  const double h = 1.0 / n;
  mesh.nodes.reserve(static_cast<std::size_t>(m) * m);
  for (int j = 0; j < m; ++j) {
    for (int i = 0; i < m; ++i) {
      mesh.nodes.emplace_back(i * h, j * h);
    }
  }
  auto id = [m](int i, int j) { return j * m + i; };

  mesh.triangles.reserve(static_cast<std::size_t>(2) * n * n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const int a = id(i, j), b = id(i + 1, j), c = id(i + 1, j + 1), d = id(i, j + 1);
      mesh.triangles.push_back({a, b, c});
      mesh.triangles.push_back({a, c, d});
    }
  }

  // Counter-clockwise loop from (0,0): bottom, right, top, left.
  std::vector<int> loop;
  loop.reserve(static_cast<std::size_t>(4) * n);
  for (int i = 0; i < n; ++i) loop.push_back(id(i, 0));
  for (int j = 0; j < n; ++j) loop.push_back(id(n, j));
  for (int i = n; i > 0; --i) loop.push_back(id(i, n));
  for (int j = n; j > 0; --j) loop.push_back(id(0, j));

  mesh.boundary_nodes = loop;
  mesh.boundary_arclength.resize(loop.size());
  mesh.boundary_edges.reserve(loop.size());
  double s = 0.0;
  for (std::size_t k = 0; k < loop.size(); ++k) {
    mesh.boundary_arclength[k] = s;
    const int a = loop[k];
    const int b = loop[(k + 1) % loop.size()];
    mesh.boundary_edges.push_back({a, b});
    s += (mesh.nodes[static_cast<std::size_t>(b)] - mesh.nodes[static_cast<std::size_t>(a)]).norm();
  }

  validate_mesh(mesh);
  return mesh;
}

BoundaryTrace boundary_trace_indices(const TriMesh& mesh) {
  BoundaryTrace trace;
  trace.nodes = mesh.boundary_nodes;
  trace.arclength = mesh.boundary_arclength;
  return trace;
}

void validate_mesh(const TriMesh& mesh) {
  if (mesh.nodes.size() < 3 || mesh.triangles.empty())
    throw std::invalid_argument("mesh: too few nodes or triangles");

  const int nn = mesh.node_count();
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    for (int v : mesh.triangles[static_cast<std::size_t>(t)]) {
      if (v < 0 || v >= nn) throw std::invalid_argument("mesh: triangle node index out of range");
    }
    if (mesh.signed_area(t) <= 0.0)
      throw std::invalid_argument("mesh: triangle " + std::to_string(t) +
                                  " has nonpositive signed area");
  }

  if (mesh.boundary_edges.size() != mesh.boundary_nodes.size() ||
      mesh.boundary_arclength.size() != mesh.boundary_nodes.size())
    throw std::invalid_argument("mesh: boundary arrays inconsistent");

  // Single closed loop: edge k ends where edge k+1 starts, last wraps to first.
  const std::size_t b = mesh.boundary_edges.size();
  std::set<int> seen;
  for (std::size_t k = 0; k < b; ++k) {
    const auto& e = mesh.boundary_edges[k];
    const auto& next = mesh.boundary_edges[(k + 1) % b];
    if (e[0] != mesh.boundary_nodes[k]) throw std::invalid_argument("mesh: boundary loop order broken");
    if (e[1] != next[0]) throw std::invalid_argument("mesh: boundary edges do not chain into a loop");
    if (!seen.insert(e[0]).second) throw std::invalid_argument("mesh: boundary node repeated in loop");
  }

  for (std::size_t k = 0; k + 1 < b; ++k) {
    if (!(mesh.boundary_arclength[k] < mesh.boundary_arclength[k + 1]))
      throw std::invalid_argument("mesh: boundary arclength not strictly increasing");
  }
  if (mesh.boundary_arclength[0] != 0.0)
    throw std::invalid_argument("mesh: boundary arclength must start at 0");

  // Cumulative arclength must close to the perimeter.
  const auto& last = mesh.boundary_edges[b - 1];
  const double closing =
      mesh.boundary_arclength[b - 1] +
      (mesh.nodes[static_cast<std::size_t>(last[1])] - mesh.nodes[static_cast<std::size_t>(last[0])]).norm();
  if (std::abs(closing - mesh.perimeter()) > 1e-12 * (1.0 + mesh.perimeter()))
    throw std::invalid_argument("mesh: cumulative arclength does not close the loop");
}

void write_mesh(std::ostream& os, const TriMesh& mesh) {
  os.precision(17);
  os << mesh.node_count() << ' ' << mesh.triangle_count() << ' ' << mesh.boundary_count() << '\n';
  for (const auto& p : mesh.nodes) os << p.x() << ' ' << p.y() << '\n';
  for (const auto& t : mesh.triangles) os << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  for (const auto& e : mesh.boundary_edges) os << e[0] << ' ' << e[1] << '\n';
}

TriMesh read_mesh(std::istream& is) {
  int nn = 0, nt = 0, nb = 0;
  if (!(is >> nn >> nt >> nb)) throw std::invalid_argument("mesh: bad header");
  if (nn < 3 || nt < 1 || nb < 3) throw std::invalid_argument("mesh: implausible header counts");

  TriMesh mesh;
  mesh.nodes.resize(static_cast<std::size_t>(nn));
  for (auto& p : mesh.nodes) {
    if (!(is >> p.x() >> p.y())) throw std::invalid_argument("mesh: bad node line");
  }
  mesh.triangles.resize(static_cast<std::size_t>(nt));
  for (auto& t : mesh.triangles) {
    if (!(is >> t[0] >> t[1] >> t[2])) throw std::invalid_argument("mesh: bad triangle line");
  }
  mesh.boundary_edges.resize(static_cast<std::size_t>(nb));
  mesh.boundary_nodes.resize(static_cast<std::size_t>(nb));
  mesh.boundary_arclength.resize(static_cast<std::size_t>(nb));
  double s = 0.0;
  for (std::size_t k = 0; k < mesh.boundary_edges.size(); ++k) {
    auto& e = mesh.boundary_edges[k];
    if (!(is >> e[0] >> e[1])) throw std::invalid_argument("mesh: bad boundary line");
    mesh.boundary_nodes[k] = e[0];
    mesh.boundary_arclength[k] = s;
    if (e[0] < 0 || e[0] >= nn || e[1] < 0 || e[1] >= nn)
      throw std::invalid_argument("mesh: boundary index out of range");
    s += (mesh.nodes[static_cast<std::size_t>(e[1])] - mesh.nodes[static_cast<std::size_t>(e[0])]).norm();
  }
  validate_mesh(mesh);
  return mesh;
}

}  // namespace varinv
