#include <doctest.h>

#include <sstream>

#include "varinv/mesh.hpp"

using namespace varinv;

TEST_CASE("structured mesh counts") {
  const TriMesh m1 = build_structured_mesh(1);
  CHECK(m1.node_count() == 4);
  CHECK(m1.triangle_count() == 2);
  CHECK(m1.boundary_count() == 4);

  const TriMesh m2 = build_structured_mesh(2);
  CHECK(m2.node_count() == 9);
  CHECK(m2.triangle_count() == 8);
  CHECK(m2.perimeter() == doctest::Approx(4.0).epsilon(1e-14));

  const TriMesh m16 = build_structured_mesh(16);
  CHECK(m16.node_count() == 289);
  CHECK(m16.triangle_count() == 512);
  for (int t = 0; t < m16.triangle_count(); ++t) {
    CHECK(m16.signed_area(t) == doctest::Approx(1.0 / 512.0).epsilon(1e-13));
  }
}

TEST_CASE("mesh rejects n = 0") {
  CHECK_THROWS_AS(build_structured_mesh(0), std::invalid_argument);
  CHECK_THROWS_AS(build_structured_mesh(-3), std::invalid_argument);
}

TEST_CASE("boundary trace ordering and arclength") {
  const TriMesh m1 = build_structured_mesh(1);
  const BoundaryTrace t1 = boundary_trace_indices(m1);
  REQUIRE(t1.size() == 4);
  for (int k = 0; k < 4; ++k) CHECK(t1.arclength[static_cast<std::size_t>(k)] == doctest::Approx(k));

  const TriMesh m2 = build_structured_mesh(2);
  const BoundaryTrace t2 = boundary_trace_indices(m2);
  REQUIRE(t2.size() == 8);
  for (int k = 0; k < 8; ++k)
    CHECK(t2.arclength[static_cast<std::size_t>(k)] == doctest::Approx(0.5 * k));

  for (int n : {1, 2, 3, 7, 16}) {
    const TriMesh m = build_structured_mesh(n);
    const BoundaryTrace t = boundary_trace_indices(m);
    CHECK(m.nodes[static_cast<std::size_t>(t.nodes[0])].norm() == 0.0);  // starts at (0,0)
    for (int k = 0; k + 1 < t.size(); ++k)
      CHECK(t.arclength[static_cast<std::size_t>(k)] < t.arclength[static_cast<std::size_t>(k + 1)]);
  }
}

TEST_CASE("areas sum to one and loop closes for all n") {
  for (int n : {1, 2, 5, 12, 16}) {
    const TriMesh m = build_structured_mesh(n);
    double total = 0.0;
    for (int t = 0; t < m.triangle_count(); ++t) total += m.signed_area(t);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(m.perimeter() == doctest::Approx(4.0).epsilon(1e-12));
  }
}

TEST_CASE("validation rejects a flipped triangle") {
  TriMesh m = build_structured_mesh(2);
  std::swap(m.triangles[3][0], m.triangles[3][1]);
  CHECK_THROWS_AS(validate_mesh(m), std::invalid_argument);
}

TEST_CASE("text round trip") {
  const TriMesh m = build_structured_mesh(3);
  std::stringstream ss;
  write_mesh(ss, m);
  const TriMesh r = read_mesh(ss);
  CHECK(r.node_count() == m.node_count());
  CHECK(r.triangle_count() == m.triangle_count());
  CHECK(r.boundary_count() == m.boundary_count());
  for (int v = 0; v < m.node_count(); ++v)
    CHECK((r.nodes[static_cast<std::size_t>(v)] - m.nodes[static_cast<std::size_t>(v)]).norm() ==
          0.0);
  for (std::size_t k = 0; k < m.boundary_arclength.size(); ++k)
    CHECK(r.boundary_arclength[k] == doctest::Approx(m.boundary_arclength[k]).epsilon(1e-15));

  std::stringstream bad("3 1 3\n0 0\n1 0\n0 1\n0 2 1\n0 1\n1 2\n2 0\n");
  CHECK_THROWS(read_mesh(bad));  // cw triangle rejected on load
}
