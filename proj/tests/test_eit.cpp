#include <doctest.h>

#include <cmath>
#include <functional>

#include <Eigen/Dense>

#include "oracles.hpp"
#include "varinv/eit.hpp"
#include "varinv/optimizer.hpp"
#include "varinv/rng.hpp"

using namespace varinv;

namespace {

struct Setup {
  TriMesh mesh;
  ElementGradients eg;
  BoundaryTrace trace;

  explicit Setup(int n)
      : mesh(build_structured_mesh(n)), eg(p1_gradients(mesh)),
        trace(boundary_trace_indices(mesh)) {}

  Eigen::VectorXd field(const std::function<double(double, double)>& f) const {
    Eigen::VectorXd u(mesh.node_count());
    for (int v = 0; v < mesh.node_count(); ++v)
      u[v] = f(mesh.nodes[static_cast<std::size_t>(v)].x(),
               mesh.nodes[static_cast<std::size_t>(v)].y());
    return u;
  }
};

ConductivityField constant_sigma(const TriMesh& mesh, double value, double lo = 0.1,
                                 double hi = 10.0) {
  return {Eigen::VectorXd::Constant(mesh.triangle_count(), value), lo, hi};
}

StateEnsemble random_state(const TriMesh& mesh, int experiments, Rng& rng) {
  StateEnsemble s = StateEnsemble::zeros(experiments, mesh.node_count());
  for (int i = 0; i < experiments; ++i) {
    for (int v = 0; v < mesh.node_count(); ++v) {
      s.phi[static_cast<std::size_t>(i)][v] = rng.normal();
      s.psi[static_cast<std::size_t>(i)][v] = rng.normal();
    }
  }
  return s;
}

ConductivityField random_sigma(const TriMesh& mesh, Rng& rng, double lo = 0.5, double hi = 2.0) {
  Eigen::VectorXd v(mesh.triangle_count());
  for (int t = 0; t < v.size(); ++t) v[t] = lo + (hi - lo) * rng.uniform();
  return {v, lo, hi};
}

double objective_of_packed(const Setup& s, bool kv, int experiments, const Eigen::VectorXd& z,
                           double lo, double hi) {
  ConductivityField sigma{z.head(s.mesh.triangle_count()), lo, hi};
  StateEnsemble st = StateEnsemble::zeros(experiments, s.mesh.node_count());
  unpack_state(z.tail(z.size() - s.mesh.triangle_count()), st);
  return kv ? eval_jkv(s.mesh, s.eg, sigma, st).value : eval_qa(s.mesh, s.eg, sigma, st).value;
}

}  // namespace

TEST_CASE("residual vanishes for the exact affine pair") {
  const Setup s(4);
  StateEnsemble st = StateEnsemble::zeros(1, s.mesh.node_count());
  st.phi[0] = s.field([](double x, double) { return x; });
  st.psi[0] = s.field([](double, double y) { return -y; });
  const ResidualField res = residual_a(s.mesh, s.eg, constant_sigma(s.mesh, 1.0), st);
  CHECK(res[0].cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("residual constant cases") {
  const Setup s(3);
  StateEnsemble st = StateEnsemble::zeros(1, s.mesh.node_count());
  st.phi[0] = s.field([](double x, double) { return x; });
  // sigma = 4, psi = 0: A = 2 grad(x1) = (2, 0)
  const ResidualField r1 = residual_a(s.mesh, s.eg, constant_sigma(s.mesh, 4.0), st);
  for (int t = 0; t < s.mesh.triangle_count(); ++t) {
    CHECK(r1[0](0, t) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(r1[0](1, t) == doctest::Approx(0.0).epsilon(1e-14));
  }
  // sigma = 1, phi = 0, psi = x1: A = -rot90(grad x1) = -(0, 1)
  st.phi[0].setZero();
  st.psi[0] = s.field([](double x, double) { return x; });
  const ResidualField r2 = residual_a(s.mesh, s.eg, constant_sigma(s.mesh, 1.0), st);
  for (int t = 0; t < s.mesh.triangle_count(); ++t) {
    CHECK(r2[0](0, t) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(r2[0](1, t) == doctest::Approx(-1.0).epsilon(1e-14));
  }

  ConductivityField bad = constant_sigma(s.mesh, 1.0);
  bad.values[0] = -0.5;
  CHECK_THROWS_AS(residual_a(s.mesh, s.eg, bad, st), std::invalid_argument);
}

TEST_CASE("qa and jkv pinned values") {
  const Setup s(4);
  StateEnsemble st = StateEnsemble::zeros(1, s.mesh.node_count());
  st.phi[0] = s.field([](double x, double) { return x; });
  st.psi[0] = s.field([](double, double y) { return -y; });

  CHECK(eval_qa(s.mesh, s.eg, constant_sigma(s.mesh, 1.0), st).value ==
        doctest::Approx(0.0).epsilon(1e-14));
  CHECK(eval_jkv(s.mesh, s.eg, constant_sigma(s.mesh, 1.0), st).value ==
        doctest::Approx(1.0).epsilon(1e-13));

  st.psi[0].setZero();
  CHECK(eval_qa(s.mesh, s.eg, constant_sigma(s.mesh, 4.0), st).value ==
        doctest::Approx(2.0).epsilon(1e-13));
  CHECK(eval_jkv(s.mesh, s.eg, constant_sigma(s.mesh, 4.0), st).value ==
        doctest::Approx(2.0).epsilon(1e-13));
}

TEST_CASE("qa definiteness: zero iff the residual vanishes") {
  const Setup s(3);
  Rng rng(77);
  for (int rep = 0; rep < 20; ++rep) {
    const ConductivityField sigma = random_sigma(s.mesh, rng);
    StateEnsemble st = random_state(s.mesh, 2, rng);
    const double qa = eval_qa(s.mesh, s.eg, sigma, st).value;
    const ResidualField res = residual_a(s.mesh, s.eg, sigma, st);
    double max_res = 0.0;
    for (const auto& r : res) max_res = std::max(max_res, r.cwiseAbs().maxCoeff());
    CHECK(qa >= 0.0);
    if (max_res > 1e-7) CHECK(qa > 0.0);
  }
}

TEST_CASE("analytic gradients of qa and jkv match central finite differences") {
  const Setup s(3);
  const int experiments = 2;
  Rng rng(123);
  for (int rep = 0; rep < 5; ++rep) {
    const ConductivityField sigma = random_sigma(s.mesh, rng);
    const StateEnsemble st = random_state(s.mesh, experiments, rng);

    Eigen::VectorXd z(s.mesh.triangle_count() + 2 * experiments * s.mesh.node_count());
    z.head(s.mesh.triangle_count()) = sigma.values;
    z.tail(z.size() - s.mesh.triangle_count()) = pack_state(st);

    for (const bool kv : {false, true}) {
      const ObjectiveEval ev =
          kv ? eval_jkv(s.mesh, s.eg, sigma, st) : eval_qa(s.mesh, s.eg, sigma, st);
      Eigen::VectorXd analytic(z.size());
      analytic.head(s.mesh.triangle_count()) = ev.grad_sigma;
      StateEnsemble g = st;
      g.phi = ev.grad_phi;
      g.psi = ev.grad_psi;
      analytic.tail(z.size() - s.mesh.triangle_count()) = pack_state(g);

      const Eigen::VectorXd fd = oracles::fd_gradient(
          [&](const Eigen::VectorXd& zz) {
            return objective_of_packed(s, kv, experiments, zz, sigma.lower, sigma.upper);
          },
          z, 1e-5);
      CHECK(oracles::rel_error(analytic, fd) < 1e-6);
    }
  }
}

TEST_CASE("kv identity: pinned example and random instances") {
  const Setup s(4);
  StateEnsemble st = StateEnsemble::zeros(1, s.mesh.node_count());
  st.phi[0] = s.field([](double x, double) { return x; });
  st.psi[0] = s.field([](double, double y) { return -y; });
  const KvIdentity id = kv_identity_gap(s.mesh, s.eg, s.trace, constant_sigma(s.mesh, 1.0), st);
  CHECK(id.gap == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(id.cross_volume == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(id.boundary_form == doctest::Approx(-1.0).epsilon(1e-13));

  Rng rng(2024);
  for (int rep = 0; rep < 100; ++rep) {
    const ConductivityField sigma = random_sigma(s.mesh, rng);
    const StateEnsemble state = random_state(s.mesh, 2, rng);
    const KvIdentity rid = kv_identity_gap(s.mesh, s.eg, s.trace, sigma, state);
    CHECK(std::abs(rid.gap) <= 1e-12 * (1.0 + rid.jkv));
    CHECK(std::abs(rid.cross_volume + rid.boundary_form) <=
          1e-12 * (1.0 + std::abs(rid.cross_volume)));
  }
}

TEST_CASE("gamma from current: zero, circle and square-wave cases") {
  const Setup s(4);

  CHECK(gamma_from_current(s.mesh, s.trace, Eigen::VectorXd::Zero(s.trace.size()))
            .cwiseAbs()
            .maxCoeff() == 0.0);

  // Unit-circle reference: polygonal loop, j = cos(theta) -> gamma = -sin(theta).
  {
    const int m = 256;
    TriMesh circle;
    circle.nodes.resize(static_cast<std::size_t>(m));
    for (int k = 0; k < m; ++k) {
      const double theta = 2.0 * M_PI * k / m;
      circle.nodes[static_cast<std::size_t>(k)] = {std::cos(theta), std::sin(theta)};
    }
    circle.boundary_nodes.resize(static_cast<std::size_t>(m));
    circle.boundary_edges.resize(static_cast<std::size_t>(m));
    circle.boundary_arclength.resize(static_cast<std::size_t>(m));
    double arc = 0.0;
    for (int k = 0; k < m; ++k) {
      circle.boundary_nodes[static_cast<std::size_t>(k)] = k;
      circle.boundary_edges[static_cast<std::size_t>(k)] = {k, (k + 1) % m};
      circle.boundary_arclength[static_cast<std::size_t>(k)] = arc;
      arc += (circle.nodes[static_cast<std::size_t>((k + 1) % m)] -
              circle.nodes[static_cast<std::size_t>(k)])
                 .norm();
    }
    BoundaryTrace trace;
    trace.nodes = circle.boundary_nodes;
    trace.arclength = circle.boundary_arclength;

    Eigen::VectorXd j(m);
    for (int k = 0; k < m; ++k) j[k] = std::cos(2.0 * M_PI * k / m);
    const Eigen::VectorXd gamma = gamma_from_current(circle, trace, j, 1e-8);
    for (int k = 0; k < m; ++k) {
      const double target = -std::sin(2.0 * M_PI * k / m);
      CHECK(std::abs(gamma[k] - target) < 2e-3);
    }
  }

  // Square wave: +1 on the bottom edge, -1 on the top edge.
  {
    const int b = s.trace.size();
    Eigen::VectorXd j = Eigen::VectorXd::Zero(b);
    for (int k = 0; k < b; ++k) {
      const auto& p =
          s.mesh.nodes[static_cast<std::size_t>(s.trace.nodes[static_cast<std::size_t>(k)])];
      if (p.y() == 0.0) j[k] = 1.0;
      if (p.y() == 1.0) j[k] = -1.0;
    }
    const Eigen::VectorXd gamma = gamma_from_current(s.mesh, s.trace, j);
    const double corner_smoothing = 0.5 / 4.0;  // half an edge at each corner
    for (int k = 0; k < b; ++k) {
      const double arc = s.trace.arclength[static_cast<std::size_t>(k)];
      if (arc <= 1.0) CHECK(gamma[k] == doctest::Approx(-arc).epsilon(1e-14));
      else if (arc > 1.0 && arc < 2.0)
        CHECK(gamma[k] == doctest::Approx(-1.0 - corner_smoothing));
      else if (arc > 3.0) CHECK(gamma[k] == doctest::Approx(corner_smoothing));
    }
    CHECK_NOTHROW(gamma_from_current(s.mesh, s.trace, j, 1e-12));
  }

  // incompatible current rejected with the closure residual reported
  const Eigen::VectorXd bad = Eigen::VectorXd::Ones(s.trace.size());
  CHECK_THROWS_WITH_AS(gamma_from_current(s.mesh, s.trace, bad),
                       doctest::Contains("closure residual"), std::invalid_argument);
}

TEST_CASE("dirichlet forward solve: affine data reproduced exactly") {
  const Setup s(6);
  const Eigen::VectorXd weights = Eigen::VectorXd::Ones(s.mesh.triangle_count());
  const Eigen::VectorXd exact = s.field([](double x, double) { return x; });
  const Eigen::VectorXd u =
      forward_dirichlet(s.mesh, s.eg, weights, s.trace, trace_values(s.trace, exact));
  CHECK((u - exact).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("neumann forward solve: corner-averaged nu1 data gives x1 exactly") {
  const Setup s(5);
  const Eigen::VectorXd weights = Eigen::VectorXd::Ones(s.mesh.triangle_count());
  const int b = s.trace.size();
  Eigen::VectorXd j(b);
  for (int k = 0; k < b; ++k) {
    const auto& p =
        s.mesh.nodes[static_cast<std::size_t>(s.trace.nodes[static_cast<std::size_t>(k)])];
    double nu1 = 0.0;
    if (p.x() == 1.0) nu1 += 1.0;
    if (p.x() == 0.0) nu1 -= 1.0;
    const bool corner = (p.x() == 0.0 || p.x() == 1.0) && (p.y() == 0.0 || p.y() == 1.0);
    j[k] = corner ? 0.5 * nu1 : nu1;
  }
  const Eigen::VectorXd u = forward_neumann(s.mesh, s.eg, weights, s.trace, j, 0, 0.0);
  const Eigen::VectorXd exact = s.field([](double x, double) { return x; });
  CHECK((u - exact).lpNorm<Eigen::Infinity>() < 1e-11);

  CHECK_THROWS_AS(
      forward_neumann(s.mesh, s.eg, weights, s.trace, Eigen::VectorXd::Ones(b), 0, 0.0),
      std::invalid_argument);
}

TEST_CASE("two-layer dirichlet solve matches the 1-D closed form") {
  // sigma = 2 on [0, 1/2], 1 on [1/2, 1]; flux continuity fixes the profile:
  // phi(x) = (2/3) x left of the interface, 1/3 + (4/3)(x - 1/2) right of it.
  const Setup s(8);
  Eigen::VectorXd sigma(s.mesh.triangle_count());
  for (int t = 0; t < s.mesh.triangle_count(); ++t) {
    const auto& tri = s.mesh.triangles[static_cast<std::size_t>(t)];
    const double midx = (s.mesh.nodes[static_cast<std::size_t>(tri[0])].x() +
                         s.mesh.nodes[static_cast<std::size_t>(tri[1])].x() +
                         s.mesh.nodes[static_cast<std::size_t>(tri[2])].x()) /
                        3.0;
    sigma[t] = midx < 0.5 ? 2.0 : 1.0;
  }
  const auto profile = [](double x) {
    return x <= 0.5 ? (2.0 / 3.0) * x : 1.0 / 3.0 + (4.0 / 3.0) * (x - 0.5);
  };
  const Eigen::VectorXd exact = s.field([&](double x, double) { return profile(x); });
  const Eigen::VectorXd u =
      forward_dirichlet(s.mesh, s.eg, sigma, s.trace, trace_values(s.trace, exact));
  CHECK((u - exact).lpNorm<Eigen::Infinity>() < 1e-10);

  // flux sigma * dphi/dx1 = sigma_L * A_L = 2 * (2/3) = 4/3 on both layers
  for (int t = 0; t < s.mesh.triangle_count(); ++t) {
    const double flux = sigma[t] * s.eg.field_gradient(s.mesh, u, t).x();
    CHECK(flux == doctest::Approx(4.0 / 3.0).epsilon(1e-9));
  }
}

TEST_CASE("add_noise: bound, determinism and the delta = 0 identity") {
  const Setup s(4);
  BoundaryRecord record;
  record.tau = 1.5;
  Rng rng(5);
  for (int i = 0; i < 2; ++i) {
    Eigen::VectorXd ups(s.trace.size()), gam(s.trace.size()), cur(s.trace.size());
    for (int k = 0; k < s.trace.size(); ++k) {
      ups[k] = rng.normal();
      gam[k] = rng.normal();
      cur[k] = rng.normal();
    }
    record.upsilon.push_back(ups);
    record.gamma.push_back(gam);
    record.current.push_back(cur);
  }

  const BoundaryRecord same = add_noise(record, 0.0, 42);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK((same.upsilon[i] - record.upsilon[i]).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK((same.gamma[i] - record.gamma[i]).lpNorm<Eigen::Infinity>() == 0.0);
  }

  const double delta = 0.01;
  const BoundaryRecord a = add_noise(record, delta, 42);
  const BoundaryRecord b = add_noise(record, delta, 42);
  const BoundaryRecord c = add_noise(record, delta, 43);
  double max_pert = 0.0;
  bool identical_ab = true;
  bool differs_c = false;
  for (std::size_t i = 0; i < 2; ++i) {
    max_pert =
        std::max(max_pert, (a.upsilon[i] - record.upsilon[i]).lpNorm<Eigen::Infinity>());
    max_pert = std::max(max_pert, (a.gamma[i] - record.gamma[i]).lpNorm<Eigen::Infinity>());
    if ((a.upsilon[i] - b.upsilon[i]).lpNorm<Eigen::Infinity>() != 0.0) identical_ab = false;
    if ((a.gamma[i] - b.gamma[i]).lpNorm<Eigen::Infinity>() != 0.0) identical_ab = false;
    if ((a.upsilon[i] - c.upsilon[i]).lpNorm<Eigen::Infinity>() != 0.0) differs_c = true;
    CHECK((a.current[i] - record.current[i]).lpNorm<Eigen::Infinity>() == 0.0);
  }
  CHECK(max_pert <= delta);
  CHECK(max_pert > 0.0);
  CHECK(identical_ab);
  CHECK(differs_c);
  CHECK(a.delta == delta);
  CHECK(a.seed == 42);
}
