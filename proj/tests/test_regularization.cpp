#include <doctest.h>

#include <cmath>

#include <Eigen/Dense>

#include "oracles.hpp"
#include "varinv/optimizer.hpp"
#include "varinv/regularization.hpp"
#include "varinv/rng.hpp"

using namespace varinv;

namespace {

struct Setup {
  TriMesh mesh;
  ElementGradients eg;
  BoundaryTrace trace;
  RegConfig cfg;
  RegOperators ops;

  explicit Setup(int n, bool with_sigma = false)
      : mesh(build_structured_mesh(n)), eg(p1_gradients(mesh)),
        trace(boundary_trace_indices(mesh)) {
    cfg.sigma_component = with_sigma;
    ops = RegOperators::assemble(mesh, eg, cfg);
  }
};

}  // namespace

TEST_CASE("alpha schedule: floor, pinned values and the ratio") {
  RegConfig cfg;
  cfg.alpha_c = {1.0};
  cfg.alpha_p = {1.0};

  const AlphaChoice a = alpha_schedule(cfg, 1e-2);
  CHECK(a.alpha[0] == doctest::Approx(1e-2));
  CHECK(a.ratio == doctest::Approx(1.0));

  const AlphaChoice floor = alpha_schedule(cfg, 0.0);
  CHECK(floor.alpha[0] == doctest::Approx(1e-8));

  cfg.alpha_c = {10.0};
  cfg.alpha_p = {0.5};
  const AlphaChoice b = alpha_schedule(cfg, 1e-4);
  CHECK(b.alpha[0] == doctest::Approx(0.1));
  CHECK(b.ratio == doctest::Approx(1e-3));
  // the schedule keeps delta / alpha bounded as delta -> 0 for p <= 1
  double prev_ratio = b.ratio;
  for (double d : {1e-5, 1e-6, 1e-7}) {
    const AlphaChoice c = alpha_schedule(cfg, d);
    CHECK(c.ratio <= prev_ratio * (1 + 1e-12));
    prev_ratio = c.ratio;
  }

  CHECK_THROWS_AS(alpha_schedule(cfg, -1.0), std::invalid_argument);
}

TEST_CASE("eval_r: zero state, constant eigenfunction, FD gradients") {
  const Setup s(4, true);

  StateEnsemble zero = StateEnsemble::zeros(2, s.mesh.node_count());
  ConductivityField sigma{Eigen::VectorXd::Ones(s.mesh.triangle_count()), 0.5, 2.0};
  const RegEval r0 = eval_r(s.ops, s.cfg, sigma, zero);
  CHECK(r0.components[0] == doctest::Approx(0.0));

  StateEnsemble one = StateEnsemble::zeros(1, s.mesh.node_count());
  one.phi[0] = Eigen::VectorXd::Ones(s.mesh.node_count());
  const RegEval r1 = eval_r(s.ops, s.cfg, sigma, one);
  CHECK(r1.components[0] == doctest::Approx(0.5).epsilon(1e-10));

  // FD check of both component gradients
  Rng rng(9);
  StateEnsemble st = StateEnsemble::zeros(1, s.mesh.node_count());
  for (int v = 0; v < s.mesh.node_count(); ++v) {
    st.phi[0][v] = rng.normal();
    st.psi[0][v] = rng.normal();
  }
  Eigen::VectorXd sig(s.mesh.triangle_count());
  for (int t = 0; t < sig.size(); ++t) sig[t] = 0.6 + rng.uniform();
  const ConductivityField sf{sig, 0.1, 10.0};

  const RegEval ev = eval_r(s.ops, s.cfg, sf, st);
  REQUIRE(ev.components.size() == 2);

  Eigen::VectorXd z(sig.size() + 2 * s.mesh.node_count());
  z.head(sig.size()) = sig;
  z.segment(sig.size(), s.mesh.node_count()) = st.phi[0];
  z.tail(s.mesh.node_count()) = st.psi[0];

  const auto component = [&](const Eigen::VectorXd& zz, int j) {
    ConductivityField cs{zz.head(sig.size()), 0.1, 10.0};
    StateEnsemble cst = StateEnsemble::zeros(1, s.mesh.node_count());
    cst.phi[0] = zz.segment(sig.size(), s.mesh.node_count());
    cst.psi[0] = zz.tail(s.mesh.node_count());
    return eval_r(s.ops, s.cfg, cs, cst).components[static_cast<std::size_t>(j)];
  };

  Eigen::VectorXd analytic0(z.size());
  analytic0.setZero();
  analytic0.segment(sig.size(), s.mesh.node_count()) = ev.grad_phi[0];
  analytic0.tail(s.mesh.node_count()) = ev.grad_psi[0];
  const Eigen::VectorXd fd0 =
      oracles::fd_gradient([&](const Eigen::VectorXd& zz) { return component(zz, 0); }, z, 1e-5);
  CHECK(oracles::rel_error(analytic0, fd0) < 1e-6);

  Eigen::VectorXd analytic1(z.size());
  analytic1.setZero();
  analytic1.head(sig.size()) = ev.grad_sigma;
  const Eigen::VectorXd fd1 =
      oracles::fd_gradient([&](const Eigen::VectorXd& zz) { return component(zz, 1); }, z, 1e-5);
  CHECK(oracles::rel_error(analytic1, fd1) < 1e-6);
}

TEST_CASE("eval_r components are convex along random chords") {
  const Setup s(3, true);
  Rng rng(31);
  const int nn = s.mesh.node_count();
  for (int rep = 0; rep < 20; ++rep) {
    StateEnsemble a = StateEnsemble::zeros(1, nn), b = StateEnsemble::zeros(1, nn);
    Eigen::VectorXd sa(s.mesh.triangle_count()), sb(s.mesh.triangle_count());
    for (int v = 0; v < nn; ++v) {
      a.phi[0][v] = rng.normal();
      a.psi[0][v] = rng.normal();
      b.phi[0][v] = rng.normal();
      b.psi[0][v] = rng.normal();
    }
    for (int t = 0; t < sa.size(); ++t) {
      sa[t] = 0.5 + rng.uniform();
      sb[t] = 0.5 + rng.uniform();
    }
    StateEnsemble mid = StateEnsemble::zeros(1, nn);
    mid.phi[0] = 0.5 * (a.phi[0] + b.phi[0]);
    mid.psi[0] = 0.5 * (a.psi[0] + b.psi[0]);
    const ConductivityField fa{sa, 0.1, 10.0}, fb{sb, 0.1, 10.0},
        fm{0.5 * (sa + sb), 0.1, 10.0};

    const RegEval ra = eval_r(s.ops, s.cfg, fa, a);
    const RegEval rb = eval_r(s.ops, s.cfg, fb, b);
    const RegEval rm = eval_r(s.ops, s.cfg, fm, mid);
    for (std::size_t j = 0; j < ra.components.size(); ++j) {
      CHECK(rm.components[j] <=
            0.5 * ra.components[j] + 0.5 * rb.components[j] + 1e-12);
    }
  }
}

namespace {

BoundaryRecord simple_record(const Setup& s, int experiments, double delta, double tau) {
  BoundaryRecord rec;
  rec.delta = delta;
  rec.tau = tau;
  Rng rng(7);
  for (int i = 0; i < experiments; ++i) {
    Eigen::VectorXd ups(s.trace.size()), gam(s.trace.size());
    for (int k = 0; k < s.trace.size(); ++k) {
      ups[k] = rng.normal();
      gam[k] = rng.normal();
    }
    rec.upsilon.push_back(ups);
    rec.gamma.push_back(gam);
    rec.current.push_back(Eigen::VectorXd::Zero(s.trace.size()));
  }
  return rec;
}

}  // namespace

TEST_CASE("project_admissible: clamps, idempotence, nonexpansiveness") {
  const Setup s(3);
  const BoundaryRecord rec = simple_record(s, 2, 0.1, 1.5);

  ConductivityField sigma{Eigen::VectorXd::Constant(s.mesh.triangle_count(), 10.0), 0.5, 2.0};
  StateEnsemble st = StateEnsemble::zeros(2, s.mesh.node_count());
  Rng rng(13);
  for (int i = 0; i < 2; ++i) {
    for (int v = 0; v < s.mesh.node_count(); ++v) {
      st.phi[static_cast<std::size_t>(i)][v] = 3.0 * rng.normal();
      st.psi[static_cast<std::size_t>(i)][v] = 3.0 * rng.normal();
    }
  }

  ConductivityField ps = sigma;
  StateEnsemble pu = st;
  project_admissible(ps, pu, rec, s.trace);
  CHECK(ps.values.maxCoeff() == doctest::Approx(2.0));  // sigma = 10 clamps to 2
  CHECK(admissible_violation(ps, pu, rec, s.trace) == 0.0);

  // idempotence
  ConductivityField ps2 = ps;
  StateEnsemble pu2 = pu;
  project_admissible(ps2, pu2, rec, s.trace);
  CHECK((ps2.values - ps.values).lpNorm<Eigen::Infinity>() == 0.0);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK((pu2.phi[i] - pu.phi[i]).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK((pu2.psi[i] - pu.psi[i]).lpNorm<Eigen::Infinity>() == 0.0);
  }

  // componentwise nonexpansive: |P(a) - P(b)| <= |a - b|
  ConductivityField qa = sigma;
  StateEnsemble qu = st;
  qa.values = sigma.values.array() - 0.7;
  for (std::size_t i = 0; i < 2; ++i) qu.phi[i] = st.phi[i].array() + 0.3;
  ConductivityField qa_p = qa;
  StateEnsemble qu_p = qu;
  project_admissible(qa_p, qu_p, rec, s.trace);
  for (int t = 0; t < sigma.values.size(); ++t) {
    CHECK(std::abs(qa_p.values[t] - ps.values[t]) <=
          std::abs(qa.values[t] - sigma.values[t]) + 1e-15);
  }
  for (std::size_t i = 0; i < 2; ++i) {
    for (int v = 0; v < s.mesh.node_count(); ++v) {
      CHECK(std::abs(qu_p.phi[i][v] - pu.phi[i][v]) <=
            std::abs(qu.phi[i][v] - st.phi[i][v]) + 1e-15);
    }
  }

  // pinned boundary example: value 1.25 with box [0.9, 1.1] -> 1.1
  BoundaryRecord unit = rec;
  for (auto& ups : unit.upsilon) ups.setOnes();
  unit.delta = 0.1;
  unit.tau = 1.0;
  StateEnsemble su = StateEnsemble::zeros(2, s.mesh.node_count());
  for (auto& phi : su.phi) phi.setConstant(1.25);
  ConductivityField ss{Eigen::VectorXd::Ones(s.mesh.triangle_count()), 0.5, 2.0};
  project_admissible(ss, su, unit, s.trace);
  CHECK(su.phi[0][s.trace.nodes[0]] == doctest::Approx(1.1));

  ConductivityField empty{Eigen::VectorXd::Ones(s.mesh.triangle_count()), 2.0, 0.5};
  CHECK_THROWS_AS(project_admissible(empty, su, unit, s.trace), std::invalid_argument);
}

TEST_CASE("exact solution stays admissible under the noise bound") {
  // |data_noisy - data_exact|_inf <= delta and tau > 1 -> truth passes unchanged
  const Setup s(4);
  Rng rng(3);
  StateEnsemble truth = StateEnsemble::zeros(2, s.mesh.node_count());
  for (int i = 0; i < 2; ++i) {
    for (int v = 0; v < s.mesh.node_count(); ++v) {
      truth.phi[static_cast<std::size_t>(i)][v] = rng.normal();
      truth.psi[static_cast<std::size_t>(i)][v] = rng.normal();
    }
  }
  BoundaryRecord exact;
  exact.tau = 1.5;
  for (int i = 0; i < 2; ++i) {
    exact.upsilon.push_back(trace_values(s.trace, truth.phi[static_cast<std::size_t>(i)]));
    exact.gamma.push_back(trace_values(s.trace, truth.psi[static_cast<std::size_t>(i)]));
    exact.current.push_back(Eigen::VectorXd::Zero(s.trace.size()));
  }
  const double delta = 0.05;
  const BoundaryRecord noisy = add_noise(exact, delta, 99);

  ConductivityField sigma{Eigen::VectorXd::Ones(s.mesh.triangle_count()), 0.5, 2.0};
  CHECK(admissible_violation(sigma, truth, noisy, s.trace) == 0.0);
  ConductivityField ps = sigma;
  StateEnsemble pt = truth;
  project_admissible(ps, pt, noisy, s.trace);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK((pt.phi[i] - truth.phi[i]).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK((pt.psi[i] - truth.psi[i]).lpNorm<Eigen::Infinity>() == 0.0);
  }
}

TEST_CASE("w11 boundary norm: pinned values and norm axioms") {
  const Setup s1(1);
  CHECK(w11_boundary_norm(s1.mesh, s1.trace, Eigen::VectorXd::Ones(4)) == doctest::Approx(4.0));
  CHECK(w11_boundary_norm(s1.mesh, s1.trace, Eigen::VectorXd::Zero(4)) == doctest::Approx(0.0));
  // hat of height 1 over two adjacent unit edges: integral 1, variation 2
  Eigen::VectorXd hat(4);
  hat << 0.0, 1.0, 0.0, 0.0;
  CHECK(w11_boundary_norm(s1.mesh, s1.trace, hat) == doctest::Approx(3.0));

  const Setup s(4);
  Rng rng(21);
  for (int rep = 0; rep < 30; ++rep) {
    Eigen::VectorXd a(s.trace.size()), b(s.trace.size());
    for (int k = 0; k < s.trace.size(); ++k) {
      a[k] = rng.normal();
      b[k] = rng.normal();
    }
    const double na = w11_boundary_norm(s.mesh, s.trace, a);
    const double nb = w11_boundary_norm(s.mesh, s.trace, b);
    const double nab = w11_boundary_norm(s.mesh, s.trace, a + b);
    CHECK(nab <= na + nb + 1e-12);
    const double lambda = rng.uniform(-3.0, 3.0);
    CHECK(w11_boundary_norm(s.mesh, s.trace, (lambda * a).eval()) ==
          doctest::Approx(std::abs(lambda) * na).epsilon(1e-12));
  }
}
