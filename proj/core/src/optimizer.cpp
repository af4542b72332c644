#include "varinv/optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "varinv/rng.hpp"

namespace varinv {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

SolveMode parse_mode(const std::string& name) {
  if (name == "aao-ls") return SolveMode::aao_ls;
  if (name == "maao-ls") return SolveMode::maao_ls;
  if (name == "maao-kv") return SolveMode::maao_kv;
  throw std::invalid_argument("unknown solve mode: " + name);
}

std::string to_string(SolveMode mode) {
  switch (mode) {
    case SolveMode::aao_ls: return "aao-ls";
    case SolveMode::maao_ls: return "maao-ls";
    case SolveMode::maao_kv: return "maao-kv";
  }
  return "?";
}

double sigma_closed_form_sq(double g_sq, double h_sq, double lo, double hi) {
  if (lo <= 0.0) throw std::invalid_argument("sigma_closed_form: lower bound must be > 0");
  if (hi < lo) throw std::invalid_argument("sigma_closed_form: empty box");
  if (g_sq > 0.0) return std::clamp(std::sqrt(h_sq / g_sq), lo, hi);
  if (h_sq > 0.0) return hi;
  return 0.5 * (lo + hi);
}

double sigma_closed_form(const Eigen::Vector2d& g, const Eigen::Vector2d& h, double lo,
                         double hi) {
  return sigma_closed_form_sq(g.squaredNorm(), h.squaredNorm(), lo, hi);
}

BoxBounds BoxBounds::free(int n) {
  BoxBounds b;
  b.lo = Eigen::VectorXd::Constant(n, -kInf);
  b.hi = Eigen::VectorXd::Constant(n, kInf);
  return b;
}

Eigen::VectorXd projected_gradient_step(const ObjectiveFn& f, const Eigen::VectorXd& x,
                                        const BoxBounds& bounds, double* step_hint,
                                        bool* stationary, const PgOptions& opts) {
  Eigen::VectorXd g;
  const double fx = f(x, &g);
  if (!std::isfinite(fx)) throw std::runtime_error("projected_gradient_step: non-finite objective");

  double t = (step_hint && *step_hint > 0.0) ? *step_hint : 1.0;
  if (stationary) *stationary = false;

  for (int halving = 0; halving <= opts.max_halvings; ++halving) {
    const Eigen::VectorXd xt = bounds.project(x - t * g);
    const Eigen::VectorXd dx = xt - x;
    if (dx.lpNorm<Eigen::Infinity>() == 0.0) break;  // pinned: no feasible move
    const double ft = f(xt, nullptr);
    if (ft <= fx + opts.armijo * g.dot(dx)) {
      // BB1 step for the next call.
      if (step_hint) {
        Eigen::VectorXd gt;
        f(xt, &gt);
        const Eigen::VectorXd y = gt - g;
        const double sy = dx.dot(y);
        *step_hint = (sy > 1e-300) ? std::clamp(dx.squaredNorm() / sy, 1e-12, 1e12) : 2.0 * t;
      }
      return xt;
    }
    t *= 0.5;
  }
  if (stationary) *stationary = true;
  return x;
}

PgResult projected_gradient(const ObjectiveFn& f, const Eigen::VectorXd& x0,
                            const BoxBounds& bounds, const PgOptions& opts) {
  PgResult res;
  Eigen::VectorXd x = bounds.project(x0);
  Eigen::VectorXd g;
  double fx = f(x, &g);
  if (!std::isfinite(fx)) throw std::runtime_error("projected_gradient: non-finite objective");
  double step = 1.0 / std::max(1e-12, g.lpNorm<Eigen::Infinity>());
  step = std::min(step, 1.0);

  for (int it = 0; it < opts.max_iterations; ++it) {
    const double pg_residual = (x - bounds.project(x - g)).lpNorm<Eigen::Infinity>();
    if (pg_residual <= opts.tol_pg * (1.0 + x.lpNorm<Eigen::Infinity>())) {
      res.converged = true;
      break;
    }

    double t = step;
    bool accepted = false;
    Eigen::VectorXd xt;
    double ft = fx;
    for (int halving = 0; halving <= opts.max_halvings; ++halving) {
      xt = bounds.project(x - t * g);
      const Eigen::VectorXd dx = xt - x;
      if (dx.lpNorm<Eigen::Infinity>() == 0.0) break;
      ft = f(xt, nullptr);
      if (ft <= fx + opts.armijo * g.dot(dx)) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      res.stationary = true;
      break;
    }

    Eigen::VectorXd gt;
    const double ft2 = f(xt, &gt);
    const Eigen::VectorXd s = xt - x;
    const Eigen::VectorXd y = gt - g;
    const double sy = s.dot(y);
    step = (sy > 1e-300) ? std::clamp(s.squaredNorm() / sy, 1e-12, 1e12) : 2.0 * t;

    const double drop = fx - ft2;
    x = xt;
    fx = ft2;
    g = gt;
    res.iterations = it + 1;
    if (opts.tol_rel_decrease > 0.0 && drop <= opts.tol_rel_decrease * std::max(1.0, std::abs(fx))) {
      res.converged = true;
      break;
    }
  }
  res.x = x;
  res.value = fx;
  return res;
}

EitProblem EitProblem::make(const TriMesh& mesh, const ElementGradients& eg,
                            const BoundaryTrace& trace, const RegOperators& reg_ops,
                            const RegConfig& reg, const BoundaryRecord& record, SolveMode mode,
                            std::vector<double> alpha) {
  EitProblem p;
  p.mesh = &mesh;
  p.eg = &eg;
  p.trace = &trace;
  p.reg_ops = &reg_ops;
  p.reg = reg;
  p.record = record;
  p.mode = mode;
  p.alpha = std::move(alpha);
  if (static_cast<int>(p.alpha.size()) != reg.components())
    throw std::invalid_argument("EitProblem: alpha component count mismatch");

  const double perim = mesh.perimeter();
  p.boundary_weights.resize(trace.size());
  const int b = trace.size();
  for (int k = 0; k < b; ++k) {
    const double next = trace.edge_length(k, perim);
    const double prev = trace.edge_length((k + b - 1) % b, perim);
    p.boundary_weights[k] = 0.5 * (next + prev);
  }
  return p;
}

ObjectiveEval EitProblem::objective(const ConductivityField& sigma,
                                    const StateEnsemble& state) const {
  ObjectiveEval ev = (mode == SolveMode::maao_kv) ? eval_jkv(*mesh, *eg, sigma, state)
                                                  : eval_qa(*mesh, *eg, sigma, state);
  const RegEval r = eval_r(*reg_ops, reg, sigma, state);
  ev.value += r.weighted(alpha);
  ev.grad_sigma += alpha.size() > 1 ? (alpha[1] * r.grad_sigma).eval()
                                    : Eigen::VectorXd::Zero(sigma.values.size()).eval();
  for (int i = 0; i < state.experiments(); ++i) {
    ev.grad_phi[static_cast<std::size_t>(i)] += alpha[0] * r.grad_phi[static_cast<std::size_t>(i)];
    ev.grad_psi[static_cast<std::size_t>(i)] += alpha[0] * r.grad_psi[static_cast<std::size_t>(i)];
  }

  if (mode == SolveMode::aao_ls) {
    // Smooth boundary misfit 1/2 sum w_k (trace - data)^2 over both fields.
    for (int i = 0; i < state.experiments(); ++i) {
      const auto& ups = record.upsilon[static_cast<std::size_t>(i)];
      const auto& gam = record.gamma[static_cast<std::size_t>(i)];
      auto& phi = state.phi[static_cast<std::size_t>(i)];
      auto& psi = state.psi[static_cast<std::size_t>(i)];
      for (int k = 0; k < trace->size(); ++k) {
        const int node = trace->nodes[static_cast<std::size_t>(k)];
        const double w = boundary_weights[k];
        const double dphi = phi[node] - ups[k];
        const double dpsi = psi[node] - gam[k];
        ev.value += 0.5 * w * (dphi * dphi + dpsi * dpsi);
        ev.grad_phi[static_cast<std::size_t>(i)][node] += w * dphi;
        ev.grad_psi[static_cast<std::size_t>(i)][node] += w * dpsi;
      }
    }
  }
  return ev;
}

double EitProblem::objective_value(const ConductivityField& sigma,
                                   const StateEnsemble& state) const {
  return objective(sigma, state).value;
}

Eigen::VectorXd pack_state(const StateEnsemble& state) {
  const int ne = state.experiments();
  const Eigen::Index n = state.phi[0].size();
  Eigen::VectorXd x(2 * ne * n);
  for (int i = 0; i < ne; ++i) {
    x.segment(2 * i * n, n) = state.phi[static_cast<std::size_t>(i)];
    x.segment((2 * i + 1) * n, n) = state.psi[static_cast<std::size_t>(i)];
  }
  return x;
}

void unpack_state(const Eigen::VectorXd& x, StateEnsemble& state) {
  const int ne = state.experiments();
  const Eigen::Index n = state.phi[0].size();
  for (int i = 0; i < ne; ++i) {
    state.phi[static_cast<std::size_t>(i)] = x.segment(2 * i * n, n);
    state.psi[static_cast<std::size_t>(i)] = x.segment((2 * i + 1) * n, n);
  }
}

BoxBounds state_bounds(const EitProblem& problem) {
  const int n = problem.mesh->node_count();
  const int ne = problem.record.experiments();
  BoxBounds b = BoxBounds::free(2 * ne * n);
  if (problem.mode == SolveMode::aao_ls) return b;

  const double half = problem.record.tau * problem.record.delta;
  const auto& trace = *problem.trace;
  for (int i = 0; i < ne; ++i) {
    const auto& ups = problem.record.upsilon[static_cast<std::size_t>(i)];
    const auto& gam = problem.record.gamma[static_cast<std::size_t>(i)];
    for (int k = 0; k < trace.size(); ++k) {
      const int node = trace.nodes[static_cast<std::size_t>(k)];
      const Eigen::Index iphi = 2 * static_cast<Eigen::Index>(i) * n + node;
      const Eigen::Index ipsi = (2 * static_cast<Eigen::Index>(i) + 1) * n + node;
      b.lo[iphi] = ups[k] - half;
      b.hi[iphi] = ups[k] + half;
      const bool pin_psi = problem.mode == SolveMode::maao_ls || half == 0.0;
      if (pin_psi) {
        b.lo[ipsi] = gam[k] - half;
        b.hi[ipsi] = gam[k] + half;
      }
    }
  }
  return b;
}

void make_default_start(const EitProblem& problem, double sigma_lower, double sigma_upper,
                        ConductivityField& sigma0, StateEnsemble& state0) {
  const auto& mesh = *problem.mesh;
  sigma0.lower = sigma_lower;
  sigma0.upper = sigma_upper;
  sigma0.values =
      Eigen::VectorXd::Constant(mesh.triangle_count(), 0.5 * (sigma_lower + sigma_upper));

  const int ne = problem.record.experiments();
  state0 = StateEnsemble::zeros(ne, mesh.node_count());
  const Eigen::VectorXd w_phi = sigma0.values;
  const Eigen::VectorXd w_psi = sigma0.values.cwiseInverse();
  for (int i = 0; i < ne; ++i) {
    state0.phi[static_cast<std::size_t>(i)] =
        forward_dirichlet(mesh, *problem.eg, w_phi, *problem.trace,
                          problem.record.upsilon[static_cast<std::size_t>(i)]);
    state0.psi[static_cast<std::size_t>(i)] =
        forward_dirichlet(mesh, *problem.eg, w_psi, *problem.trace,
                          problem.record.gamma[static_cast<std::size_t>(i)]);
  }
}

namespace {

// Exact per-triangle minimizer over the box; both objectives share it.
void sigma_update_closed_form(const EitProblem& problem, const StateEnsemble& state,
                              ConductivityField& sigma) {
  const auto& mesh = *problem.mesh;
  const auto& eg = *problem.eg;
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    double g_sq = 0.0, h_sq = 0.0;
    for (int i = 0; i < state.experiments(); ++i) {
      g_sq += eg.field_gradient(mesh, state.phi[static_cast<std::size_t>(i)], t).squaredNorm();
      h_sq += rot90(eg.field_gradient(mesh, state.psi[static_cast<std::size_t>(i)], t))
                  .squaredNorm();
    }
    sigma.values[t] = sigma_closed_form_sq(g_sq, h_sq, sigma.lower, sigma.upper);
  }
}

// With the sigma regularization component active the closed form is only a
// warm start; finish with projected gradient on the convex sigma subproblem.
void sigma_update(const EitProblem& problem, const StateEnsemble& state,
                  ConductivityField& sigma) {
  sigma_update_closed_form(problem, state, sigma);
  if (!problem.reg.sigma_component) return;

  BoxBounds bounds;
  bounds.lo = Eigen::VectorXd::Constant(sigma.values.size(), sigma.lower);
  bounds.hi = Eigen::VectorXd::Constant(sigma.values.size(), sigma.upper);
  ConductivityField work = sigma;
  ObjectiveFn f = [&](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
    work.values = x;
    if (!grad) return problem.objective_value(work, state);
    ObjectiveEval ev = problem.objective(work, state);
    *grad = ev.grad_sigma;
    return ev.value;
  };
  PgOptions opts;
  opts.max_iterations = 200;
  opts.tol_pg = 1e-11;
  const PgResult res = projected_gradient(f, sigma.values, bounds, opts);
  sigma.values = res.x;
}

struct AlState {
  std::vector<double> lambda;
  double mu = 0.0;
  bool active = false;
};

// Smoothed |x| used only inside the AL objective; slacks are evaluated
// with the exact W^{1,1} norm.
double smooth_abs(double x, double eps) { return std::sqrt(x * x + eps * eps); }
double smooth_sign(double x, double eps) { return x / std::sqrt(x * x + eps * eps); }

// W^{1,1} constraint value c_i = |tr psi_i - gamma_i|_W11 - tau*delta and its
// gradient w.r.t. the boundary values of psi_i (smoothed variant).
double w11_constraint_smooth(const EitProblem& problem, const Eigen::VectorXd& psi, int i,
                             Eigen::VectorXd* grad_boundary, double eps) {
  const auto& trace = *problem.trace;
  const auto& gamma = problem.record.gamma[static_cast<std::size_t>(i)];
  const double perim = problem.mesh->perimeter();
  const int b = trace.size();
  Eigen::VectorXd d(b);
  for (int k = 0; k < b; ++k) d[k] = psi[trace.nodes[static_cast<std::size_t>(k)]] - gamma[k];

  double value = 0.0;
  if (grad_boundary) grad_boundary->setZero(b);
  for (int k = 0; k < b; ++k) {
    const int k1 = (k + 1) % b;
    const double len = trace.edge_length(k, perim);
    value += 0.5 * len * (smooth_abs(d[k], eps) + smooth_abs(d[k1], eps));
    value += smooth_abs(d[k1] - d[k], eps);
    if (grad_boundary) {
      (*grad_boundary)[k] += 0.5 * len * smooth_sign(d[k], eps);
      (*grad_boundary)[k1] += 0.5 * len * smooth_sign(d[k1], eps);
      const double sj = smooth_sign(d[k1] - d[k], eps);
      (*grad_boundary)[k1] += sj;
      (*grad_boundary)[k] -= sj;
    }
  }
  return value - problem.record.tau * problem.record.delta;
}

double w11_slack_exact(const EitProblem& problem, const StateEnsemble& state) {
  if (problem.mode != SolveMode::maao_kv) return 0.0;
  const auto& trace = *problem.trace;
  double slack = 0.0;
  for (int i = 0; i < state.experiments(); ++i) {
    const Eigen::VectorXd d =
        trace_values(trace, state.psi[static_cast<std::size_t>(i)]) -
        problem.record.gamma[static_cast<std::size_t>(i)];
    const double c = w11_boundary_norm(*problem.mesh, trace, d) -
                     problem.record.tau * problem.record.delta;
    slack = std::max(slack, c);
  }
  return std::max(slack, 0.0);
}

// Mode-aware violation of the box part of the admissible set (sigma box,
// phi trace boxes, psi trace boxes except in maao_kv where the psi traces
// are governed by the W^{1,1} ball, reported through w11_slack_exact).
double box_violation_for_mode(const EitProblem& problem, const ConductivityField& sigma,
                              const StateEnsemble& state) {
  double v = 0.0;
  for (int t = 0; t < sigma.values.size(); ++t) {
    v = std::max(v, sigma.lower - sigma.values[t]);
    v = std::max(v, sigma.values[t] - sigma.upper);
  }
  if (problem.mode == SolveMode::aao_ls) return std::max(v, 0.0);

  // Same bound arithmetic as the projection so feasible points report 0.
  const double half = problem.record.tau * problem.record.delta;
  const auto& trace = *problem.trace;
  for (int i = 0; i < state.experiments(); ++i) {
    const auto& ups = problem.record.upsilon[static_cast<std::size_t>(i)];
    const auto& gam = problem.record.gamma[static_cast<std::size_t>(i)];
    for (int k = 0; k < trace.size(); ++k) {
      const int node = trace.nodes[static_cast<std::size_t>(k)];
      const double phi = state.phi[static_cast<std::size_t>(i)][node];
      v = std::max(v, phi - (ups[k] + half));
      v = std::max(v, (ups[k] - half) - phi);
      if (problem.mode == SolveMode::maao_ls || half == 0.0) {
        const double psi = state.psi[static_cast<std::size_t>(i)][node];
        v = std::max(v, psi - (gam[k] + half));
        v = std::max(v, (gam[k] - half) - psi);
      }
    }
  }
  return std::max(v, 0.0);
}

}  // namespace

StateEnsemble state_qp_polish(const EitProblem& problem, const ConductivityField& sigma,
                              const StateEnsemble& start, double tol, QpPolishInfo* info,
                              int max_iterations) {
  StateEnsemble work = start;
  ObjectiveFn f = [&](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
    unpack_state(x, work);
    if (!grad) return problem.objective_value(sigma, work);
    ObjectiveEval ev = problem.objective(sigma, work);
    grad->resize(x.size());
    StateEnsemble g = work;
    g.phi = ev.grad_phi;
    g.psi = ev.grad_psi;
    *grad = pack_state(g);
    return ev.value;
  };

  PgOptions opts;
  opts.max_iterations = max_iterations;
  opts.tol_pg = tol;
  const PgResult res = projected_gradient(f, pack_state(start), state_bounds(problem), opts);

  StateEnsemble out = start;
  unpack_state(res.x, out);
  if (info) {
    info->iterations = res.iterations;
    info->converged = res.converged;
    // Hessian-vector probes: exact for the quadratic state problem.
    Eigen::VectorXd g0;
    f(res.x, &g0);
    Rng rng(20240u);
    double min_curv = kInf;
    for (int probe = 0; probe < 5; ++probe) {
      Eigen::VectorXd v(res.x.size());
      for (int k = 0; k < v.size(); ++k) v[k] = rng.normal();
      v /= v.norm();
      Eigen::VectorXd g1;
      f(res.x + v, &g1);
      min_curv = std::min(min_curv, v.dot(g1 - g0));
    }
    info->min_probe_curvature = min_curv;
    info->hessian_psd = min_curv >= -1e-10;
  }
  return out;
}

double stability_norm(const EitProblem& problem, const ConductivityField& sigma,
                      const StateEnsemble& state) {
  double norm = sigma.values.lpNorm<Eigen::Infinity>();
  const auto& sn = problem.reg_ops->state_norm;
  double trace_sup = 0.0;
  for (int i = 0; i < state.experiments(); ++i) {
    const auto& phi = state.phi[static_cast<std::size_t>(i)];
    const auto& psi = state.psi[static_cast<std::size_t>(i)];
    norm += sn.norm_squared(phi) + sn.norm_squared(psi);
    trace_sup = std::max(trace_sup,
                         trace_values(*problem.trace, phi).lpNorm<Eigen::Infinity>());
    trace_sup = std::max(trace_sup,
                         trace_values(*problem.trace, psi).lpNorm<Eigen::Infinity>());
  }
  return norm + trace_sup;
}

EitSolution solve_instance(const EitProblem& problem, const ConductivityField& start_sigma,
                           const StateEnsemble& start_state, const SolverOptions& opts,
                           const ConductivityField* truth_sigma,
                           const StateEnsemble* truth_state) {
  const auto t0 = std::chrono::steady_clock::now();
  if (start_sigma.upper < start_sigma.lower)
    throw InfeasibleError("solve_instance: empty sigma box");
  if (start_sigma.lower <= 0.0)
    throw InfeasibleError("solve_instance: sigma lower bound must be positive");

  EitSolution sol;
  sol.sigma = start_sigma;
  sol.state = start_state;
  sol.sigma.values = sol.sigma.values.cwiseMax(sol.sigma.lower).cwiseMin(sol.sigma.upper);

  const BoxBounds ubounds = state_bounds(problem);
  {
    Eigen::VectorXd x = ubounds.project(pack_state(sol.state));
    unpack_state(x, sol.state);
  }

  const double taudelta = problem.record.tau * problem.record.delta;
  AlState al;
  al.active = problem.mode == SolveMode::maao_kv && taudelta > 0.0;
  if (al.active) {
    al.lambda.assign(static_cast<std::size_t>(sol.state.experiments()), 0.0);
    al.mu = opts.al_penalty0;
  }
  // |.| smoothing inside the AL objective only; tightened per pass so early
  // passes stay well-conditioned while late passes resolve the kinks.
  double smooth_eps = al.active ? std::max(1e-11, 1e-2 * taudelta) : 0.0;

  SolveReport& rep = sol.report;
  rep.alpha = problem.alpha;

  // Working objective: base T_alpha plus the AL terms when active.
  auto augmented = [&](const ConductivityField& sig, const StateEnsemble& st,
                       ObjectiveEval* ev_out) -> double {
    ObjectiveEval ev = problem.objective(sig, st);
    if (al.active) {
      for (int i = 0; i < st.experiments(); ++i) {
        Eigen::VectorXd cgrad;
        const double c = w11_constraint_smooth(problem, st.psi[static_cast<std::size_t>(i)], i,
                                               ev_out ? &cgrad : nullptr, smooth_eps);
        const double shifted = al.lambda[static_cast<std::size_t>(i)] / al.mu + c;
        if (shifted > 0.0) {
          ev.value += 0.5 * al.mu * shifted * shifted -
                      0.5 * al.lambda[static_cast<std::size_t>(i)] *
                          al.lambda[static_cast<std::size_t>(i)] / al.mu;
          if (ev_out) {
            const double scale = al.mu * shifted;
            for (int k = 0; k < problem.trace->size(); ++k) {
              const int node = problem.trace->nodes[static_cast<std::size_t>(k)];
              ev.grad_psi[static_cast<std::size_t>(i)][node] += scale * cgrad[k];
            }
          }
        } else {
          ev.value -= 0.5 * al.lambda[static_cast<std::size_t>(i)] *
                      al.lambda[static_cast<std::size_t>(i)] / al.mu;
        }
      }
    }
    if (ev_out) *ev_out = ev;
    return ev.value;
  };

  StateEnsemble scratch = sol.state;
  ObjectiveFn state_fn = [&](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
    unpack_state(x, scratch);
    if (!grad) return augmented(sol.sigma, scratch, nullptr);
    ObjectiveEval ev;
    const double value = augmented(sol.sigma, scratch, &ev);
    StateEnsemble g = scratch;
    g.phi = ev.grad_phi;
    g.psi = ev.grad_psi;
    *grad = pack_state(g);
    return value;
  };

  const int passes = al.active ? opts.al_max_passes : 1;
  int total_outer = 0;
  bool converged = false;
  std::string stop_reason = "max_iterations";
  double prev_slack = kInf;

  auto record_components = [&]() {
    if (!opts.record_component_history) return;
    rep.qa_history.push_back(eval_qa(*problem.mesh, *problem.eg, sol.sigma, sol.state).value);
    const RegEval r = eval_r(*problem.reg_ops, problem.reg, sol.sigma, sol.state);
    rep.r_history.push_back(r.weighted(problem.alpha));
    rep.violation_history.push_back(box_violation_for_mode(problem, sol.sigma, sol.state));
  };

  // AL passes share the global outer-iteration budget.
  const int per_pass_cap = al.active ? std::min(opts.max_outer, 400) : opts.max_outer;

  for (int pass = 0; pass < passes; ++pass) {
    rep.history_segments.push_back(static_cast<int>(rep.objective_history.size()));
    double current = augmented(sol.sigma, sol.state, nullptr);
    if (opts.record_history) {
      rep.objective_history.push_back(current);
      record_components();
    }

    const int pass_budget = std::min(per_pass_cap, opts.max_outer - total_outer);
    for (int outer = 0; outer < pass_budget; ++outer) {
      ++total_outer;
      sigma_update(problem, sol.state, sol.sigma);

      PgOptions pg;
      pg.max_iterations = opts.max_inner;
      pg.tol_pg = opts.tol_pg;
      pg.armijo = opts.armijo;
      pg.max_halvings = opts.max_halvings;
      const PgResult sweep = projected_gradient(state_fn, pack_state(sol.state), ubounds, pg);
      unpack_state(sweep.x, sol.state);

      const double next = sweep.value;
      if (!std::isfinite(next)) throw std::runtime_error("solve_instance: NaN in objective");
      if (next > current + 1e-12 * std::max(1.0, std::abs(current)))
        throw std::runtime_error("solve_instance: objective increased (bug trap)");
      if (opts.record_history) {
        rep.objective_history.push_back(next);
        record_components();
      }

      const double drop = current - next;
      current = next;
      if (drop <= opts.tol_rel_decrease * std::max(1.0, std::abs(next))) {
        converged = true;
        stop_reason = "relative_decrease";
        if (sweep.converged) stop_reason = "relative_decrease+pg_norm";
        break;
      }
    }

    if (!al.active) break;
    // Multiplier / penalty update on the exact (unsmoothed) constraint.
    double slack = 0.0;
    for (int i = 0; i < sol.state.experiments(); ++i) {
      const Eigen::VectorXd d =
          trace_values(*problem.trace, sol.state.psi[static_cast<std::size_t>(i)]) -
          problem.record.gamma[static_cast<std::size_t>(i)];
      const double c =
          w11_boundary_norm(*problem.mesh, *problem.trace, d) - taudelta;
      al.lambda[static_cast<std::size_t>(i)] =
          std::max(0.0, al.lambda[static_cast<std::size_t>(i)] + al.mu * c);
      slack = std::max(slack, std::max(0.0, c));
    }
    if (slack <= opts.al_slack_tol) {
      converged = true;
      stop_reason = "al_slack";
      break;
    }
    if (slack > 0.25 * prev_slack) al.mu *= 10.0;
    prev_slack = slack;
    smooth_eps = std::max(1e-11, 0.1 * smooth_eps);
    if (total_outer >= opts.max_outer) break;
  }

  rep.iterations = total_outer;
  rep.converged = converged;
  rep.stop_reason = stop_reason;

  const ObjectiveEval final_ev = problem.objective(sol.sigma, sol.state);
  rep.final_objective = final_ev.value;
  rep.final_qa = eval_qa(*problem.mesh, *problem.eg, sol.sigma, sol.state).value;
  rep.final_jkv = eval_jkv(*problem.mesh, *problem.eg, sol.sigma, sol.state).value;
  rep.final_r = eval_r(*problem.reg_ops, problem.reg, sol.sigma, sol.state).components;

  rep.box_violation = box_violation_for_mode(problem, sol.sigma, sol.state);
  rep.w11_slack = w11_slack_exact(problem, sol.state);

  double trace_sup = 0.0;
  for (int i = 0; i < sol.state.experiments(); ++i) {
    trace_sup = std::max(
        trace_sup, (trace_values(*problem.trace, sol.state.phi[static_cast<std::size_t>(i)]) -
                    problem.record.upsilon[static_cast<std::size_t>(i)])
                       .lpNorm<Eigen::Infinity>());
    trace_sup = std::max(
        trace_sup, (trace_values(*problem.trace, sol.state.psi[static_cast<std::size_t>(i)]) -
                    problem.record.gamma[static_cast<std::size_t>(i)])
                       .lpNorm<Eigen::Infinity>());
  }
  rep.morozov_slack = std::max(0.0, trace_sup - taudelta);

  rep.stability_norm = stability_norm(problem, sol.sigma, sol.state);

  if (truth_sigma && truth_state) {
    rep.truth_objective = problem.objective_value(*truth_sigma, *truth_state);
    rep.minimality_gap = rep.final_objective - rep.truth_objective;
    const double viol = box_violation_for_mode(problem, *truth_sigma, *truth_state) +
                        w11_slack_exact(problem, *truth_state);
    rep.truth_admissible = viol <= 1e-12;
  }

  rep.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return sol;
}

}  // namespace varinv
