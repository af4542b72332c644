#include "varinv/convexity.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Dense>

#include "varinv/rng.hpp"

namespace varinv {

Eigen::MatrixXd fd_hessian(const GradientFn& f, const Eigen::VectorXd& x, double step) {
  const Eigen::Index n = x.size();
  Eigen::MatrixXd h(n, n);
  Eigen::VectorXd xp = x, xm = x;
  for (Eigen::Index j = 0; j < n; ++j) {
    xp[j] = x[j] + step;
    xm[j] = x[j] - step;
    h.col(j) = (f.gradient(xp) - f.gradient(xm)) / (2.0 * step);
    xp[j] = x[j];
    xm[j] = x[j];
  }
  return 0.5 * (h + h.transpose());
}

double projected_min_eigenvalue(const Eigen::MatrixXd& h, const std::vector<int>& active) {
  const Eigen::Index n = h.rows();
  std::vector<char> is_active(static_cast<std::size_t>(n), 0);
  for (int a : active) {
    if (a < 0 || a >= n) throw std::invalid_argument("projected_min_eigenvalue: bad active index");
    is_active[static_cast<std::size_t>(a)] = 1;
  }
  std::vector<Eigen::Index> free;
  for (Eigen::Index k = 0; k < n; ++k) {
    if (!is_active[static_cast<std::size_t>(k)]) free.push_back(k);
  }
  if (free.empty()) return std::numeric_limits<double>::infinity();

  Eigen::MatrixXd sub(free.size(), free.size());
  for (std::size_t r = 0; r < free.size(); ++r) {
    for (std::size_t c = 0; c < free.size(); ++c) sub(r, c) = h(free[r], free[c]);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sub, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

std::vector<int> active_coordinates(const EitProblem& problem, const ConductivityField& sigma,
                                    const StateEnsemble& state, double tol) {
  std::vector<int> active;
  const int ntri = static_cast<int>(sigma.values.size());
  for (int t = 0; t < ntri; ++t) {
    if (sigma.values[t] - sigma.lower <= tol || sigma.upper - sigma.values[t] <= tol)
      active.push_back(t);
  }
  const BoxBounds b = state_bounds(problem);
  const Eigen::VectorXd u = pack_state(state);
  for (int k = 0; k < u.size(); ++k) {
    if (u[k] - b.lo[k] <= tol || b.hi[k] - u[k] <= tol) active.push_back(ntri + k);
  }
  return active;
}

GradientFn eit_objective_fn(const EitProblem& problem, const ConductivityField& sigma_template,
                            const StateEnsemble& state_template) {
  const int ntri = static_cast<int>(sigma_template.values.size());
  auto eval = [&problem, sigma_template, state_template, ntri](const Eigen::VectorXd& x,
                                                               bool want_grad,
                                                               Eigen::VectorXd* grad) {
    ConductivityField sig = sigma_template;
    StateEnsemble st = state_template;
    sig.values = x.head(ntri);
    unpack_state(x.tail(x.size() - ntri), st);
    if (!want_grad) return problem.objective_value(sig, st);
    ObjectiveEval ev = problem.objective(sig, st);
    grad->resize(x.size());
    grad->head(ntri) = ev.grad_sigma;
    StateEnsemble g = st;
    g.phi = ev.grad_phi;
    g.psi = ev.grad_psi;
    grad->tail(x.size() - ntri) = pack_state(g);
    return ev.value;
  };
  GradientFn fn;
  fn.value = [eval](const Eigen::VectorXd& x) { return eval(x, false, nullptr); };
  fn.gradient = [eval](const Eigen::VectorXd& x) {
    Eigen::VectorXd g;
    eval(x, true, &g);
    return g;
  };
  return fn;
}

VectorFn eit_residual_fn(const EitProblem& problem, const ConductivityField& sigma_template,
                         const StateEnsemble& state_template) {
  const int ntri = static_cast<int>(sigma_template.values.size());
  const int ne = state_template.experiments();
  const int nn = static_cast<int>(state_template.phi[0].size());

  VectorFn fn;
  fn.dim_in = ntri + 2 * ne * nn;
  fn.dim_out = 2 * ntri * ne;
  fn.eval = [&problem, sigma_template, state_template, ntri, ne](const Eigen::VectorXd& x) {
    ConductivityField sig = sigma_template;
    StateEnsemble st = state_template;
    sig.values = x.head(ntri);
    unpack_state(x.tail(x.size() - ntri), st);
    const ResidualField res = residual_a(*problem.mesh, *problem.eg, sig, st);
    Eigen::VectorXd out(2 * ntri * ne);
    Eigen::Index pos = 0;
    for (int i = 0; i < ne; ++i) {
      for (int t = 0; t < ntri; ++t) {
        const double w = std::sqrt(problem.eg->areas[static_cast<std::size_t>(t)]);
        out[pos++] = w * res[static_cast<std::size_t>(i)](0, t);
        out[pos++] = w * res[static_cast<std::size_t>(i)](1, t);
      }
    }
    return out;
  };
  return fn;
}

std::function<double(const Eigen::VectorXd&)> eit_l_norm(const EitProblem& problem,
                                                         int experiments) {
  if (!problem.reg_ops->sigma_norm)
    throw std::invalid_argument("eit_l_norm: sigma norm operator not assembled");
  const RegOperators* ops = problem.reg_ops;
  const int ntri = static_cast<int>(ops->tri_to_node.cols());
  const int nn = static_cast<int>(ops->tri_to_node.rows());
  return [ops, ntri, nn, experiments](const Eigen::VectorXd& h) {
    double sq = ops->sigma_norm->norm_squared(ops->tri_to_node * h.head(ntri));
    Eigen::Index pos = ntri;
    for (int i = 0; i < 2 * experiments; ++i) {
      sq += ops->state_norm.norm_squared(h.segment(pos, nn));
      pos += nn;
    }
    return std::sqrt(sq);
  };
}

RatioResult nonlinearity_ratio(const VectorFn& f,
                               const std::function<double(const Eigen::VectorXd&)>& l_norm,
                               const Eigen::VectorXd& x, const RatioOptions& opts) {
  if (x.size() != f.dim_in) throw std::invalid_argument("nonlinearity_ratio: dimension mismatch");
  Rng rng(opts.seed);
  const Eigen::VectorXd f0 = f.eval(x);
  const double t = opts.fd_step;

  RatioResult result;
  result.samples = opts.samples;
  for (int s = 0; s < opts.samples; ++s) {
    Eigen::VectorXd h(x.size());
    for (Eigen::Index k = 0; k < h.size(); ++k) h[k] = rng.normal();
    const double hn = h.norm();
    if (hn == 0.0) continue;
    h /= hn;

    const Eigen::VectorXd fp = f.eval(x + t * h);
    const Eigen::VectorXd fm = f.eval(x - t * h);
    const double first = ((fp - fm) / (2.0 * t)).norm();
    const double second = ((fp - 2.0 * f0 + fm) / (t * t)).norm();
    const double lh = l_norm(h);
    if (lh <= 0.0) continue;

    if (opts.kind == RatioKind::reduced) {
      if (first <= opts.kernel_floor) {
        ++result.kernel_directions;
        continue;
      }
      result.sup_ratio = std::max(result.sup_ratio, second / (first * lh));
    } else {
      result.sup_ratio = std::max(result.sup_ratio, second / (lh * lh));
    }
  }
  return result;
}

std::vector<double> alpha_convexity_fixpoint(
    const std::function<double(double)>& residual_norm_at_alpha, double cbar, double alpha0,
    const FixpointOptions& opts) {
  if (cbar <= 0.0) throw std::invalid_argument("alpha_convexity_fixpoint: cbar must be > 0");
  if (alpha0 <= 0.0) throw std::invalid_argument("alpha_convexity_fixpoint: alpha0 must be > 0");

  std::vector<double> history{alpha0};
  for (int k = 0; k < opts.max_iter; ++k) {
    const double residual = residual_norm_at_alpha(history.back());
    const double next = std::max(cbar * residual, opts.alpha_floor);
    const double prev = history.back();
    history.push_back(next);
    if (std::abs(next - prev) <= opts.rtol * prev) break;
  }
  return history;
}

namespace {

struct SquareTermInputs {
  double area, s;
  Eigen::Vector2d cap_p;  // rot90 grad psi_truth
  Eigen::Vector2d g;      // grad of the phi direction
  Eigen::Vector2d p;      // rot90 grad of the psi direction
  double a;               // sigma direction on the triangle
};

}  // namespace

CompletedSquare kv_completed_square(const TriMesh& mesh, const ElementGradients& eg,
                                    const ConductivityField& sigma, const StateEnsemble& state,
                                    const Eigen::VectorXd& dir_sigma,
                                    const StateEnsemble& dir_state) {
  if (dir_sigma.size() != sigma.values.size())
    throw std::invalid_argument("kv_completed_square: sigma direction size mismatch");
  CompletedSquare out;
  for (int i = 0; i < state.experiments(); ++i) {
    for (int t = 0; t < mesh.triangle_count(); ++t) {
      const double area = eg.areas[static_cast<std::size_t>(t)];
      const double s = sigma.values[t];
      const double a = dir_sigma[t];
      const Eigen::Vector2d cap_p =
          rot90(eg.field_gradient(mesh, state.psi[static_cast<std::size_t>(i)], t));
      const Eigen::Vector2d g =
          eg.field_gradient(mesh, dir_state.phi[static_cast<std::size_t>(i)], t);
      const Eigen::Vector2d p =
          rot90(eg.field_gradient(mesh, dir_state.psi[static_cast<std::size_t>(i)], t));

      out.terms[0] += area / (2.0 * s) * ((a / s) * cap_p + s * g).squaredNorm();
      out.terms[1] += area / (2.0 * s) * ((a / s) * cap_p - p).squaredNorm();
      out.terms[2] += area * 0.5 * s * g.squaredNorm();
      out.terms[3] += area / (2.0 * s) * p.squaredNorm();
    }
  }
  out.total = out.terms[0] + out.terms[1] + out.terms[2] + out.terms[3];
  return out;
}

double kv_halfcross_quadratic_form(const TriMesh& mesh, const ElementGradients& eg,
                                   const ConductivityField& sigma, const StateEnsemble& state,
                                   const Eigen::VectorXd& dir_sigma,
                                   const StateEnsemble& dir_state) {
  double value = 0.0;
  for (int i = 0; i < state.experiments(); ++i) {
    for (int t = 0; t < mesh.triangle_count(); ++t) {
      const double area = eg.areas[static_cast<std::size_t>(t)];
      const double s = sigma.values[t];
      const double a = dir_sigma[t];
      const Eigen::Vector2d cap_g =
          eg.field_gradient(mesh, state.phi[static_cast<std::size_t>(i)], t);
      const Eigen::Vector2d cap_p =
          rot90(eg.field_gradient(mesh, state.psi[static_cast<std::size_t>(i)], t));
      const Eigen::Vector2d g =
          eg.field_gradient(mesh, dir_state.phi[static_cast<std::size_t>(i)], t);
      const Eigen::Vector2d p =
          rot90(eg.field_gradient(mesh, dir_state.psi[static_cast<std::size_t>(i)], t));
      value += area * (a * a / (s * s * s) * cap_p.squaredNorm() + s * g.squaredNorm() +
                       p.squaredNorm() / s + a * cap_g.dot(g) - (a / (s * s)) * cap_p.dot(p));
    }
  }
  return value;
}

}  // namespace varinv
