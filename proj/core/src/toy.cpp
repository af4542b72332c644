#include "varinv/toy.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <thread>

#include <Eigen/Dense>

#include "varinv/regularization.hpp"
#include "varinv/rng.hpp"

namespace varinv {

void ToyLinearProblem::validate() const {
  if (K.cols() != x_true.size() || K.rows() != u_true.size() || C.cols() != u_true.size() ||
      C.rows() != y_exact.size())
    throw std::invalid_argument("ToyLinearProblem: inconsistent dimensions");
  if ((K * x_true - u_true).lpNorm<Eigen::Infinity>() > 1e-12)
    throw std::invalid_argument("ToyLinearProblem: u_true != K x_true");
  if ((C * u_true - y_exact).lpNorm<Eigen::Infinity>() > 1e-12)
    throw std::invalid_argument("ToyLinearProblem: y_exact != C u_true");
}

ToyLinearProblem make_toy(std::uint64_t seed, int n_x, int n_u, int n_y) {
  if (n_x < 1 || n_u < 1 || n_y < 1 || n_x > 10 || n_u > 10 || n_y > 10)
    throw std::invalid_argument("make_toy: dimensions must be in [1, 10]");
  if (n_y != n_u)
    throw std::invalid_argument("make_toy: diagonal C requires n_y == n_u");
  Rng rng(seed);
  ToyLinearProblem p;
  p.K.resize(n_u, n_x);
  for (int r = 0; r < n_u; ++r) {
    for (int c = 0; c < n_x; ++c) p.K(r, c) = rng.normal();
  }
  p.C = Eigen::MatrixXd::Zero(n_y, n_u);
  for (int r = 0; r < n_y; ++r) {
    const double mag = 0.5 + rng.uniform();
    p.C(r, r) = rng.uniform() < 0.5 ? -mag : mag;
  }
  p.x_true.resize(n_x);
  for (int c = 0; c < n_x; ++c) p.x_true[c] = rng.normal();
  p.u_true = p.K * p.x_true;
  p.y_exact = p.C * p.u_true;
  p.validate();
  return p;
}

ToyLinearProblem make_illposed_toy(int dim) {
  if (dim < 1 || dim > 10) throw std::invalid_argument("make_illposed_toy: dim in [1, 10]");
  ToyLinearProblem p;
  p.K = Eigen::MatrixXd::Zero(dim, dim);
  for (int k = 0; k < dim; ++k) p.K(k, k) = std::pow(10.0, -k);
  p.C = Eigen::MatrixXd::Identity(dim, dim);
  p.x_true = Eigen::VectorXd::Ones(dim);
  p.u_true = p.K * p.x_true;
  p.y_exact = p.u_true;
  p.validate();
  return p;
}

Eigen::VectorXd reduced_tikhonov_solve(const ToyLinearProblem& problem,
                                       const Eigen::VectorXd& y_delta, double alpha) {
  if (alpha <= 0.0) throw std::invalid_argument("reduced_tikhonov_solve: alpha must be > 0");
  const Eigen::MatrixXd f = problem.forward();
  const Eigen::MatrixXd lhs =
      f.transpose() * f + alpha * Eigen::MatrixXd::Identity(f.cols(), f.cols());
  return lhs.ldlt().solve(f.transpose() * y_delta);
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> aao_tikhonov_solve(const ToyLinearProblem& problem,
                                                               const Eigen::VectorXd& y_delta,
                                                               double alpha) {
  if (alpha <= 0.0) throw std::invalid_argument("aao_tikhonov_solve: alpha must be > 0");
  const Eigen::Index nx = problem.K.cols();
  const Eigen::Index nu = problem.K.rows();
  Eigen::MatrixXd h(nx + nu, nx + nu);
  h.topLeftCorner(nx, nx) =
      problem.K.transpose() * problem.K + alpha * Eigen::MatrixXd::Identity(nx, nx);
  h.topRightCorner(nx, nu) = -problem.K.transpose();
  h.bottomLeftCorner(nu, nx) = -problem.K;
  h.bottomRightCorner(nu, nu) = problem.C.transpose() * problem.C +
                                (1.0 + alpha) * Eigen::MatrixXd::Identity(nu, nu);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nx + nu);
  rhs.tail(nu) = problem.C.transpose() * y_delta;
  const Eigen::VectorXd z = h.ldlt().solve(rhs);
  return {z.head(nx), z.tail(nu)};
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> morozov_aao_solve(const ToyLinearProblem& problem,
                                                              const Eigen::VectorXd& y_delta,
                                                              double delta, double tau,
                                                              double alpha) {
  if (alpha <= 0.0) throw std::invalid_argument("morozov_aao_solve: alpha must be > 0");
  if (tau < 1.0) throw std::invalid_argument("morozov_aao_solve: tau must be >= 1");
  if (delta < 0.0) throw std::invalid_argument("morozov_aao_solve: delta must be >= 0");
  const Eigen::Index nu = problem.K.rows();
  if (problem.C.rows() != nu) throw std::invalid_argument("morozov_aao_solve: C must be square");
  for (Eigen::Index r = 0; r < nu; ++r) {
    for (Eigen::Index c = 0; c < nu; ++c) {
      if (r != c && problem.C(r, c) != 0.0)
        throw std::invalid_argument("morozov_aao_solve: C must be diagonal");
    }
  }

  const double width = tau * delta;
  BoxBounds bounds = BoxBounds::free(static_cast<int>(nu));
  for (Eigen::Index k = 0; k < nu; ++k) {
    const double c = problem.C(k, k);
    if (c == 0.0) {
      if (std::abs(y_delta[k]) > width)
        throw std::invalid_argument("morozov_aao_solve: infeasible row with zero observation");
      continue;  // constraint vacuous
    }
    const double lo = (y_delta[k] - width) / c;
    const double hi = (y_delta[k] + width) / c;
    bounds.lo[k] = std::min(lo, hi);
    bounds.hi[k] = std::max(lo, hi);
  }

  // x eliminated through its own normal equations; by the envelope theorem
  // the u-gradient of the partially minimized objective is (u - K x*) + alpha u.
  const Eigen::MatrixXd xsolve =
      (problem.K.transpose() * problem.K +
       alpha * Eigen::MatrixXd::Identity(problem.K.cols(), problem.K.cols()))
          .ldlt()
          .solve(problem.K.transpose())
          .eval();
  ObjectiveFn f = [&](const Eigen::VectorXd& u, Eigen::VectorXd* grad) {
    const Eigen::VectorXd x = xsolve * u;
    const Eigen::VectorXd m = u - problem.K * x;
    const double value = 0.5 * m.squaredNorm() + 0.5 * alpha * (x.squaredNorm() + u.squaredNorm());
    if (grad) *grad = m + alpha * u;
    return value;
  };

  PgOptions opts;
  opts.max_iterations = 5000;
  opts.tol_pg = 1e-13;
  const PgResult res = projected_gradient(f, bounds.project(Eigen::VectorXd::Zero(nu)), bounds, opts);
  return {xsolve * res.x, res.x};
}

std::string ConvergenceTable::trend_verdict() const {
  if (rows.size() < 2) return "N/A";
  const bool err_ok = rows.back().recon_error <= rows.front().recon_error;
  bool stab_ok = true;
  for (const auto& r : rows) {
    if (r.stability_norm > 2.0 * rows.front().stability_norm) stab_ok = false;
  }
  return (err_ok && stab_ok) ? "PASS" : "FAIL";
}

void ConvergenceTable::write_csv(std::ostream& os) const {
  os.precision(17);
  os << "delta,alpha,recon_error,stability_norm,minimality_gap,qa,feasible\n";
  for (const auto& r : rows) {
    os << r.delta << ',' << r.alpha << ',' << r.recon_error << ',' << r.stability_norm << ','
       << r.minimality_gap << ',' << r.qa << ',' << (r.feasible ? 1 : 0) << '\n';
  }
}

ConvergenceTable delta_sweep(const std::vector<double>& deltas,
                             const std::function<SweepRow(double, std::size_t)>& row_solver,
                             int max_threads) {
  if (deltas.empty()) throw std::invalid_argument("delta_sweep: empty delta list");
  for (std::size_t k = 0; k + 1 < deltas.size(); ++k) {
    if (deltas[k + 1] > deltas[k])
      throw std::invalid_argument("delta_sweep: deltas must not increase");
  }
  for (double d : deltas) {
    if (d < 0.0) throw std::invalid_argument("delta_sweep: negative delta");
  }

  ConvergenceTable table;
  table.rows.resize(deltas.size());
  const int threads = std::max(1, std::min<int>(max_threads, static_cast<int>(deltas.size())));

  if (threads == 1) {
    for (std::size_t k = 0; k < deltas.size(); ++k) {
      try {
        table.rows[k] = row_solver(deltas[k], k);
      } catch (const std::exception& err) {
        throw std::runtime_error("delta_sweep: row delta=" + std::to_string(deltas[k]) +
                                 " failed: " + err.what());
      }
    }
    return table;
  }

  // Bounded pool: run `threads` rows at a time; table assembly stays ordered.
  std::vector<std::thread> pool;
  std::vector<SweepRow> rows(deltas.size());
  std::vector<std::string> errors(deltas.size());
  std::size_t next = 0;
  while (next < deltas.size()) {
    const std::size_t batch = std::min<std::size_t>(threads, deltas.size() - next);
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t k = next + b;
      pool.emplace_back([&, k] {
        try {
          rows[k] = row_solver(deltas[k], k);
        } catch (const std::exception& err) {
          errors[k] = err.what();
        }
      });
    }
    for (auto& th : pool) th.join();
    pool.clear();
    next += batch;
  }
  for (std::size_t k = 0; k < deltas.size(); ++k) {
    if (!errors[k].empty())
      throw std::runtime_error("delta_sweep: row delta=" + std::to_string(deltas[k]) +
                               " failed: " + errors[k]);
    table.rows[k] = rows[k];
  }
  return table;
}

SweepRow toy_sweep_row(const ToyLinearProblem& problem, const RegConfig& schedule, double delta,
                       std::uint64_t seed) {
  Rng rng(seed);
  Eigen::VectorXd y = problem.y_exact;
  for (int k = 0; k < y.size(); ++k) y[k] += delta * rng.symmetric();

  const AlphaChoice alpha = alpha_schedule(schedule, delta);
  const auto [x, u] = aao_tikhonov_solve(problem, y, alpha.alpha[0]);

  SweepRow row;
  row.delta = delta;
  row.alpha = alpha.min_alpha();
  row.recon_error = (x - problem.x_true).norm();
  // Same shape as the EIT stability norm: sup-norm of the parameter plus the
  // squared state norm plus the sup-norm of the observation.
  row.stability_norm = x.lpNorm<Eigen::Infinity>() + u.squaredNorm() +
                       (problem.C * u).lpNorm<Eigen::Infinity>();
  const auto objective = [&](const Eigen::VectorXd& xx, const Eigen::VectorXd& uu) {
    return 0.5 * (problem.C * uu - y).squaredNorm() + 0.5 * (uu - problem.K * xx).squaredNorm() +
           0.5 * alpha.alpha[0] * (xx.squaredNorm() + uu.squaredNorm());
  };
  row.minimality_gap = objective(x, u) - objective(problem.x_true, problem.u_true);
  row.qa = 0.5 * (u - problem.K * x).squaredNorm();
  row.feasible = true;
  return row;
}

}  // namespace varinv
