#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "varinv/optimizer.hpp"

namespace varinv {

/// Small dense linear instance: state map u = K x, observation y = C u,
/// reduced forward operator F = C K. Dimensions stay <= 10 so every solver
/// can be checked against a closed-form or enumeration oracle.
struct ToyLinearProblem {
  Eigen::MatrixXd K;  ///< n_u x n_x
  Eigen::MatrixXd C;  ///< n_y x n_u
  Eigen::VectorXd x_true, u_true, y_exact;

  Eigen::MatrixXd forward() const { return C * K; }
  void validate() const;  ///< throws unless y_exact = C K x_true, u_true = K x_true
};

/// Random well-scaled instance (C square diagonal, entries bounded away
/// from zero) with consistent exact data.
ToyLinearProblem make_toy(std::uint64_t seed, int n_x, int n_u, int n_y);

/// Severely ill-conditioned diagonal instance: F = diag(1, 0.1, 0.01, ...)
/// truncated to dim, with C = I, K = F.
ToyLinearProblem make_illposed_toy(int dim);

/// Classical reduced Tikhonov step: argmin 1/2 |F x - y|^2 + alpha/2 |x|^2
/// via dense normal equations.
Eigen::VectorXd reduced_tikhonov_solve(const ToyLinearProblem& problem,
                                       const Eigen::VectorXd& y_delta, double alpha);

/// All-at-once Tikhonov: argmin 1/2 |C u - y|^2 + 1/2 |u - K x|^2
/// + alpha/2 (|x|^2 + |u|^2), one stacked dense solve.
std::pair<Eigen::VectorXd, Eigen::VectorXd> aao_tikhonov_solve(const ToyLinearProblem& problem,
                                                               const Eigen::VectorXd& y_delta,
                                                               double alpha);

/// Morozov-type all-at-once: argmin 1/2 |u - K x|^2 + alpha/2 (|x|^2 + |u|^2)
/// s.t. |C u - y|_inf <= tau delta, with diagonal C (interval projection on u;
/// x is eliminated through its normal equations). Throws when a zero diagonal
/// entry makes the interval empty.
std::pair<Eigen::VectorXd, Eigen::VectorXd> morozov_aao_solve(const ToyLinearProblem& problem,
                                                              const Eigen::VectorXd& y_delta,
                                                              double delta, double tau,
                                                              double alpha);

/// One row of the delta -> 0 regularization sweep.
struct SweepRow {
  double delta = 0.0;
  double alpha = 0.0;  ///< min over components
  double recon_error = 0.0;
  double stability_norm = 0.0;
  double minimality_gap = 0.0;
  double qa = 0.0;
  bool feasible = true;
};

struct ConvergenceTable {
  std::vector<SweepRow> rows;
  /// PASS / FAIL / N/A: last-row error <= first-row error and the stability
  /// norm bounded by twice its first value (single rows are N/A).
  std::string trend_verdict() const;
  void write_csv(std::ostream& os) const;
};

/// Runs `row_solver` for each delta (noise regenerated per row from
/// seed ^ row index by the callee). Deltas must never increase along the
/// list; ties are allowed. Any row failure propagates with the failing
/// delta in the message.
ConvergenceTable delta_sweep(const std::vector<double>& deltas,
                             const std::function<SweepRow(double, std::size_t)>& row_solver,
                             int max_threads = 1);

/// Toy row solver: uniform noise in [-delta, delta], alpha from the
/// schedule, aao_tikhonov_solve, errors against the exact solution.
SweepRow toy_sweep_row(const ToyLinearProblem& problem, const RegConfig& schedule, double delta,
                       std::uint64_t seed);

}  // namespace varinv
