// Test-only oracles: brute-force and dense reference computations kept
// independent of the implementation paths they check.
#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace oracles {

/// Central finite-difference gradient of a scalar function.
inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double h = 1e-5) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x, xm = x;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    xp[k] = x[k] + h;
    xm[k] = x[k] - h;
    g[k] = (f(xp) - f(xm)) / (2.0 * h);
    xp[k] = x[k];
    xm[k] = x[k];
  }
  return g;
}

/// Normwise relative error against a reference.
inline double rel_error(const Eigen::VectorXd& value, const Eigen::VectorXd& reference) {
  return (value - reference).norm() / std::max(1.0, reference.norm());
}

/// Brute-force 1-D grid minimizer over [lo, hi].
inline double grid_minimize(const std::function<double(double)>& f, double lo, double hi,
                            double step) {
  double best_x = lo;
  double best_f = f(lo);
  for (double x = lo; x <= hi + 0.5 * step; x += step) {
    const double v = f(x);
    if (v < best_f) {
      best_f = v;
      best_x = x;
    }
  }
  return best_x;
}

/// Exact solver for  min 1/2 z'Hz - b'z  s.t. lo_i <= z_i <= hi_i  by active-set
/// enumeration (3^n patterns; keep n small). H must be symmetric positive
/// definite. Verifies primal feasibility and KKT multiplier signs and returns
/// the unique pattern that passes.
inline Eigen::VectorXd box_qp_enumerate(const Eigen::MatrixXd& h, const Eigen::VectorXd& b,
                                        const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                                        double tol = 1e-9) {
  const Eigen::Index n = h.rows();
  if (n > 12) throw std::invalid_argument("box_qp_enumerate: too large to enumerate");
  std::vector<int> pattern(static_cast<std::size_t>(n), 0);  // 0 free, 1 at lo, 2 at hi

  Eigen::VectorXd best;
  double best_value = std::numeric_limits<double>::infinity();

  const long total = static_cast<long>(std::pow(3.0, static_cast<double>(n)));
  for (long code = 0; code < total; ++code) {
    long c = code;
    bool feasible_pattern = true;
    for (Eigen::Index k = 0; k < n; ++k) {
      pattern[static_cast<std::size_t>(k)] = static_cast<int>(c % 3);
      c /= 3;
      if (pattern[static_cast<std::size_t>(k)] == 1 && !std::isfinite(lo[k]))
        feasible_pattern = false;
      if (pattern[static_cast<std::size_t>(k)] == 2 && !std::isfinite(hi[k]))
        feasible_pattern = false;
    }
    if (!feasible_pattern) continue;

    std::vector<Eigen::Index> free;
    Eigen::VectorXd z(n);
    for (Eigen::Index k = 0; k < n; ++k) {
      if (pattern[static_cast<std::size_t>(k)] == 0) free.push_back(k);
      else z[k] = pattern[static_cast<std::size_t>(k)] == 1 ? lo[k] : hi[k];
    }

    if (!free.empty()) {
      Eigen::MatrixXd hff(free.size(), free.size());
      Eigen::VectorXd rhs(free.size());
      for (std::size_t r = 0; r < free.size(); ++r) {
        rhs[static_cast<Eigen::Index>(r)] = b[free[r]];
        for (Eigen::Index k = 0; k < n; ++k) {
          if (pattern[static_cast<std::size_t>(k)] != 0)
            rhs[static_cast<Eigen::Index>(r)] -= h(free[r], k) * z[k];
        }
        for (std::size_t cidx = 0; cidx < free.size(); ++cidx)
          hff(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(cidx)) =
              h(free[r], free[cidx]);
      }
      const Eigen::VectorXd zf = hff.ldlt().solve(rhs);
      for (std::size_t r = 0; r < free.size(); ++r) z[free[r]] = zf[static_cast<Eigen::Index>(r)];
    }

    // Primal feasibility of the free block.
    bool ok = true;
    for (Eigen::Index k = 0; k < n && ok; ++k) {
      if (pattern[static_cast<std::size_t>(k)] == 0) {
        if (z[k] < lo[k] - tol || z[k] > hi[k] + tol) ok = false;
      }
    }
    if (!ok) continue;

    // Dual feasibility: gradient must push outward at active bounds.
    const Eigen::VectorXd grad = h * z - b;
    for (Eigen::Index k = 0; k < n && ok; ++k) {
      if (pattern[static_cast<std::size_t>(k)] == 1 && grad[k] < -tol) ok = false;
      if (pattern[static_cast<std::size_t>(k)] == 2 && grad[k] > tol) ok = false;
    }
    if (!ok) continue;

    const double value = 0.5 * z.dot(h * z) - b.dot(z);
    if (value < best_value - 1e-15) {
      best_value = value;
      best = z;
    }
  }
  if (best.size() == 0) throw std::runtime_error("box_qp_enumerate: no KKT point found");
  return best;
}

}  // namespace oracles
