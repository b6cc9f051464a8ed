#pragma once

#include <functional>
#include <span>
#include <vector>

namespace masersim {

struct LMOptions {
  int max_iterations = 500;
  double rss_rel_tol = 1e-10;  // converged: relative RSS drop below this on
                               // a trusted (lambda <= lambda_init) step
  double gradient_tol = 1e-8;  // converged: max_j |g_j| / (||J_j|| ||r||)
                               // below this (scale-free stationarity)
  double step_tol = 1e-12;     // converged: trusted step shorter than this
                               // relative to ||p|| in column-norm units
  double lambda_init = 1e-3;
  double lambda_grow = 3.0;
  double lambda_shrink = 1.0 / 3.0;
  double lambda_max = 1e12;
};

// residuals(p) -> r of fixed length m; jacobian(p) -> row-major m x p matrix
// of dr_i/dp_j. `valid`, when given, marks parameter vectors outside the
// model domain; steps landing there are rejected like uphill steps.
using ResidualFn = std::function<std::vector<double>(std::span<const double>)>;
using JacobianFn = std::function<std::vector<double>(std::span<const double>)>;
using ValidFn = std::function<bool(std::span<const double>)>;

struct LMResult {
  std::vector<double> params;
  std::vector<double> param_stderr;  // empty unless converged with dof > 0
  double rss = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> rss_history;   // RSS at init, then after each accepted step
};

// Damped least squares (Levenberg-Marquardt schedule) with Marquardt
// scaling: each step minimizes ||J dp + r||^2 + lambda ||S dp||^2 where
// S = diag(||J_j||), solved by QR on the column-equilibrated augmented
// system rather than the normal equations, so conditioning ~ cond(J)
// instead of cond(J)^2. Steps that lower the RSS are accepted and lambda
// shrinks; others grow lambda. Standard errors come from
// sqrt(diag((J^T J)^-1) * rss / (m - p)).
LMResult levenberg_marquardt(const ResidualFn& residuals,
                             const JacobianFn& jacobian,
                             std::vector<double> init,
                             const LMOptions& opts = {},
                             const ValidFn& valid = {});

}  // namespace masersim
