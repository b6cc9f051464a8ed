#include "masersim/least_squares.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>

#include "masersim/errors.hpp"

namespace masersim {

namespace {

double rss_of(const Eigen::VectorXd& r) { return r.squaredNorm(); }

Eigen::VectorXd eval_residuals(const ResidualFn& residuals,
                               const std::vector<double>& p) {
  const std::vector<double> r = residuals(std::span<const double>(p));
  return Eigen::Map<const Eigen::VectorXd>(r.data(),
                                           static_cast<Eigen::Index>(r.size()));
}

Eigen::MatrixXd eval_jacobian(const JacobianFn& jacobian,
                              const std::vector<double>& p, Eigen::Index m) {
  const std::vector<double> j = jacobian(std::span<const double>(p));
  const auto np = static_cast<Eigen::Index>(p.size());
  if (static_cast<Eigen::Index>(j.size()) != m * np)
    throw std::invalid_argument("levenberg_marquardt: jacobian size mismatch");
  using RowMajor =
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  return Eigen::Map<const RowMajor>(j.data(), m, np);
}

}  // namespace

LMResult levenberg_marquardt(const ResidualFn& residuals,
                             const JacobianFn& jacobian,
                             std::vector<double> init, const LMOptions& opts,
                             const ValidFn& valid) {
  if (!residuals || !jacobian)
    throw std::invalid_argument("levenberg_marquardt: missing callbacks");
  if (init.empty())
    throw std::invalid_argument("levenberg_marquardt: empty parameter vector");
  if (valid && !valid(std::span<const double>(init)))
    throw std::invalid_argument(
        "levenberg_marquardt: initial guess outside the model domain");
  if (opts.max_iterations < 1)
    throw std::invalid_argument("levenberg_marquardt: max_iterations < 1");

  const auto np = static_cast<Eigen::Index>(init.size());
  std::vector<double> p = std::move(init);
  Eigen::VectorXd r = eval_residuals(residuals, p);
  const Eigen::Index m = r.size();
  if (m < np)
    throw std::invalid_argument(
        "levenberg_marquardt: fewer residuals than parameters");
  if (!r.allFinite())
    throw std::invalid_argument(
        "levenberg_marquardt: non-finite residual at the initial guess");

  LMResult result;
  double rss = rss_of(r);
  result.rss_history.push_back(rss);

  double lambda = opts.lambda_init;
  bool converged = false;
  int iter = 0;

  Eigen::MatrixXd jac;
  while (iter < opts.max_iterations) {
    ++iter;
    if (rss == 0.0) {  // exact fit; no direction can improve
      converged = true;
      break;
    }
    jac = eval_jacobian(jacobian, p, m);
    const Eigen::VectorXd grad = jac.transpose() * r;

    // Column norms double as the Marquardt scale: damping lambda * S^2 and
    // the stationarity test both live in units where every column has norm 1.
    Eigen::VectorXd colnorm(np);
    for (Eigen::Index j = 0; j < np; ++j) colnorm[j] = jac.col(j).norm();

    // Scale-free first-order test: cos of the angle between r and each
    // column of J. An absolute ||J^T r|| threshold fires spuriously when a
    // column norm is tiny (the gradient along it is small at *every* point).
    const double rnorm = std::sqrt(rss);
    double stationarity = 0.0;
    for (Eigen::Index j = 0; j < np; ++j)
      if (colnorm[j] > 0.0)
        stationarity =
            std::max(stationarity, std::abs(grad[j]) / (colnorm[j] * rnorm));
    if (stationarity < opts.gradient_tol) {
      converged = true;
      break;
    }

    Eigen::VectorXd scale = colnorm;
    for (Eigen::Index j = 0; j < np; ++j)
      if (!(scale[j] > 0.0)) scale[j] = 1.0;
    const Eigen::MatrixXd jac_eq = jac * scale.cwiseInverse().asDiagonal();
    double p_scaled_norm = 0.0;
    for (Eigen::Index j = 0; j < np; ++j) {
      const double t = scale[j] * p[static_cast<std::size_t>(j)];
      p_scaled_norm += t * t;
    }
    p_scaled_norm = std::sqrt(p_scaled_norm);

    bool accepted = false;
    bool step_negligible = false;
    std::vector<double> p_new(p.size());
    Eigen::VectorXd r_new;
    double rss_new = 0.0;
    // Damped step: minimize ||J dp + r||^2 + lambda ||S dp||^2, solved as a
    // stacked least-squares problem by QR. Forming J^T J instead would square
    // the condition number and garble near-Gauss-Newton steps exactly on the
    // ill-conditioned fits that need them.
    Eigen::MatrixXd aug(m + np, np);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m + np);
    while (lambda <= opts.lambda_max) {
      aug.topRows(m) = jac_eq;
      aug.bottomRows(np) =
          std::sqrt(lambda) * Eigen::MatrixXd::Identity(np, np);
      rhs.head(m) = -r;
      const Eigen::VectorXd dq = aug.colPivHouseholderQr().solve(rhs);
      if (!dq.allFinite()) {
        lambda *= opts.lambda_grow;
        continue;
      }
      // A trusted step too short to move any parameter at step_tol relative
      // precision means the iterate is already as good as representable.
      if (lambda <= opts.lambda_init && p_scaled_norm > 0.0 &&
          dq.norm() <= opts.step_tol * p_scaled_norm) {
        step_negligible = true;
        break;
      }
      for (Eigen::Index i = 0; i < np; ++i)
        p_new[static_cast<std::size_t>(i)] =
            p[static_cast<std::size_t>(i)] + dq[i] / scale[i];
      if (valid && !valid(std::span<const double>(p_new))) {
        lambda *= opts.lambda_grow;
        continue;
      }
      r_new = eval_residuals(residuals, p_new);
      rss_new = rss_of(r_new);
      if (std::isfinite(rss_new) && rss_new < rss) {
        accepted = true;
        break;
      }
      lambda *= opts.lambda_grow;
    }
    if (step_negligible) {
      converged = true;
      break;
    }
    if (!accepted) break;  // stalled against lambda_max: leave unconverged

    const double drop = (rss - rss_new) / rss;
    p = p_new;
    r = r_new;
    rss = rss_new;
    result.rss_history.push_back(rss);
    lambda = std::max(lambda * opts.lambda_shrink, 1e-14);
    // A negligible drop only proves convergence when the step was a trusted
    // near-Gauss-Newton one; crippled (large-lambda) steps make little
    // progress even far from the optimum, e.g. in ill-conditioned valleys.
    if (drop < opts.rss_rel_tol && lambda <= opts.lambda_init) {
      converged = true;
      break;
    }
  }

  result.params = p;
  result.rss = rss;
  result.iterations = iter;
  result.converged = converged;

  if (converged && m > np) {
    jac = eval_jacobian(jacobian, p, m);
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    // Equilibrate to unit diagonal before factoring: rank detection is then
    // scale-free, so wildly different parameter magnitudes cannot make an
    // invertible system look rank-deficient.
    Eigen::VectorXd scale = jtj.diagonal().cwiseMax(0.0).cwiseSqrt();
    for (Eigen::Index i = 0; i < np; ++i)
      if (!(scale[i] > 0.0)) scale[i] = 1.0;
    const Eigen::VectorXd inv_scale = scale.cwiseInverse();
    const Eigen::MatrixXd scaled =
        inv_scale.asDiagonal() * jtj * inv_scale.asDiagonal();
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(scaled);
    result.param_stderr.assign(static_cast<std::size_t>(np),
                               std::numeric_limits<double>::quiet_NaN());
    if (lu.isInvertible()) {
      const Eigen::MatrixXd inv = lu.inverse();
      const double sigma2 = rss / static_cast<double>(m - np);
      for (Eigen::Index i = 0; i < np; ++i) {
        const double var = sigma2 * inv(i, i) * inv_scale[i] * inv_scale[i];
        result.param_stderr[static_cast<std::size_t>(i)] =
            var >= 0.0 ? std::sqrt(var)
                       : std::numeric_limits<double>::quiet_NaN();
      }
    }
  }
  return result;
}

}  // namespace masersim
