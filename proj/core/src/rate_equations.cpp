#include "masersim/rate_equations.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

#include "masersim/errors.hpp"

namespace masersim {

namespace {

constexpr double kThresholdGuard = 1e-9;  // relative guard below the pole

using State2 = std::array<double, 2>;  // {N, n}

State2 lv_rhs(const RateConstants& p, const State2& y) {
  const double N = y[0];
  const double n = y[1];
  return {-2.0 * p.einstein_B * n * N - p.gamma_s * N,
          -p.kappa_c * n + p.einstein_B * n * N};
}

}  // namespace

void RateConstants::validate() const {
  auto check = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v))
      throw std::invalid_argument(std::string("rate constant ") + name +
                                  " must be positive and finite");
  };
  check(einstein_B, "einstein_B");
  check(gamma_s, "gamma_s");
  check(kappa_c, "kappa_c");
}

void LVState::validate() const {
  if (!(inverted_spins >= 0.0) || !std::isfinite(inverted_spins))
    throw std::invalid_argument("LVState: inverted_spins must be >= 0");
  if (!(photons >= 0.0) || !std::isfinite(photons))
    throw std::invalid_argument("LVState: photons must be >= 0");
}

double threshold_inversion(const RateConstants& params) {
  params.validate();
  return params.kappa_c / (3.0 * params.einstein_B);
}

namespace {

// Shared domain check for the steady-state map and its slope.
void check_below_threshold(const RateConstants& params, double N) {
  if (!(N >= 0.0) || !std::isfinite(N))
    throw std::domain_error("steady state: N must be >= 0");
  const double n_th = params.kappa_c / (3.0 * params.einstein_B);
  if (!(N < n_th * (1.0 - kThresholdGuard)))
    throw std::domain_error(
        "steady state: N = " + std::to_string(N) +
        " at or above threshold " + std::to_string(n_th) +
        " (guard band 1e-9 relative)");
}

}  // namespace

double steady_state_photons(const RateConstants& params, double inverted_spins) {
  params.validate();
  check_below_threshold(params, inverted_spins);
  return params.gamma_s * inverted_spins /
         (params.kappa_c - 3.0 * params.einstein_B * inverted_spins);
}

double steady_state_slope(const RateConstants& params, double inverted_spins) {
  params.validate();
  check_below_threshold(params, inverted_spins);
  const double d = params.kappa_c - 3.0 * params.einstein_B * inverted_spins;
  return params.gamma_s * params.kappa_c / (d * d);
}

LVTrajectory integrate_lv(const RateConstants& params, LVState initial,
                          double t_end_s, double rel_tol, double abs_tol) {
  params.validate();
  initial.validate();
  if (!(t_end_s > 0.0) || !std::isfinite(t_end_s))
    throw std::invalid_argument("integrate_lv: t_end must be positive");
  auto check_tol = [](double v, const char* name) {
    if (!(v > 0.0) || !(v <= 1e-2))
      throw std::invalid_argument(std::string("integrate_lv: ") + name +
                                  " must lie in (0, 1e-2]");
  };
  check_tol(rel_tol, "rel_tol");
  check_tol(abs_tol, "abs_tol");

  // Dormand-Prince 5(4) coefficients (time fractions omitted: the system is
  // autonomous). Stage 7 equals the 5th-order result, so its derivative is
  // reused as stage 1 of the next step (FSAL).
  constexpr double a21 = 1.0 / 5;
  constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                   a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33,
                   a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                   a65 = -5103.0 / 18656;
  constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                   b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  // 5th-order minus embedded 4th-order weights.
  constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                   e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

  State2 y = {initial.inverted_spins, initial.photons};
  double t = 0.0;

  LVTrajectory traj;
  traj.times_s.push_back(0.0);
  traj.states.push_back(initial);

  State2 k1 = lv_rhs(params, y);

  // Initial step from the standard scale comparison of y and y'.
  double h;
  {
    double d0 = 0.0, d1 = 0.0;
    for (int i = 0; i < 2; ++i) {
      const double sc = abs_tol + rel_tol * std::abs(y[i]);
      d0 = std::max(d0, std::abs(y[i]) / sc);
      d1 = std::max(d1, std::abs(k1[i]) / sc);
    }
    h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 * t_end_s : 0.01 * d0 / d1;
    h = std::min(h, t_end_s);
  }

  const double h_min_floor = t_end_s * 1e-14;
  constexpr std::size_t max_steps = 50'000'000;
  std::size_t steps = 0;

  while (t < t_end_s) {
    if (++steps > max_steps)
      throw IntegrationError("integrate_lv: step budget exhausted at t = " +
                                 std::to_string(t),
                             t);
    h = std::min(h, t_end_s - t);
    if (h < h_min_floor || t + h == t)
      throw IntegrationError(
          "integrate_lv: step size underflow at t = " + std::to_string(t), t);

    State2 k2, k3, k4, k5, k6, k7, y5;
    auto stage = [&](const State2& incr) {
      State2 ys;
      for (int i = 0; i < 2; ++i) ys[i] = y[i] + h * incr[i];
      return lv_rhs(params, ys);
    };
    k2 = stage({a21 * k1[0], a21 * k1[1]});
    k3 = stage({a31 * k1[0] + a32 * k2[0], a31 * k1[1] + a32 * k2[1]});
    k4 = stage({a41 * k1[0] + a42 * k2[0] + a43 * k3[0],
                a41 * k1[1] + a42 * k2[1] + a43 * k3[1]});
    k5 = stage(
        {a51 * k1[0] + a52 * k2[0] + a53 * k3[0] + a54 * k4[0],
         a51 * k1[1] + a52 * k2[1] + a53 * k3[1] + a54 * k4[1]});
    k6 = stage({a61 * k1[0] + a62 * k2[0] + a63 * k3[0] + a64 * k4[0] +
                    a65 * k5[0],
                a61 * k1[1] + a62 * k2[1] + a63 * k3[1] + a64 * k4[1] +
                    a65 * k5[1]});
    for (int i = 0; i < 2; ++i)
      y5[i] = y[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] +
                          b6 * k6[i]);
    k7 = lv_rhs(params, y5);

    double err = 0.0;
    bool finite = true;
    for (int i = 0; i < 2; ++i) {
      const double ei = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] +
                             e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
      const double sc =
          abs_tol + rel_tol * std::max(std::abs(y[i]), std::abs(y5[i]));
      if (!std::isfinite(ei) || !std::isfinite(y5[i])) finite = false;
      err = std::max(err, std::abs(ei) / sc);
    }
    // A negative excursion beyond abs_tol means the step overshot harder
    // than the error control admits; retry smaller instead of clipping.
    const bool overshoot = y5[0] < -abs_tol || y5[1] < -abs_tol;

    if (finite && err <= 1.0 && !overshoot) {
      t += h;
      bool clipped = false;
      for (int i = 0; i < 2; ++i)
        if (y5[i] < 0.0) {
          y5[i] = 0.0;  // within abs_tol by the check above
          clipped = true;
        }
      y = y5;
      k1 = clipped ? lv_rhs(params, y) : k7;
      traj.times_s.push_back(t);
      traj.states.push_back(LVState{y[0], y[1]});
      traj.step_sizes_s.push_back(h);
      const double grow =
          err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
      h *= grow;
    } else {
      const double shrink =
          finite && !overshoot
              ? std::clamp(0.9 * std::pow(err, -0.2), 0.2, 0.9)
              : 0.2;
      h *= shrink;
    }
  }
  return traj;
}

PhotonPeak peak_photons(const LVTrajectory& traj) {
  const std::size_t len = traj.states.size();
  if (len < 3)
    throw std::invalid_argument("peak_photons: trajectory needs >= 3 samples");
  if (traj.times_s.size() != len)
    throw std::invalid_argument("peak_photons: time/state length mismatch");

  std::size_t imax = 0;
  for (std::size_t i = 1; i < len; ++i)
    if (traj.states[i].photons > traj.states[imax].photons) imax = i;

  const double tm = traj.times_s[imax];
  const double nm = traj.states[imax].photons;
  if (imax == 0 || imax == len - 1) return {tm, nm};

  // Parabola through the bracketing triple (unequal spacing). The refined
  // value is the vertex and can only exceed the sampled maximum; fall back
  // to the sample when the triple is degenerate.
  const double t0 = traj.times_s[imax - 1], t2 = traj.times_s[imax + 1];
  const double n0 = traj.states[imax - 1].photons,
               n2 = traj.states[imax + 1].photons;
  const double dl = tm - t0, dr = t2 - tm;
  const double sl = (nm - n0) / dl, sr = (n2 - nm) / dr;
  const double curv = 2.0 * (sr - sl) / (dl + dr);  // 2nd derivative estimate
  if (!(curv < 0.0) || !std::isfinite(curv)) return {tm, nm};
  // Vertex of q(t) = nm + s*(t-tm) + curv/2*(t-tm)^2 with the centered slope.
  const double slope_c = (sl * dr + sr * dl) / (dl + dr);
  const double dt = -slope_c / curv;
  const double n_ref = nm - 0.5 * slope_c * slope_c / curv;
  if (!std::isfinite(dt) || !std::isfinite(n_ref) || n_ref < nm)
    return {tm, nm};
  return {tm + dt, n_ref};
}

}  // namespace masersim
