#pragma once

#include <vector>

namespace masersim {

// Rate parameters of the two-level maser model, all in s^-1:
//   einstein_B  stimulated-emission rate per spin per photon
//   gamma_s     spin depopulation rate (radiative + spin-lattice)
//   kappa_c     cavity photon decay rate
struct RateConstants {
  double einstein_B;
  double gamma_s;
  double kappa_c;

  void validate() const;  // all three strictly positive and finite
};

// Instantaneous populations: inverted spins N and cavity photons n.
// Both are real-valued counts and must be non-negative.
struct LVState {
  double inverted_spins;
  double photons;

  void validate() const;
};

// Accepted-step record of one integration run. step_sizes_s[i] is the step
// that advanced times_s[i] to times_s[i+1], so it holds one entry fewer
// than times_s. Along any run N is non-increasing and N + 2n is
// non-increasing (strictly decreasing while either population is positive).
struct LVTrajectory {
  std::vector<double> times_s;
  std::vector<LVState> states;
  std::vector<double> step_sizes_s;
};

struct PhotonPeak {
  double t_peak_s;
  double n_peak;
};

// Steady-state photon number n(N) = gamma_s*N / (kappa_c - 3*B*N).
// Domain: 0 <= N, and N below threshold_inversion by at least 1e-9
// relative (guard band against the pole). Throws std::domain_error
// outside the domain.
double steady_state_photons(const RateConstants& params, double inverted_spins);

// Pole of the steady-state map: N_th = kappa_c / (3*B). The map diverges
// as N approaches this value from below.
double threshold_inversion(const RateConstants& params);

// Local slope of the steady-state map,
// dn/dN = gamma_s*kappa_c / (kappa_c - 3*B*N)^2; same domain as the map.
double steady_state_slope(const RateConstants& params, double inverted_spins);

// Integrates the coupled system
//   dN/dt = -2*B*n*N - gamma_s*N
//   dn/dt = -kappa_c*n + B*n*N
// from t = 0 to t_end_s with an embedded Dormand-Prince 4(5) pair under
// per-component error control |err_i| <= abs_tol + rel_tol*|y_i|.
// Components dipping negative are clipped to zero only when the excursion
// is within abs_tol; larger excursions reject the step. Tolerances must
// lie in (0, 1e-2]. Throws IntegrationError on step-size underflow, with
// the offending time attached.
LVTrajectory integrate_lv(const RateConstants& params, LVState initial,
                          double t_end_s, double rel_tol = 1e-8,
                          double abs_tol = 1e-3);

// Global photon maximum over a trajectory, refined by the parabola through
// the three samples bracketing the sampled maximum. Boundary maxima are
// returned without refinement; interior refinement never drops below the
// sampled maximum. Requires at least 3 samples.
PhotonPeak peak_photons(const LVTrajectory& traj);

}  // namespace masersim
