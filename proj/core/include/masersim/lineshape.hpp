#pragma once

#include <span>
#include <vector>

#include "masersim/rate_equations.hpp"
#include "masersim/spectrum.hpp"

namespace masersim {

// Lorentzian inversion profile N(w) = n_max / (1 + (2(w-center)/fwhm)^2).
struct LorentzianProfile {
  double n_max;        // peak inverted-spin count, >= 0
  double center_MHz;
  double fwhm_MHz;     // > 0

  void validate() const;
};

// Narrowing and enhancement metrics comparing two masing scenarios:
// *_in fields describe the below-threshold profile, *_out the
// above-threshold one.
struct NarrowingReport {
  double fwhm_in_MHz;
  double fwhm_out_MHz;
  double hwhm_low_in_MHz;
  double hwhm_low_out_MHz;
  double amplitude_ratio;   // mapped peak photons, out / in
  double peak_gain_ratio;   // (n_max/N_max)_out / (n_max/N_max)_in
};

// Default simulation grid: 1601 points spanning center +/- 8 MHz
// (10 kHz step).
std::vector<double> default_grid(double center_MHz);

// Samples the profile on the given grid (photon_count kind). The grid must
// cover center +/- 2*fwhm; the value at an on-grid center equals n_max
// exactly.
Spectrum sample_profile(const LorentzianProfile& profile,
                        std::span<const double> grid_MHz);

// Applies the steady-state photon map pointwise. Every input value must lie
// below threshold; the first offending frequency is reported otherwise.
Spectrum map_to_photons(const Spectrum& inversion, const RateConstants& params);

// Exact FWHM of the mapped spectrum:
//   fwhm * sqrt(N_max/N_half - 1), N_half = N_max*kappa_c/(2*kappa_c - 3*B*N_max).
// Returns the intrinsic fwhm in the N_max -> 0 limit (including N_max = 0).
double closed_form_fwhm(const LorentzianProfile& profile,
                        const RateConstants& params);

// Width metrics from half-maximum crossings located by linear interpolation
// between bracketing samples. The spectrum must have a unique global
// maximum strictly inside the grid and both crossings must lie within it.
double measure_fwhm(const Spectrum& spectrum);
double measure_hwhm_low(const Spectrum& spectrum);
double measure_hwhm_high(const Spectrum& spectrum);

// Simulates both scenarios on one grid and bundles the comparison metrics.
NarrowingReport narrowing_report(const LorentzianProfile& below,
                                 const LorentzianProfile& above,
                                 const RateConstants& params,
                                 std::span<const double> grid_MHz);

// Plotting aid: rescales so the peak value is 1. Requires a positive peak.
Spectrum normalize_peak(const Spectrum& spectrum);

}  // namespace masersim
