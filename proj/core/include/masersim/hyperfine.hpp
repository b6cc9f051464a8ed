#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "masersim/spectrum.hpp"

namespace masersim {

// Proton-bearing sites entering the second-order shift of the X<->Z
// transition: per-site triplet spin densities rho_i, hyperfine tensor
// elements A_zz_i (MHz), and the zero-field splitting E_X - E_Y (MHz).
struct ProtonSet {
  std::vector<double> rho;
  std::vector<double> a_zz_MHz;
  double e_x_minus_e_y_MHz = 107.5;

  std::size_t size() const { return rho.size(); }
  void validate() const;  // equal lengths, 1 <= P <= 24, splitting > 0
};

// Convenience constructor: one shared A_zz for every site.
ProtonSet uniform_proton_set(std::vector<double> rho, double a_zz_MHz = -61.0,
                             double e_x_minus_e_y_MHz = 107.5);

// All 2^P second-order shifts (MHz), one per proton sign vector.
// Every shift is >= 0 and the multiset is invariant under a global sign
// flip, so each value appears with even multiplicity.
struct ShiftDistribution {
  std::vector<double> shifts_MHz;
};

struct KdeCurve {
  std::vector<double> grid_MHz;
  std::vector<double> density;   // integrates to 1 (trapezoid) within 1e-3
  double bandwidth_MHz;
  std::vector<double> rug_MHz;   // the raw shifts
};

// Enumerates shift = (1/4) (sum_i s_i rho_i A_zz_i)^2 / (E_X - E_Y) over all
// sign vectors s in {-1,+1}^P via a Gray-code walk that updates the running
// sum in O(1) per configuration. Only the s_1 = +1 half is walked; each
// shift is emitted twice (global sign flip leaves it unchanged).
ShiftDistribution enumerate_shifts(const ProtonSet& protons);

// Closed-form support bound (sum_i |rho_i A_zz_i|)^2 / (4 (E_X - E_Y)),
// attained by the two all-aligned sign vectors.
double max_shift_bound(const ProtonSet& protons);

// Silverman's bandwidth 0.9 * min(sd, IQR/1.34) * n^(-1/5). Falls back to
// the sample sd when the IQR vanishes; throws std::domain_error when the
// sample has zero variance.
double silverman_bandwidth(std::span<const double> sample);

// Gaussian-kernel density on a uniform grid spanning
// [-4*bandwidth, max_shift + 4*bandwidth]. Bandwidth defaults to
// Silverman's rule on the shifts; a zero-variance sample then requires an
// explicit bandwidth.
KdeCurve kde(const ShiftDistribution& dist,
             std::optional<double> bandwidth_MHz = std::nullopt,
             std::size_t n_points = 1001);

// Counts over `bins` uniform bins spanning [0, max shift]; the last bin is
// right-inclusive, so the total equals 2^P. An all-zero distribution puts
// every count in the first bin (over a nominal [0, 1] MHz span).
Spectrum histogram(const ShiftDistribution& dist, std::size_t bins = 1000);

}  // namespace masersim
