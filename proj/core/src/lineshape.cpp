#include "masersim/lineshape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace masersim {

void LorentzianProfile::validate() const {
  if (!(n_max >= 0.0) || !std::isfinite(n_max))
    throw std::invalid_argument("profile: n_max must be >= 0");
  if (!std::isfinite(center_MHz))
    throw std::invalid_argument("profile: center must be finite");
  if (!(fwhm_MHz > 0.0) || !std::isfinite(fwhm_MHz))
    throw std::invalid_argument("profile: fwhm must be positive");
}

std::vector<double> default_grid(double center_MHz) {
  std::vector<double> grid(1601);
  for (int i = 0; i < 1601; ++i)
    grid[i] = center_MHz + (i - 800) * 0.01;
  return grid;
}

Spectrum sample_profile(const LorentzianProfile& profile,
                        std::span<const double> grid_MHz) {
  profile.validate();
  if (grid_MHz.size() < 2)
    throw std::invalid_argument("sample_profile: grid needs >= 2 points");
  const double slack = 1e-9 * profile.fwhm_MHz;
  if (grid_MHz.front() > profile.center_MHz - 2.0 * profile.fwhm_MHz + slack ||
      grid_MHz.back() < profile.center_MHz + 2.0 * profile.fwhm_MHz - slack)
    throw std::invalid_argument(
        "sample_profile: grid must cover center +/- 2*fwhm");

  Spectrum out;
  out.frequencies_MHz.assign(grid_MHz.begin(), grid_MHz.end());
  out.values.resize(grid_MHz.size());
  out.value_kind = ValueKind::photon_count;
  for (std::size_t i = 0; i < grid_MHz.size(); ++i) {
    const double z = 2.0 * (grid_MHz[i] - profile.center_MHz) / profile.fwhm_MHz;
    out.values[i] = profile.n_max / (1.0 + z * z);
  }
  out.validate();
  return out;
}

Spectrum map_to_photons(const Spectrum& inversion, const RateConstants& params) {
  inversion.validate();
  params.validate();
  if (inversion.value_kind != ValueKind::photon_count)
    throw std::invalid_argument("map_to_photons: input must be a count spectrum");
  const double n_th = threshold_inversion(params);
  for (std::size_t i = 0; i < inversion.values.size(); ++i) {
    if (!(inversion.values[i] < n_th * (1.0 - 1e-9)))
      throw std::domain_error(
          "map_to_photons: inversion at " +
          std::to_string(inversion.frequencies_MHz[i]) +
          " MHz meets or exceeds threshold");
  }
  Spectrum out = inversion;
  for (double& v : out.values) v = steady_state_photons(params, v);
  return out;
}

double closed_form_fwhm(const LorentzianProfile& profile,
                        const RateConstants& params) {
  profile.validate();
  params.validate();
  if (profile.n_max == 0.0) return profile.fwhm_MHz;  // no-narrowing limit
  const double n_th = threshold_inversion(params);
  if (!(profile.n_max < n_th * (1.0 - 1e-9)))
    throw std::domain_error("closed_form_fwhm: peak at or above threshold");
  const double n_half = profile.n_max * params.kappa_c /
                        (2.0 * params.kappa_c -
                         3.0 * params.einstein_B * profile.n_max);
  return profile.fwhm_MHz * std::sqrt(profile.n_max / n_half - 1.0);
}

namespace {

struct Crossings {
  double low_MHz;
  double peak_MHz;
  double high_MHz;
};

// Locates the half-maximum crossings on both sides of the unique global
// maximum by linear interpolation between the bracketing samples.
Crossings half_crossings(const Spectrum& s) {
  s.validate();
  const auto& f = s.frequencies_MHz;
  const auto& v = s.values;
  const std::size_t n = v.size();
  if (n < 3)
    throw std::invalid_argument("width measurement: needs >= 3 samples");

  std::size_t imax = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (v[i] > v[imax]) imax = i;
  for (std::size_t i = 0; i < n; ++i)
    if (i != imax && v[i] == v[imax])
      throw std::invalid_argument(
          "width measurement: global maximum is not unique");
  if (imax == 0 || imax == n - 1)
    throw std::invalid_argument(
        "width measurement: maximum must lie strictly inside the grid");

  const double half = v[imax] / 2.0;
  if (!(half > 0.0))
    throw std::invalid_argument("width measurement: peak must be positive");

  double low = 0.0, high = 0.0;
  bool found = false;
  for (std::size_t i = imax; i-- > 0;) {
    if (v[i] < half) {  // crossing between i and i+1
      low = f[i] + (half - v[i]) * (f[i + 1] - f[i]) / (v[i + 1] - v[i]);
      found = true;
      break;
    }
  }
  if (!found)
    throw std::invalid_argument(
        "width measurement: low half-crossing lies outside the grid");
  found = false;
  for (std::size_t i = imax + 1; i < n; ++i) {
    if (v[i] < half) {
      high = f[i - 1] +
             (v[i - 1] - half) * (f[i] - f[i - 1]) / (v[i - 1] - v[i]);
      found = true;
      break;
    }
  }
  if (!found)
    throw std::invalid_argument(
        "width measurement: high half-crossing lies outside the grid");
  return {low, f[imax], high};
}

}  // namespace

double measure_fwhm(const Spectrum& spectrum) {
  const Crossings c = half_crossings(spectrum);
  return c.high_MHz - c.low_MHz;
}

double measure_hwhm_low(const Spectrum& spectrum) {
  const Crossings c = half_crossings(spectrum);
  return c.peak_MHz - c.low_MHz;
}

double measure_hwhm_high(const Spectrum& spectrum) {
  const Crossings c = half_crossings(spectrum);
  return c.high_MHz - c.peak_MHz;
}

NarrowingReport narrowing_report(const LorentzianProfile& below,
                                 const LorentzianProfile& above,
                                 const RateConstants& params,
                                 std::span<const double> grid_MHz) {
  const Spectrum inv_below = sample_profile(below, grid_MHz);
  const Spectrum inv_above = sample_profile(above, grid_MHz);
  const Spectrum ph_below = map_to_photons(inv_below, params);
  const Spectrum ph_above = map_to_photons(inv_above, params);

  auto peak = [](const Spectrum& s) {
    return *std::max_element(s.values.begin(), s.values.end());
  };
  const double n_peak_below = peak(ph_below);
  const double n_peak_above = peak(ph_above);
  const double inv_peak_below = peak(inv_below);
  const double inv_peak_above = peak(inv_above);
  if (!(n_peak_below > 0.0) || !(inv_peak_below > 0.0) ||
      !(inv_peak_above > 0.0))
    throw std::domain_error("narrowing_report: zero peak in a scenario");

  NarrowingReport rep;
  rep.fwhm_in_MHz = measure_fwhm(ph_below);
  rep.fwhm_out_MHz = measure_fwhm(ph_above);
  rep.hwhm_low_in_MHz = measure_hwhm_low(ph_below);
  rep.hwhm_low_out_MHz = measure_hwhm_low(ph_above);
  rep.amplitude_ratio = n_peak_above / n_peak_below;
  rep.peak_gain_ratio =
      (n_peak_above / inv_peak_above) / (n_peak_below / inv_peak_below);
  return rep;
}

Spectrum normalize_peak(const Spectrum& spectrum) {
  spectrum.validate();
  if (spectrum.value_kind == ValueKind::log_amplitude_dB)
    throw std::invalid_argument("normalize_peak: log-scale input");
  const double peak =
      *std::max_element(spectrum.values.begin(), spectrum.values.end());
  if (!(peak > 0.0))
    throw std::domain_error("normalize_peak: peak must be positive");
  Spectrum out = spectrum;
  for (double& v : out.values) v /= peak;
  return out;
}

}  // namespace masersim
