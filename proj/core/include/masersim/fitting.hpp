#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>

#include "masersim/least_squares.hpp"
#include "masersim/magnetometry.hpp"
#include "masersim/spectrum.hpp"

namespace masersim {

// Sum of two Lorentzian components over a shared baseline:
//   v(w) = baseline + sum_k amp_k / (1 + ((w - center_k)/hwhm_k)^2).
// Component 1 is by convention the lower-center ("low-frequency") one.
struct BiLorentzianModel {
  double amp1;
  double amp2;
  double center1_MHz;
  double center2_MHz;
  double hwhm1_MHz;
  double hwhm2_MHz;
  double baseline;

  void validate() const;
};

// Single peak with independent low/high-side half-widths:
//   v(w) = baseline + amp / (1 + ((w - center)/hwhm_side)^2),
// using hwhm_low below center and hwhm_high above.
struct SplitLorentzianModel {
  double amp;
  double center_MHz;
  double hwhm_low_MHz;
  double hwhm_high_MHz;
  double baseline;

  void validate() const;
};

// Parameter order matches the model fields.
struct FitResult {
  BiLorentzianModel model;
  std::array<double, 7> param_stderr;  // NaN entries when unavailable
  double rss = 0.0;
  int iterations = 0;
  bool converged = false;
  bool degenerate = false;  // collapsed components or vanishing width
  std::vector<double> rss_history;
};

struct SplitFitResult {
  SplitLorentzianModel model;
  std::array<double, 5> param_stderr;
  double rss = 0.0;
  int iterations = 0;
  bool converged = false;
  bool degenerate = false;
  std::vector<double> rss_history;
};

// Log-detector scale and the fixed attenuation inserted before it.
struct DetectorCalibration {
  double volts_per_dB = 0.022;
  double external_attenuation_dB = 0.0;

  void validate() const;
};

// Widths measured on the fitted curve (baseline removed): half-maximum
// crossings of the composite line plus the low-frequency component's own
// half-width parameter, so both reporting conventions are available.
struct LinewidthSummary {
  double fwhm_MHz;
  double hwhm_low_MHz;
  double hwhm_high_MHz;
  double hwhm_low_component_MHz;  // = model.hwhm1_MHz
};

struct SubtractedSpectrum {
  Spectrum spectrum;
  std::size_t clipped_points;
};

struct SubtractedTrace {
  TimeTrace trace;
  std::size_t clipped_points;
};

Spectrum eval_bilorentzian(const BiLorentzianModel& model,
                           std::span<const double> frequencies_MHz);
Spectrum eval_split_lorentzian(const SplitLorentzianModel& model,
                               std::span<const double> frequencies_MHz);

// Damped least-squares fit. Accepts photon_count or linear_amplitude
// spectra with at least 10 samples; log-scale data must be linearized
// first. Components are re-ordered so center1 <= center2. Auto
// initialization seeds component 1 at the peak with the steep-side
// half-crossing width and component 2 at the centroid of the residual.
FitResult fit_bilorentzian(const Spectrum& spectrum,
                           std::optional<BiLorentzianModel> init = std::nullopt,
                           const LMOptions& opts = {});

SplitFitResult fit_split_lorentzian(
    const Spectrum& spectrum,
    std::optional<SplitLorentzianModel> init = std::nullopt,
    const LMOptions& opts = {});

// Requires a converged fit; measures on a 10x-densified resampling of the
// given grid.
LinewidthSummary extract_linewidths(const FitResult& fit,
                                    std::span<const double> grid_MHz);

// Log-detector conversion to linear power (arbitrary units):
//   spectrum overload: values are dB readings; dB = value + attenuation.
//   trace overload: values are raw detector volts; dB = volts/volts_per_dB
//     + attenuation.
// Linear output is 10^(dB/10), optionally rescaled to peak = 1.
Spectrum log_to_linear(const Spectrum& spectrum_dB,
                       const DetectorCalibration& cal, bool normalize = false);
TimeTrace log_to_linear(const TimeTrace& trace_volts,
                        const DetectorCalibration& cal, bool normalize = false);

// Exact inverses of the two conversions (no normalization).
Spectrum linear_to_log(const Spectrum& linear, const DetectorCalibration& cal);
TimeTrace linear_to_log(const TimeTrace& linear, const DetectorCalibration& cal);

// Pointwise linear-domain difference on identical grids; negative results
// are clipped to zero and counted.
SubtractedSpectrum subtract_background(const Spectrum& signal,
                                       const Spectrum& background);
SubtractedTrace subtract_background(const TimeTrace& signal,
                                    const TimeTrace& background);

}  // namespace masersim
