#pragma once

#include <array>
#include <optional>
#include <vector>

#include "masersim/least_squares.hpp"

namespace masersim {

// Detector time series with optional acquisition metadata. Times are
// strictly increasing; t = 0 marks the trigger, so t < 0 is pre-trigger
// (signal-free) data.
struct TimeTrace {
  std::vector<double> times_s;
  std::vector<double> volts;
  std::optional<double> b0_T;
  std::optional<double> probe_freq_MHz;

  void validate() const;
};

struct TimeWindow {
  double t_min_s;
  double t_max_s;
};

// Signal amplitude versus applied field. Error columns may be zero when
// unknown; all four arrays share one length (>= 3) and fields are strictly
// increasing.
struct FieldResponse {
  std::vector<double> fields_T;
  std::vector<double> amplitudes_V;
  std::vector<double> amp_errors_V;
  std::vector<double> field_errors_T;

  void validate() const;
};

// A(B) = a + b*exp(c*B).
struct ExponentialModel {
  double a;
  double b;
  double c;
};

struct ExpFitResult {
  ExponentialModel model;
  std::array<double, 3> param_stderr;  // a, b, c; NaN when unavailable
  double rss = 0.0;
  int iterations = 0;
  bool converged = false;
  bool degenerate = false;  // b, c unidentifiable (e.g. constant data)
  std::vector<double> rss_history;
};

// Figure-of-merit bundle: eta = sigma_s / (m_s * sqrt(2*delta_f)), exactly.
struct SensitivityReport {
  double sigma_s_V;
  double m_s_V_per_T;
  double delta_f_Hz;
  double eta_T_per_sqrt_Hz;
  double b0_T;
};

// Maximum |volts| with parabolic sub-sample refinement across the
// bracketing triple; boundary maxima are returned unrefined. A centered
// moving average of half-width smooth_samples is applied first when
// nonzero (default: none).
double peak_amplitude(const TimeTrace& trace, std::size_t smooth_samples = 0);

// Sample standard deviation (mean removed, n-1 denominator) of the volts
// falling inside the window. The window must lie within the trace and
// contain at least 30 samples.
double noise_sigma(const TimeTrace& trace, const TimeWindow& window);

// 20*log10(peak_amplitude / noise_sigma); zero noise is a domain error.
double snr_db(const TimeTrace& trace, const TimeWindow& noise_window);

// Fits A(B) = a + b*exp(c*B) by damped least squares (same optimizer and
// convergence contract as the spectral fits). Requires >= 4 points.
ExpFitResult fit_field_response(const FieldResponse& data,
                                std::optional<ExponentialModel> init = std::nullopt,
                                const LMOptions& opts = {});

// Tangent slope of the fitted response: b*c*exp(c*B0).
double slope_at(const ExponentialModel& model, double b0_T);

// eta = sigma_s / (m_s * sqrt(2*delta_f)); all inputs must be positive.
double sensitivity(double sigma_s_V, double m_s_V_per_T, double delta_f_Hz);

SensitivityReport sensitivity_report(double sigma_s_V, double m_s_V_per_T,
                                     double delta_f_Hz, double b0_T);

}  // namespace masersim
