#include "masersim/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "masersim/lineshape.hpp"

namespace masersim {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double lorentz(double f, double center, double hwhm) {
  const double z = (f - center) / hwhm;
  return 1.0 / (1.0 + z * z);
}

}  // namespace

void BiLorentzianModel::validate() const {
  if (!(hwhm1_MHz > 0.0) || !(hwhm2_MHz > 0.0) || !std::isfinite(hwhm1_MHz) ||
      !std::isfinite(hwhm2_MHz))
    throw std::invalid_argument("bi-Lorentzian: half-widths must be positive");
  if (!(amp1 >= 0.0) || !(amp2 >= 0.0))
    throw std::invalid_argument("bi-Lorentzian: amplitudes must be >= 0");
  if (!std::isfinite(center1_MHz) || !std::isfinite(center2_MHz) ||
      !std::isfinite(baseline) || !std::isfinite(amp1) || !std::isfinite(amp2))
    throw std::invalid_argument("bi-Lorentzian: non-finite parameter");
  if (center1_MHz > center2_MHz)
    throw std::invalid_argument(
        "bi-Lorentzian: component 1 must be the lower-center component");
}

void SplitLorentzianModel::validate() const {
  if (!(hwhm_low_MHz > 0.0) || !(hwhm_high_MHz > 0.0))
    throw std::invalid_argument("split Lorentzian: half-widths must be positive");
  if (!(amp >= 0.0))
    throw std::invalid_argument("split Lorentzian: amplitude must be >= 0");
  if (!std::isfinite(center_MHz) || !std::isfinite(baseline))
    throw std::invalid_argument("split Lorentzian: non-finite parameter");
}

void DetectorCalibration::validate() const {
  if (!(volts_per_dB > 0.0) || !std::isfinite(volts_per_dB))
    throw std::invalid_argument("calibration: volts_per_dB must be positive");
  if (!(external_attenuation_dB >= 0.0) ||
      !std::isfinite(external_attenuation_dB))
    throw std::invalid_argument("calibration: attenuation must be >= 0");
}

Spectrum eval_bilorentzian(const BiLorentzianModel& model,
                           std::span<const double> frequencies_MHz) {
  model.validate();
  Spectrum out;
  out.frequencies_MHz.assign(frequencies_MHz.begin(), frequencies_MHz.end());
  out.values.resize(frequencies_MHz.size());
  out.value_kind = ValueKind::linear_amplitude;
  for (std::size_t i = 0; i < frequencies_MHz.size(); ++i) {
    const double f = frequencies_MHz[i];
    out.values[i] = model.baseline +
                    model.amp1 * lorentz(f, model.center1_MHz, model.hwhm1_MHz) +
                    model.amp2 * lorentz(f, model.center2_MHz, model.hwhm2_MHz);
  }
  return out;
}

Spectrum eval_split_lorentzian(const SplitLorentzianModel& model,
                               std::span<const double> frequencies_MHz) {
  model.validate();
  Spectrum out;
  out.frequencies_MHz.assign(frequencies_MHz.begin(), frequencies_MHz.end());
  out.values.resize(frequencies_MHz.size());
  out.value_kind = ValueKind::linear_amplitude;
  for (std::size_t i = 0; i < frequencies_MHz.size(); ++i) {
    const double f = frequencies_MHz[i];
    const double w =
        f < model.center_MHz ? model.hwhm_low_MHz : model.hwhm_high_MHz;
    out.values[i] = model.baseline + model.amp * lorentz(f, model.center_MHz, w);
  }
  return out;
}

namespace {

void check_fit_input(const Spectrum& spectrum) {
  spectrum.validate();
  if (spectrum.value_kind == ValueKind::log_amplitude_dB)
    throw std::invalid_argument(
        "fit: log-scale input; convert with log_to_linear first");
  if (spectrum.values.size() < 10)
    throw std::invalid_argument("fit: needs >= 10 samples");
}

// Peak position, steep-side half-width estimate, and a residual-centroid
// guess for the second component.
BiLorentzianModel auto_init_bilorentzian(const Spectrum& s) {
  const auto& f = s.frequencies_MHz;
  const auto& v = s.values;
  const std::size_t n = v.size();
  const double step = s.grid_step_MHz();

  std::size_t imax = 0;
  double vmin = v[0];
  for (std::size_t i = 0; i < n; ++i) {
    if (v[i] > v[imax]) imax = i;
    vmin = std::min(vmin, v[i]);
  }
  const double base0 = vmin;
  const double amp0 = std::max(v[imax] - base0, 1e-300);
  const double half = base0 + amp0 / 2.0;

  double low = f.front(), high = f.back();
  for (std::size_t i = imax; i-- > 0;)
    if (v[i] < half) {
      low = f[i] + (half - v[i]) * (f[i + 1] - f[i]) / (v[i + 1] - v[i]);
      break;
    }
  for (std::size_t i = imax + 1; i < n; ++i)
    if (v[i] < half) {
      high = f[i - 1] + (v[i - 1] - half) * (f[i] - f[i - 1]) / (v[i - 1] - v[i]);
      break;
    }
  const double hwhm_steep = std::max(
      std::min(f[imax] - low, high - f[imax]), step);

  BiLorentzianModel m;
  m.amp1 = amp0;
  m.center1_MHz = f[imax];
  m.hwhm1_MHz = hwhm_steep;
  m.baseline = base0;

  // Second component from the centroid of the positive residual.
  double mass = 0.0, moment = 0.0, rmax = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r =
        v[i] - base0 - amp0 * lorentz(f[i], m.center1_MHz, m.hwhm1_MHz);
    if (r > 0.0) {
      mass += r;
      moment += r * f[i];
      rmax = std::max(rmax, r);
    }
  }
  m.amp2 = std::max(rmax, 1e-3 * amp0);
  m.center2_MHz = mass > 0.0 ? moment / mass : f[imax] + 2.0 * hwhm_steep;
  m.hwhm2_MHz = std::max(2.0 * hwhm_steep, 4.0 * step);
  if (m.center1_MHz > m.center2_MHz) {
    std::swap(m.amp1, m.amp2);
    std::swap(m.center1_MHz, m.center2_MHz);
    std::swap(m.hwhm1_MHz, m.hwhm2_MHz);
  }
  return m;
}

}  // namespace

FitResult fit_bilorentzian(const Spectrum& spectrum,
                           std::optional<BiLorentzianModel> init,
                           const LMOptions& opts) {
  check_fit_input(spectrum);
  const auto& f = spectrum.frequencies_MHz;
  const auto& y = spectrum.values;
  const std::size_t n = y.size();
  const double step = spectrum.grid_step_MHz();

  BiLorentzianModel m0;
  if (init) {
    init->validate();
    m0 = *init;
  } else {
    m0 = auto_init_bilorentzian(spectrum);
  }

  // p = {amp1, amp2, c1, c2, w1, w2, baseline}
  std::vector<double> p0 = {m0.amp1,     m0.amp2,     m0.center1_MHz,
                            m0.center2_MHz, m0.hwhm1_MHz, m0.hwhm2_MHz,
                            m0.baseline};

  auto residuals = [&](std::span<const double> p) {
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n; ++i)
      r[i] = p[6] + p[0] * lorentz(f[i], p[2], p[4]) +
             p[1] * lorentz(f[i], p[3], p[5]) - y[i];
    return r;
  };
  auto jacobian = [&](std::span<const double> p) {
    std::vector<double> jac(n * 7);
    for (std::size_t i = 0; i < n; ++i) {
      double* row = &jac[i * 7];
      for (int k = 0; k < 2; ++k) {
        const double amp = p[0 + k], c = p[2 + k], w = p[4 + k];
        const double z = (f[i] - c) / w;
        const double u = 1.0 / (1.0 + z * z);
        row[0 + k] = u;
        row[2 + k] = amp * u * u * 2.0 * z / w;
        row[4 + k] = amp * u * u * 2.0 * z * z / w;
      }
      row[6] = 1.0;
    }
    return jac;
  };
  auto valid = [](std::span<const double> p) {
    return p[0] >= 0.0 && p[1] >= 0.0 && p[4] > 0.0 && p[5] > 0.0;
  };

  LMResult lm = levenberg_marquardt(residuals, jacobian, p0, opts, valid);

  FitResult fit;
  fit.model = BiLorentzianModel{lm.params[0], lm.params[1], lm.params[2],
                                lm.params[3], lm.params[4], lm.params[5],
                                lm.params[6]};
  fit.param_stderr.fill(kNaN);
  if (!lm.param_stderr.empty())
    std::copy(lm.param_stderr.begin(), lm.param_stderr.end(),
              fit.param_stderr.begin());
  fit.rss = lm.rss;
  fit.iterations = lm.iterations;
  fit.converged = lm.converged;
  fit.rss_history = std::move(lm.rss_history);

  if (fit.model.center1_MHz > fit.model.center2_MHz) {
    auto& m = fit.model;
    std::swap(m.amp1, m.amp2);
    std::swap(m.center1_MHz, m.center2_MHz);
    std::swap(m.hwhm1_MHz, m.hwhm2_MHz);
    std::swap(fit.param_stderr[0], fit.param_stderr[1]);
    std::swap(fit.param_stderr[2], fit.param_stderr[3]);
    std::swap(fit.param_stderr[4], fit.param_stderr[5]);
  }

  fit.degenerate =
      fit.model.hwhm1_MHz < 0.5 * step || fit.model.hwhm2_MHz < 0.5 * step ||
      std::abs(fit.model.center2_MHz - fit.model.center1_MHz) < step;
  return fit;
}

SplitFitResult fit_split_lorentzian(const Spectrum& spectrum,
                                    std::optional<SplitLorentzianModel> init,
                                    const LMOptions& opts) {
  check_fit_input(spectrum);
  const auto& f = spectrum.frequencies_MHz;
  const auto& y = spectrum.values;
  const std::size_t n = y.size();
  const double step = spectrum.grid_step_MHz();

  SplitLorentzianModel m0;
  if (init) {
    init->validate();
    m0 = *init;
  } else {
    const BiLorentzianModel b = auto_init_bilorentzian(spectrum);
    m0 = SplitLorentzianModel{b.amp1, b.center1_MHz, b.hwhm1_MHz, b.hwhm1_MHz,
                              b.baseline};
  }

  // p = {amp, center, w_low, w_high, baseline}. The side selector follows
  // the current center, so the model stays continuous at every parameter
  // vector even though the Jacobian switches branches.
  std::vector<double> p0 = {m0.amp, m0.center_MHz, m0.hwhm_low_MHz,
                            m0.hwhm_high_MHz, m0.baseline};
  auto residuals = [&](std::span<const double> p) {
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double w = f[i] < p[1] ? p[2] : p[3];
      r[i] = p[4] + p[0] * lorentz(f[i], p[1], w) - y[i];
    }
    return r;
  };
  auto jacobian = [&](std::span<const double> p) {
    std::vector<double> jac(n * 5, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double* row = &jac[i * 5];
      const bool low = f[i] < p[1];
      const double w = low ? p[2] : p[3];
      const double z = (f[i] - p[1]) / w;
      const double u = 1.0 / (1.0 + z * z);
      row[0] = u;
      row[1] = p[0] * u * u * 2.0 * z / w;
      row[low ? 2 : 3] = p[0] * u * u * 2.0 * z * z / w;
      row[4] = 1.0;
    }
    return jac;
  };
  auto valid = [](std::span<const double> p) {
    return p[0] >= 0.0 && p[2] > 0.0 && p[3] > 0.0;
  };

  LMResult lm = levenberg_marquardt(residuals, jacobian, p0, opts, valid);

  SplitFitResult fit;
  fit.model = SplitLorentzianModel{lm.params[0], lm.params[1], lm.params[2],
                                   lm.params[3], lm.params[4]};
  fit.param_stderr.fill(kNaN);
  if (!lm.param_stderr.empty())
    std::copy(lm.param_stderr.begin(), lm.param_stderr.end(),
              fit.param_stderr.begin());
  fit.rss = lm.rss;
  fit.iterations = lm.iterations;
  fit.converged = lm.converged;
  fit.rss_history = std::move(lm.rss_history);
  fit.degenerate = fit.model.hwhm_low_MHz < 0.5 * step ||
                   fit.model.hwhm_high_MHz < 0.5 * step;
  return fit;
}

LinewidthSummary extract_linewidths(const FitResult& fit,
                                    std::span<const double> grid_MHz) {
  if (!fit.converged)
    throw std::invalid_argument("extract_linewidths: fit did not converge");
  if (grid_MHz.size() < 2)
    throw std::invalid_argument("extract_linewidths: grid needs >= 2 points");

  // Baseline-free model resampled 10x finer than the measurement grid.
  const std::size_t n_dense = (grid_MHz.size() - 1) * 10 + 1;
  const double lo = grid_MHz.front();
  const double span = grid_MHz.back() - grid_MHz.front();
  std::vector<double> dense(n_dense);
  for (std::size_t i = 0; i < n_dense; ++i)
    dense[i] = lo + span * static_cast<double>(i) /
                        static_cast<double>(n_dense - 1);

  BiLorentzianModel flat = fit.model;
  flat.baseline = 0.0;
  const Spectrum curve = eval_bilorentzian(flat, dense);

  LinewidthSummary out;
  out.fwhm_MHz = measure_fwhm(curve);
  out.hwhm_low_MHz = measure_hwhm_low(curve);
  out.hwhm_high_MHz = measure_hwhm_high(curve);
  out.hwhm_low_component_MHz = fit.model.hwhm1_MHz;
  return out;
}

namespace {

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

}  // namespace

Spectrum log_to_linear(const Spectrum& spectrum_dB,
                       const DetectorCalibration& cal, bool normalize) {
  spectrum_dB.validate();
  cal.validate();
  if (spectrum_dB.value_kind != ValueKind::log_amplitude_dB)
    throw std::invalid_argument(
        "log_to_linear: spectrum must be tagged log_amplitude_dB");
  Spectrum out = spectrum_dB;
  out.value_kind = ValueKind::linear_amplitude;
  for (double& v : out.values)
    v = db_to_linear(v + cal.external_attenuation_dB);
  if (normalize) {
    const double peak = *std::max_element(out.values.begin(), out.values.end());
    for (double& v : out.values) v /= peak;
  }
  return out;
}

TimeTrace log_to_linear(const TimeTrace& trace_volts,
                        const DetectorCalibration& cal, bool normalize) {
  trace_volts.validate();
  cal.validate();
  TimeTrace out = trace_volts;
  for (double& v : out.volts)
    v = db_to_linear(v / cal.volts_per_dB + cal.external_attenuation_dB);
  if (normalize) {
    const double peak = *std::max_element(out.volts.begin(), out.volts.end());
    for (double& v : out.volts) v /= peak;
  }
  return out;
}

Spectrum linear_to_log(const Spectrum& linear, const DetectorCalibration& cal) {
  linear.validate();
  cal.validate();
  if (linear.value_kind == ValueKind::log_amplitude_dB)
    throw std::invalid_argument("linear_to_log: input already log-scale");
  Spectrum out = linear;
  out.value_kind = ValueKind::log_amplitude_dB;
  for (double& v : out.values) {
    if (!(v > 0.0))
      throw std::domain_error("linear_to_log: values must be positive");
    v = 10.0 * std::log10(v) - cal.external_attenuation_dB;
  }
  return out;
}

TimeTrace linear_to_log(const TimeTrace& linear, const DetectorCalibration& cal) {
  linear.validate();
  cal.validate();
  TimeTrace out = linear;
  for (double& v : out.volts) {
    if (!(v > 0.0))
      throw std::domain_error("linear_to_log: values must be positive");
    v = (10.0 * std::log10(v) - cal.external_attenuation_dB) * cal.volts_per_dB;
  }
  return out;
}

SubtractedSpectrum subtract_background(const Spectrum& signal,
                                       const Spectrum& background) {
  signal.validate();
  background.validate();
  if (signal.value_kind == ValueKind::log_amplitude_dB ||
      background.value_kind == ValueKind::log_amplitude_dB)
    throw std::invalid_argument(
        "subtract_background: operands must be linear-domain");
  if (signal.frequencies_MHz != background.frequencies_MHz)
    throw std::invalid_argument("subtract_background: grid mismatch");

  SubtractedSpectrum out{signal, 0};
  for (std::size_t i = 0; i < out.spectrum.values.size(); ++i) {
    const double d = signal.values[i] - background.values[i];
    if (d < 0.0) {
      out.spectrum.values[i] = 0.0;
      ++out.clipped_points;
    } else {
      out.spectrum.values[i] = d;
    }
  }
  return out;
}

SubtractedTrace subtract_background(const TimeTrace& signal,
                                    const TimeTrace& background) {
  signal.validate();
  background.validate();
  if (signal.times_s != background.times_s)
    throw std::invalid_argument("subtract_background: time grid mismatch");

  SubtractedTrace out{signal, 0};
  for (std::size_t i = 0; i < out.trace.volts.size(); ++i) {
    const double d = signal.volts[i] - background.volts[i];
    if (d < 0.0) {
      out.trace.volts[i] = 0.0;
      ++out.clipped_points;
    } else {
      out.trace.volts[i] = d;
    }
  }
  return out;
}

}  // namespace masersim
