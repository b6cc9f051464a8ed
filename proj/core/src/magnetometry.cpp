#include "masersim/magnetometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "masersim/errors.hpp"

namespace masersim {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

void TimeTrace::validate() const {
  if (times_s.size() != volts.size())
    throw std::invalid_argument("trace: time/volt length mismatch");
  if (times_s.empty()) throw std::invalid_argument("trace: empty");
  for (std::size_t i = 0; i < times_s.size(); ++i)
    if (!std::isfinite(times_s[i]) || !std::isfinite(volts[i]))
      throw std::invalid_argument("trace: non-finite entry at index " +
                                  std::to_string(i));
  for (std::size_t i = 1; i < times_s.size(); ++i)
    if (!(times_s[i] > times_s[i - 1]))
      throw std::invalid_argument(
          "trace: times not strictly increasing at index " + std::to_string(i));
}

void FieldResponse::validate() const {
  const std::size_t n = fields_T.size();
  if (amplitudes_V.size() != n || amp_errors_V.size() != n ||
      field_errors_T.size() != n)
    throw std::invalid_argument("field response: column length mismatch");
  if (n < 3) throw std::invalid_argument("field response: needs >= 3 points");
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(fields_T[i]) || !std::isfinite(amplitudes_V[i]) ||
        !std::isfinite(amp_errors_V[i]) || !std::isfinite(field_errors_T[i]))
      throw std::invalid_argument("field response: non-finite entry at index " +
                                  std::to_string(i));
  for (std::size_t i = 1; i < n; ++i)
    if (!(fields_T[i] > fields_T[i - 1]))
      throw std::invalid_argument(
          "field response: fields not strictly increasing at index " +
          std::to_string(i));
}

double peak_amplitude(const TimeTrace& trace, std::size_t smooth_samples) {
  trace.validate();
  const std::size_t n = trace.volts.size();

  std::vector<double> w;
  const std::vector<double>* src = &trace.volts;
  if (smooth_samples > 0) {
    w.resize(n);
    const auto k = static_cast<std::ptrdiff_t>(smooth_samples);
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
      const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, i - k);
      const std::ptrdiff_t hi =
          std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(n) - 1, i + k);
      double acc = 0.0;
      for (std::ptrdiff_t j = lo; j <= hi; ++j) acc += trace.volts[j];
      w[i] = acc / static_cast<double>(hi - lo + 1);
    }
    src = &w;
  }

  std::size_t imax = 0;
  double best = std::abs((*src)[0]);
  for (std::size_t i = 1; i < n; ++i) {
    const double a = std::abs((*src)[i]);
    if (a > best) {
      best = a;
      imax = i;
    }
  }
  if (imax == 0 || imax == n - 1) return best;

  // Parabolic sub-sample refinement on |v|, unequal spacing allowed.
  const double tm = trace.times_s[imax];
  const double t0 = trace.times_s[imax - 1], t2 = trace.times_s[imax + 1];
  const double a0 = std::abs((*src)[imax - 1]), a2 = std::abs((*src)[imax + 1]);
  const double dl = tm - t0, dr = t2 - tm;
  const double sl = (best - a0) / dl, sr = (a2 - best) / dr;
  const double curv = 2.0 * (sr - sl) / (dl + dr);
  if (!(curv < 0.0) || !std::isfinite(curv)) return best;
  const double slope_c = (sl * dr + sr * dl) / (dl + dr);
  const double refined = best - 0.5 * slope_c * slope_c / curv;
  return (std::isfinite(refined) && refined > best) ? refined : best;
}

double noise_sigma(const TimeTrace& trace, const TimeWindow& window) {
  trace.validate();
  if (!(window.t_min_s < window.t_max_s))
    throw std::invalid_argument("noise window: empty interval");
  if (window.t_min_s < trace.times_s.front() ||
      window.t_max_s > trace.times_s.back())
    throw std::invalid_argument("noise window: lies outside the trace");

  double mean = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < trace.times_s.size(); ++i) {
    if (trace.times_s[i] >= window.t_min_s &&
        trace.times_s[i] <= window.t_max_s) {
      mean += trace.volts[i];
      ++count;
    }
  }
  if (count < 30)
    throw std::invalid_argument("noise window: needs >= 30 samples, got " +
                                std::to_string(count));
  mean /= static_cast<double>(count);
  double ss = 0.0;
  for (std::size_t i = 0; i < trace.times_s.size(); ++i) {
    if (trace.times_s[i] >= window.t_min_s &&
        trace.times_s[i] <= window.t_max_s) {
      const double d = trace.volts[i] - mean;
      ss += d * d;
    }
  }
  return std::sqrt(ss / static_cast<double>(count - 1));
}

double snr_db(const TimeTrace& trace, const TimeWindow& noise_window) {
  const double sigma = noise_sigma(trace, noise_window);
  if (!(sigma > 0.0)) throw std::domain_error("snr_db: zero noise sigma");
  const double peak = peak_amplitude(trace);
  return 20.0 * std::log10(peak / sigma);
}

namespace {

// Log-linear regression of log(A - a0) against B: seeds {b, c} given a
// trial offset a0.
ExponentialModel seed_from_offset(const FieldResponse& data, double a0) {
  const std::size_t n = data.fields_T.size();
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  std::size_t used = 0;
  double floor = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    floor = std::max(floor, std::abs(data.amplitudes_V[i]));
  floor = std::max(floor * 1e-12, 1e-300);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = data.amplitudes_V[i] - a0;
    if (d <= floor) continue;
    const double x = data.fields_T[i];
    const double y = std::log(d);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++used;
  }
  if (used < 2) return {a0, 1.0, 0.0};
  const double den =
      static_cast<double>(used) * sxx - sx * sx;
  if (den == 0.0) return {a0, 1.0, 0.0};
  const double c = (static_cast<double>(used) * sxy - sx * sy) / den;
  const double alpha = (sy - c * sx) / static_cast<double>(used);
  return {a0, std::exp(alpha), c};
}

std::vector<double> exp_residuals(const FieldResponse& data,
                                  std::span<const double> p) {
  std::vector<double> r(data.fields_T.size());
  for (std::size_t i = 0; i < r.size(); ++i)
    r[i] = p[0] + p[1] * std::exp(p[2] * data.fields_T[i]) -
           data.amplitudes_V[i];
  return r;
}

}  // namespace

ExpFitResult fit_field_response(const FieldResponse& data,
                                std::optional<ExponentialModel> init,
                                const LMOptions& opts) {
  data.validate();
  const std::size_t n = data.fields_T.size();
  if (n < 4)
    throw std::invalid_argument("fit_field_response: needs >= 4 points");

  auto residuals = [&](std::span<const double> p) {
    return exp_residuals(data, p);
  };
  auto jacobian = [&](std::span<const double> p) {
    std::vector<double> jac(n * 3);
    for (std::size_t i = 0; i < n; ++i) {
      const double e = std::exp(p[2] * data.fields_T[i]);
      jac[i * 3 + 0] = 1.0;
      jac[i * 3 + 1] = e;
      jac[i * 3 + 2] = p[1] * data.fields_T[i] * e;
    }
    return jac;
  };
  auto finite = [](std::span<const double> p) {
    return std::isfinite(p[0]) && std::isfinite(p[1]) && std::isfinite(p[2]);
  };

  std::vector<std::vector<double>> seeds;
  if (init) {
    seeds.push_back({init->a, init->b, init->c});
  } else {
    const double amin =
        *std::min_element(data.amplitudes_V.begin(), data.amplitudes_V.end());
    const double amax =
        *std::max_element(data.amplitudes_V.begin(), data.amplitudes_V.end());
    const double spread = std::max(amax - amin, 1e-12 * std::abs(amax));
    for (double frac : {0.05, 0.5, 1.5}) {
      const ExponentialModel s = seed_from_offset(data, amin - frac * spread);
      seeds.push_back({s.a, s.b, s.c});
    }
  }

  LMResult best;
  bool have_best = false;
  for (auto& seed : seeds) {
    if (!finite(seed)) continue;
    LMResult lm = levenberg_marquardt(residuals, jacobian, seed, opts, finite);
    if (!have_best || lm.rss < best.rss) {
      best = std::move(lm);
      have_best = true;
    }
  }
  if (!have_best)
    throw ComputationError("fit_field_response: no usable starting point");

  ExpFitResult fit;
  fit.model = ExponentialModel{best.params[0], best.params[1], best.params[2]};
  fit.param_stderr.fill(kNaN);
  if (!best.param_stderr.empty())
    std::copy(best.param_stderr.begin(), best.param_stderr.end(),
              fit.param_stderr.begin());
  fit.rss = best.rss;
  fit.iterations = best.iterations;
  fit.converged = best.converged;
  fit.rss_history = std::move(best.rss_history);

  // b and c are unidentifiable when the exponential barely varies across
  // the sampled span.
  const double span = data.fields_T.back() - data.fields_T.front();
  fit.degenerate = !std::isfinite(fit.model.c) ||
                   std::abs(fit.model.c) * span < 1e-6 ||
                   !std::isfinite(fit.param_stderr[1]) ||
                   !std::isfinite(fit.param_stderr[2]);
  return fit;
}

double slope_at(const ExponentialModel& model, double b0_T) {
  return model.b * model.c * std::exp(model.c * b0_T);
}

double sensitivity(double sigma_s_V, double m_s_V_per_T, double delta_f_Hz) {
  if (!(sigma_s_V > 0.0) || !std::isfinite(sigma_s_V))
    throw std::domain_error("sensitivity: sigma_s must be positive");
  if (!(m_s_V_per_T > 0.0) || !std::isfinite(m_s_V_per_T))
    throw std::domain_error("sensitivity: m_s must be positive");
  if (!(delta_f_Hz > 0.0) || !std::isfinite(delta_f_Hz))
    throw std::domain_error("sensitivity: delta_f must be positive");
  return sigma_s_V / (m_s_V_per_T * std::sqrt(2.0 * delta_f_Hz));
}

SensitivityReport sensitivity_report(double sigma_s_V, double m_s_V_per_T,
                                     double delta_f_Hz, double b0_T) {
  SensitivityReport rep;
  rep.sigma_s_V = sigma_s_V;
  rep.m_s_V_per_T = m_s_V_per_T;
  rep.delta_f_Hz = delta_f_Hz;
  rep.eta_T_per_sqrt_Hz = sensitivity(sigma_s_V, m_s_V_per_T, delta_f_Hz);
  rep.b0_T = b0_T;
  return rep;
}

}  // namespace masersim
