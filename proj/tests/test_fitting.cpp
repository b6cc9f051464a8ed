#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "masersim/fitting.hpp"
#include "masersim/lineshape.hpp"
#include "masersim/rate_equations.hpp"

using namespace masersim;

namespace {

double rel_err(double got, double want) {
  return std::abs(got - want) / std::abs(want);
}

std::vector<double> make_grid(double lo, double hi, std::size_t n) {
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i)
    g[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return g;
}

// Doublet resembling the measured zero-field line: a narrow low-frequency
// component riding on a broad one.
const BiLorentzianModel kDoublet{1.0, 0.6, 1450.0, 1450.9, 0.13, 1.1, 0.02};

}  // namespace

TEST_CASE("model evaluation") {
  std::vector<double> g = make_grid(-5.0, 5.0, 101);
  BiLorentzianModel single{2.0, 0.0, 0.0, 1.0, 0.5, 1.0, 0.25};
  Spectrum s = eval_bilorentzian(single, g);
  CHECK(s.values[50] == doctest::Approx(2.25).epsilon(1e-15));   // center
  CHECK(s.values[55] == doctest::Approx(1.25).epsilon(1e-12));   // +hwhm
  CHECK(s.values[45] == doctest::Approx(1.25).epsilon(1e-12));   // -hwhm
  CHECK(s.value_kind == ValueKind::linear_amplitude);

  BiLorentzianModel flat{0.0, 0.0, 0.0, 1.0, 0.5, 1.0, 0.125};
  Spectrum fs = eval_bilorentzian(flat, g);
  CHECK(std::all_of(fs.values.begin(), fs.values.end(),
                    [](double v) { return v == 0.125; }));

  BiLorentzianModel bad = single;
  bad.hwhm1_MHz = 0.0;
  CHECK_THROWS_AS(eval_bilorentzian(bad, g), std::invalid_argument);
  bad = single;
  bad.center1_MHz = 2.0;  // violates the center1 <= center2 convention
  CHECK_THROWS_AS(eval_bilorentzian(bad, g), std::invalid_argument);

  SplitLorentzianModel split{1.0, 0.0, 0.5, 1.5, 0.0};
  Spectrum sp = eval_split_lorentzian(split, g);
  CHECK(sp.values[50] == 1.0);
  // Half-maximum reached at -0.5 on the left and +1.5 on the right.
  CHECK(sp.values[45] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(sp.values[65] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("noiseless doublet roundtrip with explicit init") {
  std::vector<double> g = make_grid(1447.5, 1452.5, 1001);
  Spectrum data = eval_bilorentzian(kDoublet, g);

  BiLorentzianModel init = kDoublet;
  init.amp1 *= 1.2;
  init.amp2 *= 0.8;
  init.hwhm1_MHz *= 1.3;
  init.hwhm2_MHz *= 0.9;
  FitResult fit = fit_bilorentzian(data, init);
  REQUIRE(fit.converged);
  CHECK_FALSE(fit.degenerate);
  CHECK(rel_err(fit.model.amp1, 1.0) < 1e-6);
  CHECK(rel_err(fit.model.amp2, 0.6) < 1e-6);
  CHECK(rel_err(fit.model.center1_MHz, 1450.0) < 1e-9);
  CHECK(rel_err(fit.model.center2_MHz, 1450.9) < 1e-9);
  CHECK(rel_err(fit.model.hwhm1_MHz, 0.13) < 1e-6);
  CHECK(rel_err(fit.model.hwhm2_MHz, 1.1) < 1e-6);
  CHECK(rel_err(fit.model.baseline, 0.02) < 1e-6);
  CHECK(fit.rss < 1e-12);
}

TEST_CASE("noiseless doublet roundtrip with automatic init") {
  std::vector<double> g = make_grid(1447.5, 1452.5, 1001);
  Spectrum data = eval_bilorentzian(kDoublet, g);
  FitResult fit = fit_bilorentzian(data);
  REQUIRE(fit.converged);
  CHECK(rel_err(fit.model.hwhm1_MHz, 0.13) < 1e-4);
  CHECK(rel_err(fit.model.hwhm2_MHz, 1.1) < 1e-4);
  CHECK(rel_err(fit.model.center1_MHz, 1450.0) < 1e-7);
  CHECK(fit.model.center1_MHz <= fit.model.center2_MHz);
}

TEST_CASE("component ordering is restored after the fit") {
  std::vector<double> g = make_grid(-6.0, 6.0, 801);
  BiLorentzianModel truth{0.5, 1.0, -1.0, 1.5, 0.8, 0.4, 0.0};
  Spectrum data = eval_bilorentzian(truth, g);

  // Initialize with the components swapped (violating the convention is
  // fine mid-optimization; the result must come back ordered).
  BiLorentzianModel swapped{1.1, 0.45, -1.2, 1.4, 0.5, 0.9, 0.01};
  FitResult fit = fit_bilorentzian(data, swapped);
  REQUIRE(fit.converged);
  CHECK(fit.model.center1_MHz <= fit.model.center2_MHz);
  CHECK(rel_err(fit.model.center1_MHz, -1.0) < 1e-7);
  CHECK(rel_err(fit.model.amp1, 0.5) < 1e-5);
  CHECK(rel_err(fit.model.hwhm2_MHz, 0.4) < 1e-5);
}

TEST_CASE("random noiseless doublets recover or flag degeneracy") {
  std::mt19937_64 rng(606060);
  std::uniform_real_distribution<double> amp(0.1, 5.0);
  std::uniform_real_distribution<double> width(0.08, 2.0);
  std::uniform_real_distribution<double> sep(0.0, 3.0);
  std::uniform_real_distribution<double> base(0.0, 0.5);
  std::uniform_real_distribution<double> jitter(0.9, 1.1);

  std::vector<double> g = make_grid(-12.0, 12.0, 2401);
  int recovered = 0, flagged = 0;
  for (int trial = 0; trial < 100; ++trial) {
    BiLorentzianModel truth;
    truth.amp1 = amp(rng);
    truth.amp2 = amp(rng);
    const double s = sep(rng);
    truth.center1_MHz = -s / 2.0;
    truth.center2_MHz = s / 2.0;
    truth.hwhm1_MHz = width(rng);
    truth.hwhm2_MHz = width(rng);
    truth.baseline = base(rng);
    Spectrum data = eval_bilorentzian(truth, g);

    BiLorentzianModel init = truth;
    init.amp1 *= jitter(rng);
    init.amp2 *= jitter(rng);
    init.hwhm1_MHz *= jitter(rng);
    init.hwhm2_MHz *= jitter(rng);
    init.baseline += 0.01;
    FitResult fit = fit_bilorentzian(data, init);

    if (fit.degenerate || !fit.converged) {
      ++flagged;
      continue;
    }
    // Identify components by center (they may legitimately swap when the
    // separation is small but nonzero).
    const bool straight =
        std::abs(fit.model.center1_MHz - truth.center1_MHz) <
        std::abs(fit.model.center1_MHz - truth.center2_MHz);
    const BiLorentzianModel want =
        straight ? truth
                 : BiLorentzianModel{truth.amp2, truth.amp1, truth.center2_MHz,
                                     truth.center1_MHz, truth.hwhm2_MHz,
                                     truth.hwhm1_MHz, truth.baseline};
    const bool ok = rel_err(fit.model.amp1, want.amp1) < 1e-4 &&
                    rel_err(fit.model.amp2, want.amp2) < 1e-4 &&
                    rel_err(fit.model.hwhm1_MHz, want.hwhm1_MHz) < 1e-4 &&
                    rel_err(fit.model.hwhm2_MHz, want.hwhm2_MHz) < 1e-4;
    if (ok) ++recovered;
    CHECK(ok);
  }
  // Degeneracy may legitimately fire near zero separation, but the clean
  // recoveries must dominate.
  CHECK(recovered + flagged == 100);
  CHECK(recovered >= 80);
}

TEST_CASE("collapsed components are flagged degenerate") {
  std::vector<double> g = make_grid(-5.0, 5.0, 501);
  BiLorentzianModel merged{1.0, 0.8, 0.0, 0.0, 0.7, 0.7, 0.1};
  Spectrum data = eval_bilorentzian(merged, g);
  FitResult fit = fit_bilorentzian(data, merged);
  CHECK(fit.degenerate);
}

TEST_CASE("Monte-Carlo uncertainty behaviour at one-percent noise") {
  std::vector<double> g = make_grid(1447.5, 1452.5, 501);
  Spectrum clean = eval_bilorentzian(kDoublet, g);
  const double sigma = 0.01 * 1.02;  // 1% of the peak height

  std::mt19937_64 rng(20200713);
  std::normal_distribution<double> noise(0.0, sigma);
  std::vector<double> hwhm_errors;
  int covered = 0, converged_count = 0;
  const int trials = 60;
  for (int t = 0; t < trials; ++t) {
    Spectrum noisy = clean;
    for (double& v : noisy.values) v = std::max(v + noise(rng), 0.0);
    FitResult fit = fit_bilorentzian(noisy, kDoublet);
    if (!fit.converged) continue;
    ++converged_count;
    hwhm_errors.push_back(std::abs(fit.model.hwhm1_MHz - 0.13) / 0.13);
    const double se = fit.param_stderr[4];
    if (std::isfinite(se) && std::abs(fit.model.hwhm1_MHz - 0.13) <= 2.0 * se)
      ++covered;
  }
  REQUIRE(converged_count >= trials * 9 / 10);
  std::sort(hwhm_errors.begin(), hwhm_errors.end());
  const double median = hwhm_errors[hwhm_errors.size() / 2];
  CHECK(median < 0.05);
  // 2-sigma intervals should cover the truth far more often than not.
  CHECK(covered >= converged_count / 2);
}

TEST_CASE("linewidth extraction from the fitted curve") {
  std::vector<double> g = make_grid(1447.5, 1452.5, 1001);
  Spectrum data = eval_bilorentzian(kDoublet, g);
  FitResult fit = fit_bilorentzian(data, kDoublet);
  REQUIRE(fit.converged);
  LinewidthSummary lw = extract_linewidths(fit, g);

  CHECK(lw.hwhm_low_component_MHz == fit.model.hwhm1_MHz);
  CHECK(rel_err(lw.hwhm_low_component_MHz, 0.13) < 1e-6);
  CHECK(lw.fwhm_MHz > 0.0);
  CHECK(lw.hwhm_low_MHz < lw.hwhm_high_MHz);  // broad wing sits high
  CHECK(lw.fwhm_MHz ==
        doctest::Approx(lw.hwhm_low_MHz + lw.hwhm_high_MHz).epsilon(1e-6));

  // A pure single Lorentzian measures its own width.
  BiLorentzianModel single{1.0, 0.0, 0.0, 3.0, 0.75, 1.0, 0.0};
  std::vector<double> g2 = make_grid(-6.0, 6.0, 1201);
  FitResult sf = fit_bilorentzian(eval_bilorentzian(single, g2), single);
  REQUIRE(sf.converged);
  LinewidthSummary lw2 = extract_linewidths(sf, g2);
  CHECK(std::abs(lw2.fwhm_MHz - 1.5) < 0.01);

  FitResult failed = fit;
  failed.converged = false;
  CHECK_THROWS_AS(extract_linewidths(failed, g), std::invalid_argument);
}

TEST_CASE("narrowed simulated line fits and measures consistently") {
  // Pipeline glue: simulate the above-threshold line, fit it, and compare
  // the extracted width with the closed-form value.
  const RateConstants rates{1.1e-7, 4.0e4, 2.1e6};
  LorentzianProfile above{6e12, 1450.0, 4.0};
  Spectrum mapped = map_to_photons(sample_profile(above, default_grid(1450.0)), rates);

  FitResult fit = fit_bilorentzian(mapped);
  REQUIRE(fit.converged);
  LinewidthSummary lw = extract_linewidths(fit, mapped.frequencies_MHz);
  const double closed = closed_form_fwhm(above, rates);
  CHECK(std::abs(lw.fwhm_MHz - closed) / closed < 0.02);
}

TEST_CASE("split-Lorentzian fit recovers asymmetric widths") {
  std::vector<double> g = make_grid(-6.0, 6.0, 801);
  SplitLorentzianModel truth{1.2, 0.3, 0.4, 1.6, 0.05};
  Spectrum data = eval_split_lorentzian(truth, g);
  SplitFitResult fit = fit_split_lorentzian(data, truth);
  REQUIRE(fit.converged);
  CHECK(rel_err(fit.model.amp, 1.2) < 1e-6);
  CHECK(rel_err(fit.model.hwhm_low_MHz, 0.4) < 1e-6);
  CHECK(rel_err(fit.model.hwhm_high_MHz, 1.6) < 1e-6);

  SplitFitResult auto_fit = fit_split_lorentzian(data);
  REQUIRE(auto_fit.converged);
  CHECK(rel_err(auto_fit.model.hwhm_low_MHz, 0.4) < 1e-3);
  CHECK(rel_err(auto_fit.model.hwhm_high_MHz, 1.6) < 1e-3);
}

TEST_CASE("fit input validation") {
  std::vector<double> g = make_grid(0.0, 1.0, 12);
  Spectrum log_scale = eval_bilorentzian(kDoublet, make_grid(1448.0, 1452.0, 20));
  log_scale.value_kind = ValueKind::log_amplitude_dB;
  CHECK_THROWS_AS(fit_bilorentzian(log_scale), std::invalid_argument);

  Spectrum tiny = eval_bilorentzian(kDoublet, make_grid(1448.0, 1452.0, 8));
  CHECK_THROWS_AS(fit_bilorentzian(tiny), std::invalid_argument);
}

TEST_CASE("log detector conversions") {
  const DetectorCalibration cal;  // 0.022 V/dB, no attenuation

  // One scale unit on the detector output is one dB of power.
  TimeTrace t;
  t.times_s = {0.0, 1.0};
  t.volts = {0.0, 0.022};
  TimeTrace lin = log_to_linear(t, cal);
  CHECK(rel_err(lin.volts[1] / lin.volts[0], 1.2589254117941672) < 1e-12);

  // External attenuation scales linear power by 10^(A/10).
  DetectorCalibration att{0.022, 35.0};
  TimeTrace lin_att = log_to_linear(t, att);
  CHECK(rel_err(lin_att.volts[0] / lin.volts[0], 3162.2776601683795) < 1e-12);

  // Spectrum overload: values are already dB.
  Spectrum s;
  s.frequencies_MHz = {1.0, 2.0, 3.0};
  s.values = {0.0, 1.0, 10.0};
  s.value_kind = ValueKind::log_amplitude_dB;
  Spectrum slin = log_to_linear(s, cal);
  CHECK(slin.value_kind == ValueKind::linear_amplitude);
  CHECK(slin.values[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(rel_err(slin.values[1], 1.2589254117941672) < 1e-12);
  CHECK(rel_err(slin.values[2], 10.0) < 1e-12);

  // Normalization rescales the peak to exactly 1.
  Spectrum norm = log_to_linear(s, cal, true);
  CHECK(*std::max_element(norm.values.begin(), norm.values.end()) == 1.0);

  // A zero-volt trace converts to unit linear power everywhere.
  TimeTrace zeros;
  zeros.times_s = {0.0, 1.0, 2.0};
  zeros.volts = {0.0, 0.0, 0.0};
  TimeTrace ones = log_to_linear(zeros, cal, true);
  CHECK(std::all_of(ones.volts.begin(), ones.volts.end(),
                    [](double v) { return v == 1.0; }));

  // Roundtrips are exact inverses.
  Spectrum back = linear_to_log(log_to_linear(s, att), att);
  for (std::size_t i = 0; i < s.values.size(); ++i)
    CHECK(back.values[i] == doctest::Approx(s.values[i]).epsilon(1e-12));
  TimeTrace tback = linear_to_log(log_to_linear(t, att), att);
  for (std::size_t i = 0; i < t.volts.size(); ++i)
    CHECK(std::abs(tback.volts[i] - t.volts[i]) < 1e-12);

  // Non-positive linear power has no dB representation.
  Spectrum neg = slin;
  neg.values[1] = 0.0;
  neg.value_kind = ValueKind::linear_amplitude;
  CHECK_THROWS_AS(linear_to_log(neg, cal), std::domain_error);

  CHECK_THROWS_AS(DetectorCalibration({0.0, 0.0}).validate(), std::invalid_argument);
  CHECK_THROWS_AS(DetectorCalibration({0.022, -1.0}).validate(), std::invalid_argument);
  // Linear input to log_to_linear is a tagging error.
  Spectrum lin_tagged = slin;
  CHECK_THROWS_AS(log_to_linear(lin_tagged, cal), std::invalid_argument);
}

TEST_CASE("background subtraction") {
  std::vector<double> g = make_grid(0.0, 10.0, 21);
  Spectrum signal;
  signal.frequencies_MHz = g;
  signal.value_kind = ValueKind::linear_amplitude;
  Spectrum bg = signal;
  for (double f : g) {
    signal.values.push_back(1.0 + 0.1 * f);
    bg.values.push_back(0.5 + 0.1 * f);
  }

  SubtractedSpectrum diff = subtract_background(signal, bg);
  CHECK(diff.clipped_points == 0);
  CHECK(std::all_of(diff.spectrum.values.begin(), diff.spectrum.values.end(),
                    [](double v) { return std::abs(v - 0.5) < 1e-12; }));

  // Equal inputs cancel exactly; nothing needs clipping.
  SubtractedSpectrum zero = subtract_background(signal, signal);
  CHECK(zero.clipped_points == 0);
  CHECK(std::all_of(zero.spectrum.values.begin(), zero.spectrum.values.end(),
                    [](double v) { return v == 0.0; }));

  // Background above the signal clips to zero and reports it.
  SubtractedSpectrum clipped = subtract_background(bg, signal);
  CHECK(clipped.clipped_points == bg.values.size());
  CHECK(std::all_of(clipped.spectrum.values.begin(), clipped.spectrum.values.end(),
                    [](double v) { return v == 0.0; }));

  Spectrum other = bg;
  other.frequencies_MHz[3] += 1e-4;
  CHECK_THROWS_AS(subtract_background(signal, other), std::invalid_argument);

  // Trace overload.
  TimeTrace ts, tb;
  ts.times_s = tb.times_s = {0.0, 1.0, 2.0};
  ts.volts = {1.0, 2.0, 0.5};
  tb.volts = {0.5, 2.5, 0.25};
  SubtractedTrace td = subtract_background(ts, tb);
  CHECK(td.clipped_points == 1);
  CHECK(td.trace.volts[0] == 0.5);
  CHECK(td.trace.volts[1] == 0.0);
  CHECK(td.trace.volts[2] == 0.25);
}
