#include "masersim/pipeline.hpp"

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "masersim/csv.hpp"
#include "masersim/errors.hpp"
#include "masersim/fitting.hpp"
#include "masersim/hyperfine.hpp"
#include "masersim/json_writer.hpp"
#include "masersim/lineshape.hpp"
#include "masersim/magnetometry.hpp"
#include "masersim/rate_equations.hpp"
#include "masersim/version.hpp"

namespace masersim {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void ensure_out_dir(const RunContext& ctx) {
  std::error_code ec;
  std::filesystem::create_directories(ctx.out_dir, ec);
  if (ec)
    throw IoError("cannot create output directory " + ctx.out_dir.string() +
                  ": " + ec.message());
}

std::string config_hash(const RunContext& ctx) {
  if (ctx.config_path.empty()) return checksum_hex(fnv1a64(""));
  return checksum_hex(checksum_file(ctx.config_path));
}

// A named column of a tabular artifact. All columns of one table share a
// length.
struct Column {
  std::string name;
  std::span<const double> values;
};

// Writes a table as CSV (header row + %.17g rows) or as a JSON object of
// per-column arrays, honouring ctx.format. Returns the path written.
std::filesystem::path write_table(const RunContext& ctx,
                                  const std::string& stem,
                                  std::span<const Column> columns) {
  if (ctx.format == OutputFormat::json) {
    JsonValue obj = JsonValue::object();
    for (const auto& col : columns) obj.set(col.name, JsonValue(col.values));
    const std::filesystem::path path = ctx.out_dir / (stem + ".json");
    atomic_write_text(path, obj.dump());
    return path;
  }
  std::string out;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (c) out += ',';
    out += columns[c].name;
  }
  out += '\n';
  const std::size_t rows = columns.empty() ? 0 : columns[0].values.size();
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      if (c) out += ',';
      out += format_double(columns[c].values[i]);
    }
    out += '\n';
  }
  const std::filesystem::path path = ctx.out_dir / (stem + ".csv");
  atomic_write_text(path, out);
  return path;
}

std::filesystem::path write_spectrum(const RunContext& ctx,
                                     const std::string& stem,
                                     const Spectrum& spectrum) {
  if (ctx.format == OutputFormat::json) {
    JsonValue obj = JsonValue::object();
    obj.set("value_kind", std::string(to_string(spectrum.value_kind)));
    obj.set("frequency_MHz", JsonValue(std::span<const double>(
                                 spectrum.frequencies_MHz)));
    obj.set("value", JsonValue(std::span<const double>(spectrum.values)));
    const std::filesystem::path path = ctx.out_dir / (stem + ".json");
    atomic_write_text(path, obj.dump());
    return path;
  }
  const std::filesystem::path path = ctx.out_dir / (stem + ".csv");
  write_spectrum_csv(path, spectrum);
  return path;
}

std::filesystem::path write_json(const RunContext& ctx,
                                 const std::string& name,
                                 const JsonValue& doc) {
  const std::filesystem::path path = ctx.out_dir / name;
  atomic_write_text(path, doc.dump());
  return path;
}

// run_summary.json ties every artifact set to its inputs: config hash,
// input checksums, library version, seed, and the artifact list. No
// timestamps — identical inputs must produce byte-identical output.
void write_summary(
    const RunContext& ctx, const std::string& subcommand,
    RunArtifacts& artifacts,
    const std::vector<std::pair<std::string, std::uint64_t>>& inputs = {}) {
  JsonValue doc = JsonValue::object();
  doc.set("subcommand", subcommand);
  doc.set("version", std::string(version));
  doc.set("seed", ctx.seed);
  doc.set("config_checksum_fnv1a64", config_hash(ctx));
  JsonValue in = JsonValue::object();
  for (const auto& [role, sum] : inputs) in.set(role, checksum_hex(sum));
  doc.set("input_checksums_fnv1a64", std::move(in));
  JsonValue files = JsonValue::array();
  for (const auto& p : artifacts.files)
    files.push(p.filename().string());
  doc.set("artifacts", std::move(files));
  artifacts.files.push_back(write_json(ctx, "run_summary.json", doc));
}

JsonValue rates_json(const RateConstants& r) {
  JsonValue v = JsonValue::object();
  v.set("einstein_B_per_s", r.einstein_B);
  v.set("gamma_s_per_s", r.gamma_s);
  v.set("kappa_c_per_s", r.kappa_c);
  return v;
}

std::vector<double> build_grid(const LineshapeConfig& ls) {
  const std::size_t n = ls.grid_points;
  const double center = ls.below.center_MHz;
  const double step = 2.0 * ls.grid_half_span_MHz / static_cast<double>(n - 1);
  std::vector<double> grid(n);
  for (std::size_t i = 0; i < n; ++i)
    grid[i] = center + (static_cast<double>(i) -
                        static_cast<double>(n - 1) / 2.0) *
                           step;
  return grid;
}

JsonValue exp_fit_json(const ExpFitResult& fit) {
  JsonValue v = JsonValue::object();
  v.set("converged", fit.converged);
  v.set("degenerate", fit.degenerate);
  v.set("iterations", fit.iterations);
  v.set("rss", fit.rss);
  JsonValue params = JsonValue::object();
  params.set("a_V", fit.model.a);
  params.set("b_V", fit.model.b);
  params.set("c_per_T", fit.model.c);
  v.set("params", std::move(params));
  JsonValue err = JsonValue::object();
  err.set("a_V", fit.param_stderr[0]);
  err.set("b_V", fit.param_stderr[1]);
  err.set("c_per_T", fit.param_stderr[2]);
  v.set("param_stderr", std::move(err));
  return v;
}

JsonValue bilorentzian_json(const FitResult& fit) {
  JsonValue v = JsonValue::object();
  v.set("model_variant", "sum");
  v.set("converged", fit.converged);
  v.set("degenerate", fit.degenerate);
  v.set("iterations", fit.iterations);
  v.set("rss", fit.rss);
  static constexpr const char* names[7] = {
      "amp1",        "amp2",        "center1_MHz", "center2_MHz",
      "hwhm1_MHz",   "hwhm2_MHz",   "baseline"};
  const double values[7] = {fit.model.amp1,        fit.model.amp2,
                            fit.model.center1_MHz, fit.model.center2_MHz,
                            fit.model.hwhm1_MHz,   fit.model.hwhm2_MHz,
                            fit.model.baseline};
  JsonValue params = JsonValue::object();
  JsonValue err = JsonValue::object();
  for (int i = 0; i < 7; ++i) {
    params.set(names[i], values[i]);
    err.set(names[i], fit.param_stderr[static_cast<std::size_t>(i)]);
  }
  v.set("params", std::move(params));
  v.set("param_stderr", std::move(err));
  return v;
}

JsonValue split_json(const SplitFitResult& fit) {
  JsonValue v = JsonValue::object();
  v.set("model_variant", "split");
  v.set("converged", fit.converged);
  v.set("degenerate", fit.degenerate);
  v.set("iterations", fit.iterations);
  v.set("rss", fit.rss);
  static constexpr const char* names[5] = {"amp", "center_MHz", "hwhm_low_MHz",
                                           "hwhm_high_MHz", "baseline"};
  const double values[5] = {fit.model.amp, fit.model.center_MHz,
                            fit.model.hwhm_low_MHz, fit.model.hwhm_high_MHz,
                            fit.model.baseline};
  JsonValue params = JsonValue::object();
  JsonValue err = JsonValue::object();
  for (int i = 0; i < 5; ++i) {
    params.set(names[i], values[i]);
    err.set(names[i], fit.param_stderr[static_cast<std::size_t>(i)]);
  }
  v.set("params", std::move(params));
  v.set("param_stderr", std::move(err));
  return v;
}

JsonValue linewidths_json(const LinewidthSummary& lw) {
  JsonValue v = JsonValue::object();
  v.set("fwhm_MHz", lw.fwhm_MHz);
  v.set("hwhm_low_MHz", lw.hwhm_low_MHz);
  v.set("hwhm_high_MHz", lw.hwhm_high_MHz);
  v.set("hwhm_low_component_MHz", lw.hwhm_low_component_MHz);
  return v;
}

// Shared by fit and report: load the manifest spectrum, linearize log
// data, subtract an optional background (also linearized when needed).
struct PreparedSpectrum {
  Spectrum spectrum;
  bool background_subtracted = false;
  std::size_t clipped_points = 0;
  bool linearized = false;
};

PreparedSpectrum prepare_spectrum(const RunContext& ctx, const Spectrum& raw,
                                  const Spectrum* background) {
  PreparedSpectrum out;
  out.spectrum = raw;
  if (out.spectrum.value_kind == ValueKind::log_amplitude_dB) {
    out.spectrum = log_to_linear(out.spectrum, ctx.config.detector);
    out.linearized = true;
  }
  if (background) {
    Spectrum bg = *background;
    if (bg.value_kind == ValueKind::log_amplitude_dB)
      bg = log_to_linear(bg, ctx.config.detector);
    SubtractedSpectrum sub = subtract_background(out.spectrum, bg);
    out.spectrum = std::move(sub.spectrum);
    out.background_subtracted = true;
    out.clipped_points = sub.clipped_points;
  }
  return out;
}

// Fit block shared by `fit` and `report`. Writes fit_curve and returns the
// JSON fragment; flags whether the optimizer converged.
struct FitOutcome {
  JsonValue doc = JsonValue::object();
  bool converged = false;
  int iterations = 0;
};

FitOutcome fit_block(const RunContext& ctx, const PreparedSpectrum& prepared,
                     RunArtifacts& artifacts) {
  FitOutcome out;
  const Spectrum& spec = prepared.spectrum;
  Spectrum curve;
  if (ctx.config.fit.model_variant == "split") {
    const SplitFitResult fit =
        fit_split_lorentzian(spec, std::nullopt, ctx.config.fit.options);
    out.doc = split_json(fit);
    out.converged = fit.converged;
    out.iterations = fit.iterations;
    curve = eval_split_lorentzian(fit.model, spec.frequencies_MHz);
  } else {
    const FitResult fit =
        fit_bilorentzian(spec, std::nullopt, ctx.config.fit.options);
    out.doc = bilorentzian_json(fit);
    out.converged = fit.converged;
    out.iterations = fit.iterations;
    if (fit.converged)
      out.doc.set("linewidths",
                  linewidths_json(
                      extract_linewidths(fit, spec.frequencies_MHz)));
    curve = eval_bilorentzian(fit.model, spec.frequencies_MHz);
  }
  out.doc.set("background_subtracted", prepared.background_subtracted);
  out.doc.set("clipped_points", prepared.clipped_points);
  out.doc.set("linearized_from_dB", prepared.linearized);

  std::vector<double> residual(spec.values.size());
  for (std::size_t i = 0; i < residual.size(); ++i)
    residual[i] = spec.values[i] - curve.values[i];
  const Column cols[] = {
      {"frequency_MHz", spec.frequencies_MHz},
      {"data", spec.values},
      {"fit", curve.values},
      {"residual", residual},
  };
  artifacts.files.push_back(write_table(ctx, "fit_curve", cols));
  return out;
}

TimeWindow resolve_noise_window(const RunContext& ctx, const TimeTrace& trace,
                                std::vector<ValidationIssue>& issues) {
  if (ctx.config.magnetometry.noise_window)
    return *ctx.config.magnetometry.noise_window;
  // Default: the pre-trigger span (t < 0).
  if (trace.times_s.front() < 0.0) return {trace.times_s.front(), 0.0};
  issues.push_back({"magnetometry.noise_window_t_min_s",
                    "trace has no pre-trigger samples; give an explicit "
                    "noise window"});
  return {0.0, 0.0};
}

}  // namespace

RunArtifacts run_threshold(const RunContext& ctx) {
  const RateConstants& rates = ctx.config.rates;
  rates.validate();
  ensure_out_dir(ctx);
  RunArtifacts artifacts;

  const double n_th = threshold_inversion(rates);
  const double n_below = ctx.config.lineshape.below.n_max;
  const double n_above = ctx.config.lineshape.above.n_max;

  JsonValue doc = JsonValue::object();
  doc.set("rates", rates_json(rates));
  doc.set("threshold_inversion", n_th);
  doc.set("slope_at_zero", steady_state_slope(rates, 0.0));
  JsonValue probes = JsonValue::array();
  for (double n_max : {n_below, n_above}) {
    JsonValue p = JsonValue::object();
    p.set("inverted_spins", n_max);
    p.set("photons", steady_state_photons(rates, n_max));
    p.set("slope", steady_state_slope(rates, n_max));
    probes.push(std::move(p));
  }
  doc.set("probes", std::move(probes));
  doc.set("slope_ratio",
          steady_state_slope(rates, n_above) /
              steady_state_slope(rates, n_below));
  doc.set("photon_ratio", steady_state_photons(rates, n_above) /
                              steady_state_photons(rates, n_below));
  artifacts.files.push_back(write_json(ctx, "threshold.json", doc));

  // Plot-ready sweep of the steady-state map up to 98% of threshold.
  constexpr std::size_t kSweepPoints = 201;
  std::vector<double> ns(kSweepPoints), photons(kSweepPoints),
      slopes(kSweepPoints);
  for (std::size_t i = 0; i < kSweepPoints; ++i) {
    ns[i] = 0.98 * n_th * static_cast<double>(i) /
            static_cast<double>(kSweepPoints - 1);
    photons[i] = steady_state_photons(rates, ns[i]);
    slopes[i] = steady_state_slope(rates, ns[i]);
  }
  const Column cols[] = {
      {"inverted_spins", ns}, {"photons", photons}, {"slope", slopes}};
  artifacts.files.push_back(write_table(ctx, "steady_state", cols));

  write_summary(ctx, "threshold", artifacts);
  return artifacts;
}

RunArtifacts run_lv_dynamics(const RunContext& ctx) {
  if (!ctx.config.dynamics)
    throw ValidationError(std::vector<ValidationIssue>{{"dynamics",
                            "section is required for the lv-dynamics "
                            "subcommand (initial populations and t_end_s)"}});
  ctx.config.rates.validate();
  const DynamicsConfig& dyn = *ctx.config.dynamics;
  ensure_out_dir(ctx);
  RunArtifacts artifacts;

  const LVTrajectory traj = integrate_lv(ctx.config.rates, dyn.initial,
                                         dyn.t_end_s, dyn.rel_tol, dyn.abs_tol);
  const PhotonPeak peak = peak_photons(traj);

  const std::size_t n = traj.times_s.size();
  std::vector<double> spins(n), photons(n), steps(n);
  steps[0] = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    spins[i] = traj.states[i].inverted_spins;
    photons[i] = traj.states[i].photons;
    if (i) steps[i] = traj.step_sizes_s[i - 1];
  }
  const Column cols[] = {{"time_s", traj.times_s},
                         {"inverted_spins", spins},
                         {"photons", photons},
                         {"step_size_s", steps}};
  artifacts.files.push_back(write_table(ctx, "trajectory", cols));

  JsonValue doc = JsonValue::object();
  doc.set("rates", rates_json(ctx.config.rates));
  JsonValue initial = JsonValue::object();
  initial.set("inverted_spins", dyn.initial.inverted_spins);
  initial.set("photons", dyn.initial.photons);
  doc.set("initial", std::move(initial));
  doc.set("t_end_s", dyn.t_end_s);
  doc.set("rel_tol", dyn.rel_tol);
  doc.set("abs_tol", dyn.abs_tol);
  doc.set("accepted_steps", n - 1);
  JsonValue final_state = JsonValue::object();
  final_state.set("time_s", traj.times_s.back());
  final_state.set("inverted_spins", spins.back());
  final_state.set("photons", photons.back());
  doc.set("final", std::move(final_state));
  JsonValue pk = JsonValue::object();
  pk.set("time_s", peak.t_peak_s);
  pk.set("photons", peak.n_peak);
  doc.set("photon_peak", std::move(pk));
  // N + 2n can only shrink along a trajectory; both ends are recorded so
  // readers can check without reloading the table.
  doc.set("excitation_initial",
          dyn.initial.inverted_spins + 2.0 * dyn.initial.photons);
  doc.set("excitation_final", spins.back() + 2.0 * photons.back());
  artifacts.files.push_back(write_json(ctx, "lv_summary.json", doc));

  write_summary(ctx, "lv-dynamics", artifacts);
  return artifacts;
}

RunArtifacts run_lineshape_sim(const RunContext& ctx) {
  LineshapeConfig ls = ctx.config.lineshape;
  if (ctx.overrides.n_max) ls.above.n_max = *ctx.overrides.n_max;
  if (ctx.overrides.fwhm_MHz) {
    ls.below.fwhm_MHz = *ctx.overrides.fwhm_MHz;
    ls.above.fwhm_MHz = *ctx.overrides.fwhm_MHz;
  }
  ctx.config.rates.validate();
  ls.below.validate();
  ls.above.validate();
  ensure_out_dir(ctx);
  RunArtifacts artifacts;

  const std::vector<double> grid = build_grid(ls);
  const NarrowingReport report =
      narrowing_report(ls.below, ls.above, ctx.config.rates, grid);

  const Spectrum photons_below =
      map_to_photons(sample_profile(ls.below, grid), ctx.config.rates);
  const Spectrum photons_above =
      map_to_photons(sample_profile(ls.above, grid), ctx.config.rates);
  artifacts.files.push_back(write_spectrum(ctx, "photons_below", photons_below));
  artifacts.files.push_back(write_spectrum(ctx, "photons_above", photons_above));

  JsonValue doc = JsonValue::object();
  doc.set("rates", rates_json(ctx.config.rates));
  doc.set("center_MHz", ls.below.center_MHz);
  doc.set("intrinsic_fwhm_MHz", ls.below.fwhm_MHz);
  doc.set("n_max_below", ls.below.n_max);
  doc.set("n_max_above", ls.above.n_max);
  JsonValue grid_info = JsonValue::object();
  grid_info.set("points", grid.size());
  grid_info.set("step_MHz", (grid.back() - grid.front()) /
                                static_cast<double>(grid.size() - 1));
  doc.set("grid", std::move(grid_info));
  doc.set("fwhm_below_MHz", report.fwhm_in_MHz);
  doc.set("fwhm_above_MHz", report.fwhm_out_MHz);
  doc.set("hwhm_low_below_MHz", report.hwhm_low_in_MHz);
  doc.set("hwhm_low_above_MHz", report.hwhm_low_out_MHz);
  doc.set("closed_form_fwhm_below_MHz",
          closed_form_fwhm(ls.below, ctx.config.rates));
  doc.set("closed_form_fwhm_above_MHz",
          closed_form_fwhm(ls.above, ctx.config.rates));
  doc.set("amplitude_ratio", report.amplitude_ratio);
  doc.set("peak_gain_ratio", report.peak_gain_ratio);
  artifacts.files.push_back(write_json(ctx, "narrowing.json", doc));

  write_summary(ctx, "lineshape-sim", artifacts);
  return artifacts;
}

RunArtifacts run_hfi(const RunContext& ctx) {
  if (!ctx.config.hfi)
    throw ValidationError(std::vector<ValidationIssue>{{"hfi.rho",
          "proton densities are mandatory for the hfi subcommand: add an "
          "[hfi] section with rho = [...]"}});
  const HfiConfig& cfg = *ctx.config.hfi;
  cfg.protons.validate();
  ensure_out_dir(ctx);
  RunArtifacts artifacts;

  const ShiftDistribution dist = enumerate_shifts(cfg.protons);
  const Spectrum hist = histogram(dist, cfg.histogram_bins);
  const KdeCurve curve = kde(dist, cfg.kde_bandwidth_MHz, cfg.kde_points);

  {
    const Column cols[] = {{"grid_MHz", curve.grid_MHz},
                           {"density_per_MHz", curve.density}};
    artifacts.files.push_back(write_table(ctx, "hfi_kde", cols));
  }
  {
    const Column cols[] = {{"shift_MHz", hist.frequencies_MHz},
                           {"count", hist.values}};
    artifacts.files.push_back(write_table(ctx, "hfi_histogram", cols));
  }
  // The raw enumeration doubles as the KDE rug. Beyond 2^16 entries the
  // table stops being a plotting aid, so it is summarized instead.
  const bool emit_shifts = dist.shifts_MHz.size() <= (1u << 16);
  if (emit_shifts) {
    const Column cols[] = {{"shift_MHz", dist.shifts_MHz}};
    artifacts.files.push_back(write_table(ctx, "hfi_shifts", cols));
  }

  double max_shift = 0.0, mean_shift = 0.0;
  for (double s : dist.shifts_MHz) {
    max_shift = std::max(max_shift, s);
    mean_shift += s;
  }
  mean_shift /= static_cast<double>(dist.shifts_MHz.size());

  JsonValue doc = JsonValue::object();
  doc.set("sites", cfg.protons.size());
  doc.set("configurations", dist.shifts_MHz.size());
  doc.set("e_x_minus_e_y_MHz", cfg.protons.e_x_minus_e_y_MHz);
  doc.set("max_shift_MHz", max_shift);
  doc.set("max_shift_bound_MHz", max_shift_bound(cfg.protons));
  doc.set("mean_shift_MHz", mean_shift);
  doc.set("kde_bandwidth_MHz", curve.bandwidth_MHz);
  doc.set("shifts_table_written", emit_shifts);
  artifacts.files.push_back(write_json(ctx, "hfi_summary.json", doc));

  write_summary(ctx, "hfi", artifacts);
  return artifacts;
}

RunArtifacts run_fit(const RunContext& ctx,
                     const std::optional<std::filesystem::path>& input_csv,
                     const std::optional<std::filesystem::path>& manifest_path) {
  std::vector<std::pair<std::string, std::uint64_t>> inputs;
  Spectrum raw;
  std::optional<Spectrum> background;

  if (input_csv) {
    raw = load_spectrum_csv(*input_csv);
    inputs.emplace_back("spectrum", checksum_file(*input_csv));
  } else if (manifest_path) {
    const DatasetManifest manifest = load_manifest(*manifest_path);
    const ManifestEntry* spec_entry = manifest.find("spectrum");
    if (!spec_entry)
      throw ValidationError(std::vector<ValidationIssue>{{"inputs.spectrum", "manifest lacks a spectrum entry"}});
    raw = load_spectrum_csv(spec_entry->path);
    inputs.emplace_back("spectrum", spec_entry->checksum);
    if (const ManifestEntry* bg = manifest.find("background")) {
      background = load_spectrum_csv(bg->path);
      inputs.emplace_back("background", bg->checksum);
    }
  } else {
    throw ValidationError(std::vector<ValidationIssue>{{"fit.input",
          "provide --input spectrum.csv or --manifest with a spectrum "
          "role"}});
  }

  ensure_out_dir(ctx);
  RunArtifacts artifacts;
  const PreparedSpectrum prepared =
      prepare_spectrum(ctx, raw, background ? &*background : nullptr);
  const FitOutcome outcome = fit_block(ctx, prepared, artifacts);

  JsonValue doc = outcome.doc;  // fit_block builds the full fragment
  artifacts.files.push_back(write_json(ctx, "fit.json", doc));
  write_summary(ctx, "fit", artifacts, inputs);

  // Artifacts land on disk either way; a fit that never converged is still
  // a computation failure for the caller.
  if (!outcome.converged)
    throw ComputationError(
        "fit did not converge after " + std::to_string(outcome.iterations) +
        " iterations (artifacts written with converged=false)");
  return artifacts;
}

RunArtifacts run_sensitivity(
    const RunContext& ctx, std::optional<double> sigma_V,
    std::optional<double> slope_V_per_T,
    const std::optional<std::filesystem::path>& manifest_path) {
  std::vector<std::pair<std::string, std::uint64_t>> inputs;
  std::vector<ValidationIssue> issues;

  std::optional<DatasetManifest> manifest;
  if (manifest_path) manifest = load_manifest(*manifest_path);

  double delta_f = ctx.overrides.bandwidth_Hz.value_or(
      ctx.config.magnetometry.delta_f_Hz.value_or(kNaN));
  if (!(delta_f > 0.0))
    issues.push_back({"magnetometry.delta_f_Hz",
                      "required: set it in the config or pass "
                      "--bandwidth-Hz"});

  std::string sigma_source = "flag";
  std::optional<TimeTrace> trace;
  if (!sigma_V) {
    const ManifestEntry* entry =
        manifest ? manifest->find("trace") : nullptr;
    if (entry) {
      trace = load_trace_csv(entry->path);
      inputs.emplace_back("trace", entry->checksum);
      const TimeWindow window = resolve_noise_window(ctx, *trace, issues);
      if (issues.empty()) sigma_V = noise_sigma(*trace, window);
      sigma_source = "trace";
    } else {
      issues.push_back({"sensitivity.sigma",
                        "provide --sigma-V or a manifest with a trace role"});
    }
  }

  std::string slope_source = "flag";
  std::optional<ExpFitResult> exp_fit;
  double b0 = ctx.config.magnetometry.b0_T.value_or(kNaN);
  if (!slope_V_per_T) {
    const ManifestEntry* entry =
        manifest ? manifest->find("field_response") : nullptr;
    if (entry) {
      const FieldResponse response = load_field_response_csv(entry->path);
      inputs.emplace_back("field_response", entry->checksum);
      if (!std::isfinite(b0) && trace && trace->b0_T) b0 = *trace->b0_T;
      if (!std::isfinite(b0)) {
        issues.push_back({"magnetometry.b0_T",
                          "required to evaluate the tangent slope of the "
                          "fitted field response"});
      } else {
        exp_fit = fit_field_response(response, std::nullopt,
                                     ctx.config.fit.options);
        if (!exp_fit->converged)
          throw ComputationError("field-response fit did not converge");
        slope_V_per_T = slope_at(exp_fit->model, b0);
        slope_source = "field_response_fit";
      }
    } else {
      issues.push_back(
          {"sensitivity.slope",
           "provide --slope-V-per-T or a manifest with a field_response "
           "role"});
    }
  }

  if (!issues.empty()) throw ValidationError(std::move(issues));

  const SensitivityReport report = sensitivity_report(
      *sigma_V, *slope_V_per_T, delta_f, std::isfinite(b0) ? b0 : kNaN);

  ensure_out_dir(ctx);
  RunArtifacts artifacts;
  JsonValue doc = JsonValue::object();
  doc.set("sigma_s_V", report.sigma_s_V);
  doc.set("m_s_V_per_T", report.m_s_V_per_T);
  doc.set("delta_f_Hz", report.delta_f_Hz);
  doc.set("eta_T_per_sqrt_Hz", report.eta_T_per_sqrt_Hz);
  doc.set("eta_pT_per_sqrt_Hz", report.eta_T_per_sqrt_Hz * 1e12);
  doc.set("b0_T", report.b0_T);
  JsonValue sources = JsonValue::object();
  sources.set("sigma", sigma_source);
  sources.set("slope", slope_source);
  doc.set("sources", std::move(sources));
  if (exp_fit) doc.set("field_response_fit", exp_fit_json(*exp_fit));
  artifacts.files.push_back(write_json(ctx, "sensitivity.json", doc));

  write_summary(ctx, "sensitivity", artifacts, inputs);
  return artifacts;
}

RunArtifacts run_report(const RunContext& ctx,
                        const std::filesystem::path& manifest_path) {
  const DatasetManifest manifest = load_manifest(manifest_path);
  std::vector<std::pair<std::string, std::uint64_t>> inputs;
  for (const auto& entry : manifest.entries)
    inputs.emplace_back(entry.role, entry.checksum);

  // Load and validate every input before the first write, so a rejected
  // manifest never leaves partial artifacts behind.
  std::vector<ValidationIssue> issues;
  std::optional<Spectrum> raw, background;
  if (const ManifestEntry* entry = manifest.find("spectrum")) {
    raw = load_spectrum_csv(entry->path);
    if (const ManifestEntry* bg = manifest.find("background"))
      background = load_spectrum_csv(bg->path);
  }
  std::optional<TimeTrace> trace;
  std::optional<TimeWindow> window;
  if (const ManifestEntry* entry = manifest.find("trace")) {
    trace = load_trace_csv(entry->path);
    window = resolve_noise_window(ctx, *trace, issues);
  }
  std::optional<FieldResponse> response;
  if (const ManifestEntry* entry = manifest.find("field_response"))
    response = load_field_response_csv(entry->path);
  if (!issues.empty()) throw ValidationError(std::move(issues));

  ensure_out_dir(ctx);
  RunArtifacts artifacts;
  JsonValue doc = JsonValue::object();

  // Spectral fit block. A non-converged fit is reported as such rather
  // than aborting: the remaining blocks may still be computable.
  if (raw) {
    const PreparedSpectrum prepared =
        prepare_spectrum(ctx, *raw, background ? &*background : nullptr);
    doc.set("fit", fit_block(ctx, prepared, artifacts).doc);
  }

  // Trace block: peak, noise, SNR.
  std::optional<double> sigma;
  double b0 = ctx.config.magnetometry.b0_T.value_or(kNaN);
  if (trace) {
    sigma = noise_sigma(*trace, *window);
    const double peak = peak_amplitude(*trace);
    JsonValue tr = JsonValue::object();
    tr.set("peak_V", peak);
    tr.set("noise_sigma_V", *sigma);
    tr.set("snr_dB", 20.0 * std::log10(peak / *sigma));
    if (trace->b0_T) tr.set("b0_T", *trace->b0_T);
    if (trace->probe_freq_MHz)
      tr.set("probe_freq_MHz", *trace->probe_freq_MHz);
    doc.set("trace", std::move(tr));
    if (!std::isfinite(b0) && trace->b0_T) b0 = *trace->b0_T;
  }

  // Field-response block: exponential fit and tangent slope.
  std::optional<double> slope;
  if (response) {
    const ExpFitResult fit =
        fit_field_response(*response, std::nullopt, ctx.config.fit.options);
    JsonValue fr = exp_fit_json(fit);
    if (fit.converged && std::isfinite(b0)) {
      slope = slope_at(fit.model, b0);
      fr.set("b0_T", b0);
      fr.set("slope_at_b0_V_per_T", *slope);
    }
    doc.set("field_response_fit", std::move(fr));
  }

  // Sensitivity block, when every ingredient resolved.
  const double delta_f = ctx.overrides.bandwidth_Hz.value_or(
      ctx.config.magnetometry.delta_f_Hz.value_or(kNaN));
  if (sigma && slope && delta_f > 0.0) {
    const SensitivityReport report =
        sensitivity_report(*sigma, *slope, delta_f, b0);
    JsonValue sens = JsonValue::object();
    sens.set("sigma_s_V", report.sigma_s_V);
    sens.set("m_s_V_per_T", report.m_s_V_per_T);
    sens.set("delta_f_Hz", report.delta_f_Hz);
    sens.set("eta_T_per_sqrt_Hz", report.eta_T_per_sqrt_Hz);
    sens.set("eta_pT_per_sqrt_Hz", report.eta_T_per_sqrt_Hz * 1e12);
    sens.set("b0_T", report.b0_T);
    doc.set("sensitivity", std::move(sens));
  }

  artifacts.files.push_back(write_json(ctx, "report.json", doc));
  write_summary(ctx, "report", artifacts, inputs);
  return artifacts;
}

}  // namespace masersim
