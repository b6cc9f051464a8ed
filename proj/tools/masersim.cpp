// Command-line front end: one subcommand per pipeline stage, a shared
// config, and machine-readable JSON errors on stderr.
//
// Exit codes: 0 success, 2 validation (config, flags, domain constraints),
// 3 computation (integration/fit/numeric failures), 4 I/O (missing or
// malformed data files).

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "masersim/config.hpp"
#include "masersim/errors.hpp"
#include "masersim/json_writer.hpp"
#include "masersim/pipeline.hpp"
#include "masersim/version.hpp"

namespace {

int emit_error(const std::string& category, int code,
               const std::string& message,
               const std::vector<masersim::ValidationIssue>* issues = nullptr) {
  masersim::JsonValue err = masersim::JsonValue::object();
  err.set("category", category);
  err.set("exit_code", code);
  err.set("message", message);
  if (issues) {
    masersim::JsonValue list = masersim::JsonValue::array();
    for (const auto& issue : *issues) {
      masersim::JsonValue item = masersim::JsonValue::object();
      item.set("field", issue.field);
      item.set("message", issue.message);
      list.push(std::move(item));
    }
    err.set("issues", std::move(list));
  }
  masersim::JsonValue doc = masersim::JsonValue::object();
  doc.set("error", std::move(err));
  std::cerr << doc.dump() << "\n";
  return code;
}

std::optional<std::filesystem::path> path_opt(const CLI::Option* opt,
                                              const std::string& value) {
  if (opt->count() == 0) return std::nullopt;
  return std::filesystem::path(value);
}

std::optional<double> double_opt(const CLI::Option* opt, double value) {
  if (opt->count() == 0) return std::nullopt;
  return value;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Maser-enhanced ensemble spin sensing: simulation and "
               "analysis pipeline"};
  app.set_version_flag("--version", std::string(masersim::version));
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  std::string format = "csv";
  app.add_option("--config", config_path, "run configuration (TOML)")
      ->required();
  const CLI::Option* opt_out =
      app.add_option("--out", out_dir, "output directory (default: the "
                                       "config's [output] dir)");
  const CLI::Option* opt_seed =
      app.add_option("--seed", seed, "seed recorded in run summaries "
                                     "(default: the config's fit.seed)");
  app.add_option("--format", format,
                 "tabular artifact format: csv or json")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();

  CLI::App* cmd_threshold = app.add_subcommand(
      "threshold", "steady-state photon map, slopes, and masing threshold");

  CLI::App* cmd_dynamics = app.add_subcommand(
      "lv-dynamics", "integrate the coupled spin-photon rate equations");

  CLI::App* cmd_lineshape = app.add_subcommand(
      "lineshape-sim",
      "map an inhomogeneous profile through the steady-state photon "
      "response and measure the narrowing");
  double ov_n_max = 0.0, ov_fwhm = 0.0;
  const CLI::Option* opt_n_max = cmd_lineshape->add_option(
      "--n-max", ov_n_max, "override the above-threshold peak inversion");
  const CLI::Option* opt_fwhm = cmd_lineshape->add_option(
      "--fwhm-MHz", ov_fwhm, "override the intrinsic linewidth");

  CLI::App* cmd_hfi = app.add_subcommand(
      "hfi", "enumerate second-order hyperfine shifts and their density");

  CLI::App* cmd_fit = app.add_subcommand(
      "fit", "bi-Lorentzian (or split-Lorentzian) fit of a spectrum");
  std::string fit_input, fit_manifest;
  const CLI::Option* opt_fit_input = cmd_fit->add_option(
      "--input", fit_input, "spectrum CSV to fit");
  const CLI::Option* opt_fit_manifest = cmd_fit->add_option(
      "--manifest", fit_manifest,
      "dataset manifest providing spectrum (+ optional background)");

  CLI::App* cmd_sens = app.add_subcommand(
      "sensitivity", "field sensitivity eta = sigma_s/(m_s*sqrt(2*df))");
  double sens_sigma = 0.0, sens_slope = 0.0, sens_bw = 0.0;
  std::string sens_manifest;
  const CLI::Option* opt_sigma = cmd_sens->add_option(
      "--sigma-V", sens_sigma, "noise standard deviation (V)");
  const CLI::Option* opt_slope = cmd_sens->add_option(
      "--slope-V-per-T", sens_slope, "signal slope at the working point");
  const CLI::Option* opt_sens_bw = cmd_sens->add_option(
      "--bandwidth-Hz", sens_bw, "detection bandwidth delta_f");
  const CLI::Option* opt_sens_manifest = cmd_sens->add_option(
      "--manifest", sens_manifest,
      "dataset manifest providing trace and/or field_response");

  CLI::App* cmd_report = app.add_subcommand(
      "report", "chain fit + trace SNR + sensitivity over a manifest");
  std::string report_manifest;
  double report_bw = 0.0;
  cmd_report
      ->add_option("--manifest", report_manifest, "dataset manifest")
      ->required();
  const CLI::Option* opt_report_bw = cmd_report->add_option(
      "--bandwidth-Hz", report_bw, "detection bandwidth delta_f");

  for (CLI::App* sub : {cmd_threshold, cmd_dynamics, cmd_lineshape, cmd_hfi,
                        cmd_fit, cmd_sens, cmd_report})
    sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
    return emit_error("usage", 2, e.what());
  }

  masersim::RunContext ctx;
  try {
    ctx.config = masersim::parse_config(config_path);
  } catch (const masersim::ValidationError& e) {
    return emit_error("validation", 2, e.what(), &e.issues());
  } catch (const masersim::ParseError& e) {
    return emit_error("parse", 2, e.what());  // malformed config: still 2
  } catch (const masersim::IoError& e) {
    return emit_error("io", 4, e.what());
  }
  ctx.config_path = config_path;
  ctx.out_dir = opt_out->count() ? out_dir : ctx.config.output_dir;
  ctx.seed = opt_seed->count() ? seed : ctx.config.fit.seed;
  ctx.format = format == "json" ? masersim::OutputFormat::json
                                : masersim::OutputFormat::csv;
  ctx.overrides.n_max = double_opt(opt_n_max, ov_n_max);
  ctx.overrides.fwhm_MHz = double_opt(opt_fwhm, ov_fwhm);
  if (cmd_sens->parsed())
    ctx.overrides.bandwidth_Hz = double_opt(opt_sens_bw, sens_bw);
  if (cmd_report->parsed())
    ctx.overrides.bandwidth_Hz = double_opt(opt_report_bw, report_bw);

  try {
    masersim::RunArtifacts artifacts;
    if (cmd_threshold->parsed()) {
      artifacts = masersim::run_threshold(ctx);
    } else if (cmd_dynamics->parsed()) {
      artifacts = masersim::run_lv_dynamics(ctx);
    } else if (cmd_lineshape->parsed()) {
      artifacts = masersim::run_lineshape_sim(ctx);
    } else if (cmd_hfi->parsed()) {
      artifacts = masersim::run_hfi(ctx);
    } else if (cmd_fit->parsed()) {
      artifacts = masersim::run_fit(ctx, path_opt(opt_fit_input, fit_input),
                                    path_opt(opt_fit_manifest, fit_manifest));
    } else if (cmd_sens->parsed()) {
      artifacts = masersim::run_sensitivity(
          ctx, double_opt(opt_sigma, sens_sigma),
          double_opt(opt_slope, sens_slope),
          path_opt(opt_sens_manifest, sens_manifest));
    } else if (cmd_report->parsed()) {
      artifacts = masersim::run_report(ctx, report_manifest);
    }
    for (const auto& p : artifacts.files)
      std::cout << "wrote " << p.string() << "\n";
    return 0;
  } catch (const masersim::ValidationError& e) {
    return emit_error("validation", 2, e.what(), &e.issues());
  } catch (const masersim::IntegrationError& e) {
    return emit_error("computation", 3, e.what());
  } catch (const masersim::ComputationError& e) {
    return emit_error("computation", 3, e.what());
  } catch (const masersim::ParseError& e) {
    return emit_error("parse", 4, e.what());  // malformed dataset file
  } catch (const masersim::IoError& e) {
    return emit_error("io", 4, e.what());
  } catch (const std::domain_error& e) {
    return emit_error("computation", 3, e.what());
  } catch (const std::invalid_argument& e) {
    return emit_error("validation", 2, e.what());
  } catch (const std::exception& e) {
    return emit_error("computation", 3, e.what());
  }
}
