#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "masersim/config.hpp"

namespace masersim {

enum class OutputFormat { csv, json };

// Command-line overrides applied on top of the parsed config.
struct Overrides {
  std::optional<double> n_max;         // lineshape-sim: above-threshold peak
  std::optional<double> fwhm_MHz;      // lineshape-sim: intrinsic width
  std::optional<double> bandwidth_Hz;  // sensitivity/report: delta_f
};

struct RunContext {
  RunConfig config;
  std::filesystem::path config_path;
  std::filesystem::path out_dir;
  std::uint64_t seed = 0;
  OutputFormat format = OutputFormat::csv;
  Overrides overrides;
};

struct RunArtifacts {
  std::vector<std::filesystem::path> files;
};

// Each subcommand validates its inputs, computes, and writes its artifacts
// plus a run_summary.json (config hash, input checksums, version, seed,
// artifact list) into ctx.out_dir. Inputs are never modified. All writes
// are atomic, and no artifact carries a timestamp, so identical inputs
// produce byte-identical outputs.
RunArtifacts run_threshold(const RunContext& ctx);
RunArtifacts run_lv_dynamics(const RunContext& ctx);
RunArtifacts run_lineshape_sim(const RunContext& ctx);
RunArtifacts run_hfi(const RunContext& ctx);
RunArtifacts run_fit(const RunContext& ctx,
                     const std::optional<std::filesystem::path>& input_csv,
                     const std::optional<std::filesystem::path>& manifest_path);
RunArtifacts run_sensitivity(
    const RunContext& ctx, std::optional<double> sigma_V,
    std::optional<double> slope_V_per_T,
    const std::optional<std::filesystem::path>& manifest_path);
RunArtifacts run_report(const RunContext& ctx,
                        const std::filesystem::path& manifest_path);

}  // namespace masersim
