#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "masersim/fitting.hpp"
#include "masersim/hyperfine.hpp"
#include "masersim/least_squares.hpp"
#include "masersim/lineshape.hpp"
#include "masersim/magnetometry.hpp"
#include "masersim/rate_equations.hpp"

namespace masersim {

// Simulation scenarios share one center and intrinsic width; only the peak
// inversion differs between the below- and above-threshold profiles.
struct LineshapeConfig {
  LorentzianProfile below;
  LorentzianProfile above;
  double grid_half_span_MHz = 8.0;
  std::size_t grid_points = 1601;
};

struct HfiConfig {
  ProtonSet protons;
  std::optional<double> kde_bandwidth_MHz;  // Silverman when absent
  std::size_t kde_points = 1001;
  std::size_t histogram_bins = 1000;
};

struct DynamicsConfig {
  LVState initial;
  double t_end_s;
  double rel_tol = 1e-8;
  double abs_tol = 1e-3;
};

struct FitConfig {
  std::string model_variant = "sum";  // "sum" or "split"
  LMOptions options;
  std::uint64_t seed = 0;
};

struct MagnetometryConfig {
  std::optional<TimeWindow> noise_window;  // default: pre-trigger, t < 0
  std::optional<double> delta_f_Hz;
  std::optional<double> b0_T;
};

// Fully validated run configuration. Sections absent from the file keep
// their defaults; [hfi] and [dynamics] stay unset until their subcommands
// need them.
struct RunConfig {
  RateConstants rates;
  LineshapeConfig lineshape;
  std::optional<HfiConfig> hfi;
  std::optional<DynamicsConfig> dynamics;
  FitConfig fit;
  DetectorCalibration detector;
  MagnetometryConfig magnetometry;
  std::string output_dir = "out";
};

// Parses the documented TOML-style key-value format. Syntax problems raise
// ParseError with a line number; semantic problems raise ValidationError
// listing every offending field path, not just the first.
RunConfig parse_config(const std::filesystem::path& path);

struct ManifestEntry {
  std::string role;  // spectrum | background | trace | field_response
  std::filesystem::path path;
  std::uint64_t checksum;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;

  const ManifestEntry* find(std::string_view role) const;
};

// Loads an [inputs] role = "path" manifest; relative paths resolve against
// the manifest's directory. Every referenced file must exist; checksums
// are computed at load time and echoed into run summaries.
DatasetManifest load_manifest(const std::filesystem::path& path);

}  // namespace masersim
