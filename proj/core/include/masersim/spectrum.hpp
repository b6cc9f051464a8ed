#pragma once

#include <string_view>
#include <vector>

namespace masersim {

enum class ValueKind { photon_count, linear_amplitude, log_amplitude_dB };

std::string_view to_string(ValueKind kind);
ValueKind value_kind_from_string(std::string_view name);

// Sampled spectrum on a strictly increasing, uniform frequency grid.
// photon_count and linear_amplitude values must be non-negative;
// log_amplitude_dB values may take any sign.
struct Spectrum {
  std::vector<double> frequencies_MHz;
  std::vector<double> values;
  ValueKind value_kind = ValueKind::photon_count;

  // Mean grid spacing; requires at least 2 points.
  double grid_step_MHz() const;

  // Throws std::invalid_argument on any broken invariant.
  void validate() const;
};

}  // namespace masersim
