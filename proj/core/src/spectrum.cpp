#include "masersim/spectrum.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace masersim {

std::string_view to_string(ValueKind kind) {
  switch (kind) {
    case ValueKind::photon_count:
      return "photon_count";
    case ValueKind::linear_amplitude:
      return "linear_amplitude";
    case ValueKind::log_amplitude_dB:
      return "log_amplitude_dB";
  }
  return "photon_count";
}

ValueKind value_kind_from_string(std::string_view name) {
  if (name == "photon_count") return ValueKind::photon_count;
  if (name == "linear_amplitude") return ValueKind::linear_amplitude;
  if (name == "log_amplitude_dB") return ValueKind::log_amplitude_dB;
  throw std::invalid_argument("unknown value_kind \"" + std::string(name) +
                              "\"");
}

double Spectrum::grid_step_MHz() const {
  if (frequencies_MHz.size() < 2)
    throw std::invalid_argument("grid step needs at least 2 points");
  return (frequencies_MHz.back() - frequencies_MHz.front()) /
         static_cast<double>(frequencies_MHz.size() - 1);
}

void Spectrum::validate() const {
  if (frequencies_MHz.size() != values.size())
    throw std::invalid_argument("spectrum: frequency/value length mismatch");
  if (frequencies_MHz.empty())
    throw std::invalid_argument("spectrum: empty");
  const bool nonneg = value_kind != ValueKind::log_amplitude_dB;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(frequencies_MHz[i]) || !std::isfinite(values[i]))
      throw std::invalid_argument("spectrum: non-finite entry at index " +
                                  std::to_string(i));
    if (nonneg && values[i] < 0.0)
      throw std::invalid_argument("spectrum: negative value at index " +
                                  std::to_string(i));
  }
  for (std::size_t i = 1; i < frequencies_MHz.size(); ++i) {
    if (!(frequencies_MHz[i] > frequencies_MHz[i - 1]))
      throw std::invalid_argument(
          "spectrum: frequencies not strictly increasing at index " +
          std::to_string(i));
  }
  if (frequencies_MHz.size() >= 3) {
    // Uniformity within a relative tolerance; off-grid jitter from text
    // round-trips stays many orders below this.
    const double step = grid_step_MHz();
    for (std::size_t i = 1; i < frequencies_MHz.size(); ++i) {
      const double d = frequencies_MHz[i] - frequencies_MHz[i - 1];
      if (std::abs(d - step) > 1e-6 * std::abs(step))
        throw std::invalid_argument(
            "spectrum: grid not uniform at index " + std::to_string(i));
    }
  }
}

}  // namespace masersim
