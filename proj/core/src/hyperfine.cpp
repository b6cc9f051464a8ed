#include "masersim/hyperfine.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace masersim {

void ProtonSet::validate() const {
  if (rho.empty())
    throw std::invalid_argument("proton set: empty");
  if (rho.size() != a_zz_MHz.size())
    throw std::invalid_argument("proton set: rho/A_zz length mismatch");
  if (rho.size() > 24)
    throw std::invalid_argument(
        "proton set: P = " + std::to_string(rho.size()) +
        " exceeds the enumeration guard (24)");
  if (!(e_x_minus_e_y_MHz > 0.0) || !std::isfinite(e_x_minus_e_y_MHz))
    throw std::invalid_argument("proton set: E_X - E_Y must be positive");
  for (double r : rho)
    if (!std::isfinite(r))
      throw std::invalid_argument("proton set: non-finite density");
  for (double a : a_zz_MHz)
    if (!std::isfinite(a))
      throw std::invalid_argument("proton set: non-finite A_zz");
}

ProtonSet uniform_proton_set(std::vector<double> rho, double a_zz_MHz,
                             double e_x_minus_e_y_MHz) {
  ProtonSet set;
  set.a_zz_MHz.assign(rho.size(), a_zz_MHz);
  set.rho = std::move(rho);
  set.e_x_minus_e_y_MHz = e_x_minus_e_y_MHz;
  set.validate();
  return set;
}

ShiftDistribution enumerate_shifts(const ProtonSet& protons) {
  protons.validate();
  const std::size_t p = protons.size();

  std::vector<double> term(p);
  double sum = 0.0;
  for (std::size_t i = 0; i < p; ++i) {
    term[i] = protons.rho[i] * protons.a_zz_MHz[i];
    sum += term[i];
  }

  // Divide rather than multiplying by a reciprocal: scaling by 4 is exact,
  // so sum*sum/de4 rounds identically to a fresh (1/4)*sum^2/dE evaluation
  // and the walk stays bit-compatible with direct re-summation.
  const double de4 = 4.0 * protons.e_x_minus_e_y_MHz;
  ShiftDistribution dist;
  dist.shifts_MHz.resize(std::size_t{1} << p);

  // Walk the s_1 = +1 half in Gray-code order, flipping one of the
  // remaining P-1 signs per configuration; the global flip s -> -s leaves
  // the shift unchanged, so each value is emitted twice.
  const std::size_t half = std::size_t{1} << (p - 1);
  std::vector<int> sign(p, +1);
  std::size_t out = 0;
  for (std::size_t g = 0;; ++g) {
    const double shift = sum * sum / de4;
    dist.shifts_MHz[out++] = shift;
    dist.shifts_MHz[out++] = shift;
    if (g + 1 == half) break;
    const std::size_t flip = 1 + std::countr_zero(g + 1);
    sign[flip] = -sign[flip];
    sum += 2.0 * sign[flip] * term[flip];
  }
  return dist;
}

double max_shift_bound(const ProtonSet& protons) {
  protons.validate();
  double total = 0.0;
  for (std::size_t i = 0; i < protons.size(); ++i)
    total += std::abs(protons.rho[i] * protons.a_zz_MHz[i]);
  return total * total / (4.0 * protons.e_x_minus_e_y_MHz);
}

namespace {

double quantile_sorted(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

double silverman_bandwidth(std::span<const double> sample) {
  const std::size_t n = sample.size();
  if (n < 2)
    throw std::invalid_argument("silverman_bandwidth: needs >= 2 samples");

  double mean = 0.0;
  for (double x : sample) mean += x;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double x : sample) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));

  std::vector<double> sorted(sample.begin(), sample.end());
  std::sort(sorted.begin(), sorted.end());
  const double iqr =
      quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);

  // Heavily tied samples can have zero IQR with nonzero spread; the sd
  // alone then sets the scale.
  double scale = sd;
  if (iqr > 0.0) scale = std::min(sd, iqr / 1.34);
  if (!(scale > 0.0))
    throw std::domain_error(
        "silverman_bandwidth: zero-variance sample; supply a bandwidth");
  return 0.9 * scale * std::pow(static_cast<double>(n), -0.2);
}

KdeCurve kde(const ShiftDistribution& dist, std::optional<double> bandwidth_MHz,
             std::size_t n_points) {
  if (dist.shifts_MHz.empty())
    throw std::invalid_argument("kde: empty shift distribution");
  if (n_points < 2)
    throw std::invalid_argument("kde: needs >= 2 grid points");

  double h;
  if (bandwidth_MHz) {
    h = *bandwidth_MHz;
    if (!(h > 0.0) || !std::isfinite(h))
      throw std::invalid_argument("kde: bandwidth must be positive");
  } else {
    h = silverman_bandwidth(dist.shifts_MHz);
  }

  const double max_shift =
      *std::max_element(dist.shifts_MHz.begin(), dist.shifts_MHz.end());
  // 4h margins keep > 99.99% of every kernel's mass on the grid, so the
  // trapezoid integral stays within 1e-3 of unity.
  const double lo = -4.0 * h;
  const double hi = max_shift + 4.0 * h;
  const double step = (hi - lo) / static_cast<double>(n_points - 1);

  KdeCurve curve;
  curve.bandwidth_MHz = h;
  curve.rug_MHz = dist.shifts_MHz;
  curve.grid_MHz.resize(n_points);
  curve.density.assign(n_points, 0.0);
  for (std::size_t j = 0; j < n_points; ++j)
    curve.grid_MHz[j] = lo + static_cast<double>(j) * step;

  const double norm =
      1.0 / (static_cast<double>(dist.shifts_MHz.size()) * h *
             std::sqrt(2.0 * std::numbers::pi));
  for (std::size_t j = 0; j < n_points; ++j) {
    const double x = curve.grid_MHz[j];
    double acc = 0.0;
    for (double s : dist.shifts_MHz) {
      const double z = (x - s) / h;
      acc += std::exp(-0.5 * z * z);
    }
    curve.density[j] = norm * acc;
  }
  return curve;
}

Spectrum histogram(const ShiftDistribution& dist, std::size_t bins) {
  if (dist.shifts_MHz.empty())
    throw std::invalid_argument("histogram: empty shift distribution");
  if (bins < 2)
    throw std::invalid_argument("histogram: needs >= 2 bins");

  const double max_shift =
      *std::max_element(dist.shifts_MHz.begin(), dist.shifts_MHz.end());
  // Degenerate all-zero case: nominal 1 MHz span, all counts in bin 0.
  const double span = max_shift > 0.0 ? max_shift : 1.0;
  const double width = span / static_cast<double>(bins);

  Spectrum out;
  out.value_kind = ValueKind::photon_count;
  out.frequencies_MHz.resize(bins);
  out.values.assign(bins, 0.0);
  for (std::size_t i = 0; i < bins; ++i)
    out.frequencies_MHz[i] = (static_cast<double>(i) + 0.5) * width;
  for (double s : dist.shifts_MHz) {
    auto idx = static_cast<std::size_t>(s / width);
    if (idx >= bins) idx = bins - 1;  // right edge is inclusive
    out.values[idx] += 1.0;
  }
  return out;
}

}  // namespace masersim
