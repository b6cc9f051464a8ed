#pragma once

// Independent reference implementations used only by the tests. These
// deliberately avoid the library's algorithms: fixed-step integration
// instead of the adaptive pair, direct full-sum enumeration instead of the
// Gray-code walk, and bisection instead of the closed-form width.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace oracle {

struct LVPoint {
  long double inverted_spins;
  long double photons;
};

// Classic fixed-step RK4 in extended precision on
//   dN/dt = -2*B*n*N - gamma_s*N
//   dn/dt = -kappa_c*n + B*n*N
inline LVPoint rk4_lv(long double B, long double gamma_s, long double kappa_c,
                      long double N0, long double n0, long double t_end,
                      std::size_t steps) {
  const long double h = t_end / static_cast<long double>(steps);
  long double N = N0;
  long double n = n0;
  auto fN = [&](long double Ns, long double ns) {
    return -2.0L * B * ns * Ns - gamma_s * Ns;
  };
  auto fn = [&](long double Ns, long double ns) {
    return -kappa_c * ns + B * ns * Ns;
  };
  for (std::size_t i = 0; i < steps; ++i) {
    const long double k1N = fN(N, n), k1n = fn(N, n);
    const long double k2N = fN(N + 0.5L * h * k1N, n + 0.5L * h * k1n);
    const long double k2n = fn(N + 0.5L * h * k1N, n + 0.5L * h * k1n);
    const long double k3N = fN(N + 0.5L * h * k2N, n + 0.5L * h * k2n);
    const long double k3n = fn(N + 0.5L * h * k2N, n + 0.5L * h * k2n);
    const long double k4N = fN(N + h * k3N, n + h * k3n);
    const long double k4n = fn(N + h * k3N, n + h * k3n);
    N += h / 6.0L * (k1N + 2.0L * k2N + 2.0L * k3N + k4N);
    n += h / 6.0L * (k1n + 2.0L * k2n + 2.0L * k3n + k4n);
  }
  return {N, n};
}

// Peak photon number along the same fixed-step RK4 path.
inline LVPoint rk4_lv_peak(long double B, long double gamma_s,
                           long double kappa_c, long double N0, long double n0,
                           long double t_end, std::size_t steps) {
  const long double h = t_end / static_cast<long double>(steps);
  long double N = N0;
  long double n = n0;
  long double best_t = 0.0L;
  long double best_n = n0;
  auto fN = [&](long double Ns, long double ns) {
    return -2.0L * B * ns * Ns - gamma_s * Ns;
  };
  auto fn = [&](long double Ns, long double ns) {
    return -kappa_c * ns + B * ns * Ns;
  };
  for (std::size_t i = 0; i < steps; ++i) {
    const long double k1N = fN(N, n), k1n = fn(N, n);
    const long double k2N = fN(N + 0.5L * h * k1N, n + 0.5L * h * k1n);
    const long double k2n = fn(N + 0.5L * h * k1N, n + 0.5L * h * k1n);
    const long double k3N = fN(N + 0.5L * h * k2N, n + 0.5L * h * k2n);
    const long double k3n = fn(N + 0.5L * h * k2N, n + 0.5L * h * k2n);
    const long double k4N = fN(N + h * k3N, n + h * k3n);
    const long double k4n = fn(N + h * k3N, n + h * k3n);
    N += h / 6.0L * (k1N + 2.0L * k2N + 2.0L * k3N + k4N);
    n += h / 6.0L * (k1n + 2.0L * k2n + 2.0L * k3n + k4n);
    if (n > best_n) {
      best_n = n;
      best_t = static_cast<long double>(i + 1) * h;
    }
  }
  return {best_t, best_n};  // (time, photons) packed into the pair
}

// Brute-force enumeration of (1/4)(sum_i s_i rho_i a_i)^2 / dE over all
// 2^P sign vectors, each sum evaluated from scratch.
inline std::vector<double> brute_force_shifts(const std::vector<double>& rho,
                                              const std::vector<double>& a_zz,
                                              double delta_e) {
  if (rho.size() != a_zz.size()) throw std::invalid_argument("length mismatch");
  if (rho.size() > 20) throw std::invalid_argument("too many sites for brute force");
  const std::size_t p = rho.size();
  const std::size_t total = std::size_t{1} << p;
  std::vector<double> out;
  out.reserve(total);
  for (std::size_t mask = 0; mask < total; ++mask) {
    double sum = 0.0;
    for (std::size_t i = 0; i < p; ++i) {
      const double s = (mask >> i) & 1u ? -1.0 : 1.0;
      sum += s * rho[i] * a_zz[i];
    }
    out.push_back(0.25 * sum * sum / delta_e);
  }
  return out;
}

// FWHM of the mapped line n(N(w)) for a Lorentzian inversion profile,
// located by bisection on each side of the center. Independent of the
// closed-form algebra: only the pointwise steady-state map is used.
inline long double bisect_mapped_fwhm(long double B, long double gamma_s,
                                      long double kappa_c, long double n_max,
                                      long double fwhm) {
  auto profile = [&](long double w) {  // inversion at offset w from center
    const long double x = 2.0L * w / fwhm;
    return n_max / (1.0L + x * x);
  };
  auto mapped = [&](long double w) {
    const long double N = profile(w);
    return gamma_s * N / (kappa_c - 3.0L * B * N);
  };
  const long double half = 0.5L * mapped(0.0L);
  // bracket the crossing on the high side
  long double lo = 0.0L, hi = fwhm;
  while (mapped(hi) > half) hi *= 2.0L;
  for (int i = 0; i < 200; ++i) {
    const long double mid = 0.5L * (lo + hi);
    (mapped(mid) > half ? lo : hi) = mid;
  }
  return 2.0L * 0.5L * (lo + hi);  // symmetric profile: FWHM = 2 * crossing
}

// Sample standard deviation with the n-1 denominator, two-pass.
inline double sample_sd(const std::vector<double>& v) {
  long double mean = 0.0L;
  for (double x : v) mean += x;
  mean /= static_cast<long double>(v.size());
  long double ss = 0.0L;
  for (double x : v) {
    const long double d = x - mean;
    ss += d * d;
  }
  return static_cast<double>(
      std::sqrt(ss / static_cast<long double>(v.size() - 1)));
}

}  // namespace oracle
