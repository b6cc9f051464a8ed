// Microbenchmarks for the hot paths: steady-state evaluation, profile
// mapping, sign-configuration enumeration, KDE, curve fitting, and the
// adaptive integrator on a photon burst.
#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "masersim/fitting.hpp"
#include "masersim/hyperfine.hpp"
#include "masersim/lineshape.hpp"
#include "masersim/rate_equations.hpp"

namespace {

using namespace masersim;

constexpr RateConstants kRates{1.1e-7, 4.0e4, 2.1e6};

void BM_SteadyStateSweep(benchmark::State& state) {
  const double n_th = threshold_inversion(kRates);
  for (auto _ : state) {
    double acc = 0.0;
    for (int i = 0; i < 201; ++i)
      acc += steady_state_photons(kRates, 0.98 * n_th * i / 200.0);
    benchmark::DoNotOptimize(acc);
  }
  state.SetItemsProcessed(state.iterations() * 201);
}
BENCHMARK(BM_SteadyStateSweep);

void BM_LineshapeMap(benchmark::State& state) {
  const std::vector<double> grid = default_grid(1450.0);
  const Spectrum profile = sample_profile({6e12, 1450.0, 4.0}, grid);
  for (auto _ : state) {
    Spectrum mapped = map_to_photons(profile, kRates);
    benchmark::DoNotOptimize(mapped.values.data());
  }
  state.SetItemsProcessed(state.iterations() * grid.size());
}
BENCHMARK(BM_LineshapeMap);

void BM_MeasureFwhm(benchmark::State& state) {
  const std::vector<double> grid = default_grid(1450.0);
  const Spectrum mapped =
      map_to_photons(sample_profile({6e12, 1450.0, 4.0}, grid), kRates);
  for (auto _ : state) benchmark::DoNotOptimize(measure_fwhm(mapped));
}
BENCHMARK(BM_MeasureFwhm);

void BM_EnumerateShifts(benchmark::State& state) {
  const auto sites = static_cast<std::size_t>(state.range(0));
  std::vector<double> rho(sites);
  for (std::size_t i = 0; i < sites; ++i)
    rho[i] = 0.02 + 0.1 * static_cast<double>(i) / static_cast<double>(sites);
  const ProtonSet set = uniform_proton_set(rho);
  for (auto _ : state) {
    ShiftDistribution dist = enumerate_shifts(set);
    benchmark::DoNotOptimize(dist.shifts_MHz.data());
  }
  state.SetItemsProcessed(state.iterations() * (1LL << sites));
}
BENCHMARK(BM_EnumerateShifts)->Arg(10)->Arg(14)->Arg(18);

void BM_Kde(benchmark::State& state) {
  std::vector<double> rho = {0.12, 0.12, 0.12, 0.12, 0.07,  0.07, 0.07,
                             0.07, 0.045, 0.045, 0.045, 0.045, 0.02, 0.02};
  const ShiftDistribution dist = enumerate_shifts(uniform_proton_set(rho));
  for (auto _ : state) {
    KdeCurve curve = kde(dist);
    benchmark::DoNotOptimize(curve.density.data());
  }
}
BENCHMARK(BM_Kde);

void BM_BiLorentzianFit(benchmark::State& state) {
  const BiLorentzianModel truth{1.0, 0.6, 1450.0, 1450.9, 0.13, 1.1, 0.02};
  std::vector<double> grid;
  for (int i = 0; i < 1001; ++i) grid.push_back(1447.5 + 0.005 * i);
  Spectrum data = eval_bilorentzian(truth, grid);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 0.01);
  for (double& v : data.values) v = std::max(0.0, v + g(rng));
  for (auto _ : state) {
    FitResult fit = fit_bilorentzian(data);
    benchmark::DoNotOptimize(fit.rss);
  }
}
BENCHMARK(BM_BiLorentzianFit);

void BM_PhotonBurst(benchmark::State& state) {
  for (auto _ : state) {
    LVTrajectory traj = integrate_lv(kRates, {4e13, 1.0}, 1e-4, 1e-8, 1e-3);
    benchmark::DoNotOptimize(traj.states.data());
  }
}
BENCHMARK(BM_PhotonBurst);

}  // namespace

int main(int argc, char** argv) {
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
