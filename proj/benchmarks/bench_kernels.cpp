// Serial reference evaluators against the OpenMP kernels used by the
// samplers, on the fixture library at L=32, T=2500. The kernel benchmarks
// take the thread count as their argument; "full" kernels disable pulse
// truncation so they touch the same L x T bins as the reference.

#include <benchmark/benchmark.h>
#include <omp.h>

#include "mslu/forward_model.hpp"
#include "mslu/kernels.hpp"
#include "mslu/posterior.hpp"
#include "mslu/spectral_library.hpp"

using namespace mslu;

namespace {

struct Problem {
  SpectralLibrary lib;
  ImpulseParams phi;
  ParameterVector theta;
  Eigen::MatrixXd Y;

  Problem() {
    lib = resample_bands(load_spectra(std::string(MSLU_DATA_DIR) + "/fixture_spectra.csv"), 32, 400.0, 2500.0);
    theta.w = Eigen::Vector3d(0.2, 0.3, 0.4);
    theta.b = Eigen::VectorXd::Constant(32, 10.0);
    theta.t0 = 1000.0;
    const SceneSingle scene{theta.w, theta.t0, theta.b};
    Y = simulate(intensity_single(lib, scene, phi, 2500, PulseShape::Piecewise), 1).Y;
  }
};

const Problem& problem() {
  static const Problem p;
  return p;
}

void BM_GradientReference(benchmark::State& state) {
  const Problem& p = problem();
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        grad_potential_w(p.theta.w, p.Y, p.lib, p.theta.t0, p.theta.b, 1e6, p.phi, PulseShape::Piecewise));
  }
}

void gradient_kernel(benchmark::State& state, double cutoff) {
  const Problem& p = problem();
  omp_set_num_threads(static_cast<int>(state.range(0)));
  const PoissonKernel kernel(p.Y, p.lib, PulseShape::Piecewise, p.phi, cutoff);
  const LayeredModel model(kernel, {p.theta.t0}, p.theta.w, p.theta.b);
  const AreaConditional cond = model.area_conditional(0, 1e6);
  Eigen::VectorXd grad(3);
  for (auto _ : state) {
    cond.gradient(p.theta.w, grad);
    benchmark::DoNotOptimize(grad.data());
  }
}

void BM_GradientKernelFull(benchmark::State& state) { gradient_kernel(state, 0.0); }
void BM_GradientKernelWindowed(benchmark::State& state) { gradient_kernel(state, kDefaultPulseCutoff); }

void BM_LogLikelihoodReference(benchmark::State& state) {
  const Problem& p = problem();
  for (auto _ : state) {
    benchmark::DoNotOptimize(log_likelihood(p.Y, p.lib, p.theta, p.phi, PulseShape::Piecewise));
  }
}

void loglik_kernel(benchmark::State& state, double cutoff) {
  const Problem& p = problem();
  omp_set_num_threads(static_cast<int>(state.range(0)));
  const PoissonKernel kernel(p.Y, p.lib, PulseShape::Piecewise, p.phi, cutoff);
  const LayeredModel model(kernel, {p.theta.t0}, p.theta.w, p.theta.b);
  for (auto _ : state) benchmark::DoNotOptimize(model.log_likelihood());
}

void BM_LogLikelihoodKernelFull(benchmark::State& state) { loglik_kernel(state, 0.0); }
void BM_LogLikelihoodKernelWindowed(benchmark::State& state) { loglik_kernel(state, kDefaultPulseCutoff); }

// Position update: the windowed kernel re-evaluates only the pulse window.
void BM_PositionLikelihoodKernel(benchmark::State& state) {
  const Problem& p = problem();
  omp_set_num_threads(static_cast<int>(state.range(0)));
  const PoissonKernel kernel(p.Y, p.lib, PulseShape::Piecewise, p.phi);
  const LayeredModel model(kernel, {p.theta.t0}, p.theta.w, p.theta.b);
  for (auto _ : state) benchmark::DoNotOptimize(model.position_log_likelihood(p.theta.t0 + 0.3));
}

void thread_counts(benchmark::internal::Benchmark* b) {
  const int max = omp_get_num_procs();
  for (int t = 1; t < max; t *= 2) b->Arg(t);
  b->Arg(max);
}

}  // namespace

BENCHMARK(BM_GradientReference)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_GradientKernelFull)->Apply(thread_counts)->Unit(benchmark::kMicrosecond)->UseRealTime();
BENCHMARK(BM_GradientKernelWindowed)->Apply(thread_counts)->Unit(benchmark::kMicrosecond)->UseRealTime();
BENCHMARK(BM_LogLikelihoodReference)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_LogLikelihoodKernelFull)->Apply(thread_counts)->Unit(benchmark::kMicrosecond)->UseRealTime();
BENCHMARK(BM_LogLikelihoodKernelWindowed)->Apply(thread_counts)->Unit(benchmark::kMicrosecond)->UseRealTime();
BENCHMARK(BM_PositionLikelihoodKernel)->Apply(thread_counts)->Unit(benchmark::kMicrosecond)->UseRealTime();

BENCHMARK_MAIN();
