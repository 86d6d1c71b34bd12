// Serial reference kernels against their OpenMP counterparts on a
// scenario-sized image (30 x 30, L = 64, R = 3, K = 4).
//
//   ./bench_kernels --benchmark_filter=Abundance
//
// Thread counts are the benchmark argument; 0 selects the serial driver.

#include "hsiu/datagen.hpp"
#include "hsiu/fcls.hpp"
#include "hsiu/kernels.hpp"
#include "hsiu/sampler.hpp"

#include <benchmark/benchmark.h>

using namespace hsiu;

namespace {

struct Scene {
  SyntheticDataset data;
  std::vector<ClassCovariance> covs;
  Matrix residuals;
  Matrix shifted_endmembers;
  Matrix shifted_pixels;
  Matrix free;

  Scene() : data(generate(ScenarioSpec{})) {
    const Matrix& m = data.endmembers.values();
    for (double s : {0.0, 0.01, 0.1, 1.0}) covs.emplace_back(build_polynomial_kernel(data.endmembers), s, data.noise_variances);
    residuals = data.image.data() - m * data.abundances.values();
    shifted_endmembers = m.leftCols(2).colwise() - m.col(2);
    shifted_pixels = data.image.data().colwise() - m.col(2);
    free = data.abundances.free().cwiseMax(1e-6) * (1.0 - 3e-6);
  }
};

const Scene& scene() {
  static const Scene s;
  return s;
}

void BM_ClassLogliks(benchmark::State& state) {
  const Scene& s = scene();
  const int threads = static_cast<int>(state.range(0));
  for (auto _ : state) {
    Matrix out = threads == 0 ? class_logliks_serial(s.residuals, s.covs)
                              : class_logliks_parallel(s.residuals, s.covs, threads);
    benchmark::DoNotOptimize(out.data());
  }
}

void BM_LabelSweep(benchmark::State& state) {
  const Scene& s = scene();
  const int threads = static_cast<int>(state.range(0));
  const Matrix ll = class_logliks_serial(s.residuals, s.covs);
  const Lattice lattice(30, 30, NeighborhoodOrder::EightPixel);
  LabelField z = s.data.labels;
  std::uint64_t pass = 0;
  for (auto _ : state) {
    if (threads == 0) label_sweep_raster(z, ll, lattice, 1.2, {1, pass++});
    else label_sweep_colored(z, ll, lattice, 1.2, {1, pass++}, threads);
    benchmark::ClobberMemory();
  }
}

void BM_AbundanceUpdate(benchmark::State& state) {
  const Scene& s = scene();
  const int threads = static_cast<int>(state.range(0));
  std::vector<AbundanceTerms> terms;
  for (const auto& c : s.covs) terms.emplace_back(c, s.shifted_endmembers);
  Matrix free = s.free;
  std::uint64_t pass = 0;
  for (auto _ : state) {
    if (threads == 0) abundance_update_serial(free, s.shifted_pixels, s.data.labels, terms, {1, pass++}, 5);
    else abundance_update_parallel(free, s.shifted_pixels, s.data.labels, terms, {1, pass++}, 5, threads);
    benchmark::ClobberMemory();
  }
}

void BM_Fcls(benchmark::State& state) {
  const Scene& s = scene();
  FclsOptions opts;
  opts.threads = static_cast<int>(state.range(0));
  for (auto _ : state) {
    FclsResult r = fcls(s.data.image.data(), s.data.endmembers, opts);
    benchmark::DoNotOptimize(r.failed_pixels);
  }
}

void BM_SamplerIteration(benchmark::State& state) {
  const Scene& s = scene();
  SamplerConfig cfg;
  cfg.iterations = 1 << 30;
  cfg.burn_in = 0;
  cfg.threads = static_cast<int>(state.range(0));
  const RcaSampler sampler(s.data.image, s.data.endmembers, cfg);
  SamplerState st = sampler.initial_state();
  for (auto _ : state) sampler.step(st);
}

void thread_args(benchmark::internal::Benchmark* b) {
  for (int t : {0, 1, 2, 4}) b->Arg(t);
}

}  // namespace

BENCHMARK(BM_ClassLogliks)->Apply(thread_args)->UseRealTime()->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LabelSweep)->Apply(thread_args)->UseRealTime()->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_AbundanceUpdate)->Apply(thread_args)->UseRealTime()->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Fcls)->Apply(thread_args)->UseRealTime()->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SamplerIteration)->Apply(thread_args)->UseRealTime()->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
