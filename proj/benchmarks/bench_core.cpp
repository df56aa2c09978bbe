#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "ebmix/inference.hpp"
#include "ebmix/mixture.hpp"

namespace {

std::vector<ebmix::Observation> fdr_data(std::size_t n) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(2.0, 4.0);
  std::normal_distribution<double> nd;
  std::vector<ebmix::Observation> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(ebmix::Observation::normal((i < n / 20 ? u(rng) : 0.0) + nd(rng)));
  }
  return out;
}

ebmix::MixtureModel fitted(const std::vector<ebmix::Observation>& data, int j) {
  ebmix::FitConfig cfg;
  cfg.components = j;
  cfg.penalty = 50.0;
  return ebmix::em_fit(data, cfg);
}

void BM_EStep(benchmark::State& state) {
  const auto data = fdr_data(static_cast<std::size_t>(state.range(0)));
  const auto model = fitted(data, 10);
  for (auto _ : state) benchmark::DoNotOptimize(ebmix::e_step(data, model));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EStep)->Arg(1000)->Arg(10000);

void BM_EmFit(benchmark::State& state) {
  const auto data = fdr_data(1000);
  ebmix::FitConfig cfg;
  cfg.components = static_cast<int>(state.range(0));
  cfg.penalty = 50.0;
  for (auto _ : state) benchmark::DoNotOptimize(ebmix::em_fit(data, cfg));
}
BENCHMARK(BM_EmFit)->Arg(3)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_BinomialFit(benchmark::State& state) {
  std::mt19937_64 rng(2);
  std::gamma_distribution<double> ga(302.0), gb(884.0);
  std::uniform_int_distribution<int> ab(11, 320);
  std::vector<ebmix::Observation> data;
  for (int i = 0; i < 567; ++i) {
    const double x = ga(rng);
    const double p = x / (x + gb(rng));
    const int n = ab(rng);
    data.push_back(ebmix::Observation::binomial(std::binomial_distribution<int>(n, p)(rng), n));
  }
  ebmix::FitConfig cfg;
  cfg.components = 2;
  cfg.null_mode = ebmix::NullMode::None;
  cfg.penalty = 0.0;
  cfg.restarts = 1;
  for (auto _ : state) benchmark::DoNotOptimize(ebmix::em_fit(data, cfg));
}
BENCHMARK(BM_BinomialFit)->Unit(benchmark::kMillisecond);

void BM_PosteriorSummary(benchmark::State& state) {
  const auto data = fdr_data(1000);
  const auto model = fitted(data, 10);
  const auto grouping = ebmix::nearly_null_grouping(model);
  double z = -5.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(ebmix::posterior_summary(ebmix::Observation::normal(z), model, grouping));
    z = z > 5.0 ? -5.0 : z + 0.01;
  }
}
BENCHMARK(BM_PosteriorSummary);

void BM_RejectionThreshold(benchmark::State& state) {
  const auto data = fdr_data(1000);
  const auto model = fitted(data, 3);
  const auto grouping = ebmix::explicit_null(model);
  for (auto _ : state) {
    benchmark::DoNotOptimize(ebmix::rejection_threshold(model, grouping, 0.1, ebmix::ThresholdKind::Local));
  }
}
BENCHMARK(BM_RejectionThreshold)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
