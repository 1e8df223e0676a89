// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <numeric>
#include <vector>

#include "newsattn/train.hpp"

using namespace newsattn;

namespace {

/// n headlines per day at dimension cfg.d.
std::vector<numerics::Matrix> make_days(const model::ModelConfig& cfg, std::size_t n,
                                        numerics::Rng& rng) {
  std::vector<numerics::Matrix> days;
  for (std::size_t t = 0; t < model::kWindowDays; ++t) {
    numerics::Matrix m(n, cfg.d);
    for (double& x : m.span()) x = rng.normal() * 0.1;
    days.push_back(std::move(m));
  }
  return days;
}

model::DayMatrices refs(const std::vector<numerics::Matrix>& d) {
  return {std::cref(d[0]), std::cref(d[1]), std::cref(d[2]), std::cref(d[3]),
          std::cref(d[4]), std::cref(d[5]), std::cref(d[6])};
}

void BM_Forward(benchmark::State& state) {
  model::ModelConfig cfg;
  numerics::Rng rng(1);
  const auto params = model::ModelParams::init(cfg, rng);
  const auto days = make_days(cfg, static_cast<std::size_t>(state.range(0)), rng);
  const auto r = refs(days);
  for (auto _ : state) {
    benchmark::DoNotOptimize(model::forward(r, params, cfg, model::Mode::Eval).probs);
  }
}
BENCHMARK(BM_Forward)->Arg(1)->Arg(5)->Arg(20);

void BM_ForwardBackward(benchmark::State& state) {
  model::ModelConfig cfg;
  numerics::Rng rng(2);
  const auto params = model::ModelParams::init(cfg, rng);
  const auto days = make_days(cfg, static_cast<std::size_t>(state.range(0)), rng);
  const auto r = refs(days);
  for (auto _ : state) {
    numerics::Rng drop(3);
    const auto trace = model::forward(r, params, cfg, model::Mode::Train, &drop);
    benchmark::DoNotOptimize(train::backward(r, trace, 1, params, cfg));
  }
}
BENCHMARK(BM_ForwardBackward)->Arg(1)->Arg(5)->Arg(20);

void BM_AdamStep(benchmark::State& state) {
  model::ModelConfig cfg;
  numerics::Rng rng(4);
  auto params = model::ModelParams::init(cfg, rng);
  const auto grads = model::ModelParams::init(cfg, rng);
  auto adam = train::AdamState::zeros(cfg);
  const train::TrainConfig tc;
  for (auto _ : state) train::adam_step(params, grads, adam, tc);
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(params.parameter_count()));
}
BENCHMARK(BM_AdamStep);

}  // namespace

BENCHMARK_MAIN();
