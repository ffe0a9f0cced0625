#include <benchmark/benchmark.h>

#include <random>

#include "ptalign/align.hpp"
#include "ptalign/fixtures.hpp"
#include "ptalign/pairing.hpp"
#include "ptalign/transport.hpp"

namespace {

using namespace ptalign;

void BM_Sinkhorn(benchmark::State& state) {
  const auto n = static_cast<Eigen::Index>(state.range(0));
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  Matrix c(n, n);
  Vector a(n);
  Vector b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    a[i] = u(rng);
    b[i] = u(rng);
    for (Eigen::Index j = 0; j < n; ++j) c(i, j) = u(rng);
  }
  a /= a.sum();
  b /= b.sum();
  for (auto _ : state) benchmark::DoNotOptimize(sinkhorn(c, a, b, {}));
}
BENCHMARK(BM_Sinkhorn)->Arg(10)->Arg(50);

void BM_PairTokens(benchmark::State& state) {
  const auto fx = generate_fixtures({});
  const auto src = decode_sequence(fx.bigram_vocab, fx.source[0].gold_ids);
  const auto tgt = decode_sequence(fx.char_vocab, fx.target[0].gold_ids);
  for (auto _ : state) benchmark::DoNotOptimize(pair_tokens(src, tgt));
}
BENCHMARK(BM_PairTokens);

void BM_AlignMatrices(benchmark::State& state) {
  const auto fx = generate_fixtures({});
  AlignConfig cfg;
  cfg.strategy = static_cast<Strategy>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        align_matrices(fx.source[0], fx.target[0], fx.bigram_vocab, fx.char_vocab, cfg));
  }
  state.SetLabel(std::string(to_string(cfg.strategy)));
}
BENCHMARK(BM_AlignMatrices)->DenseRange(0, 2);

}  // namespace

BENCHMARK_MAIN();
