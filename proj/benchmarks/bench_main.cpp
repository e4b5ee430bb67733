#include <benchmark/benchmark.h>

#include "asrnn/cells.hpp"
#include "asrnn/linalg.hpp"
#include "asrnn/model.hpp"
#include "asrnn/rng.hpp"

namespace {

using namespace asrnn;

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.normal();
  return m;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix a = random_matrix(n, n, 1), b = random_matrix(n, 128, 2);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * 128));
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(64)->Arg(128)->Arg(256);

void BM_Expm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Matrix a = random_matrix(n, n, 3);
  a = a - a.transposed();
  for (auto _ : state) benchmark::DoNotOptimize(expm(a));
}
BENCHMARK(BM_Expm)->Arg(16)->Arg(64)->Arg(128);

void BM_ExpmFrechetAdjoint(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Matrix a = random_matrix(n, n, 4);
  a = a - a.transposed();
  const Matrix g = random_matrix(n, n, 5);
  for (auto _ : state) benchmark::DoNotOptimize(expm_frechet_adjoint(a, g));
}
BENCHMARK(BM_ExpmFrechetAdjoint)->Arg(16)->Arg(64);

void BM_JacobiSingularValues(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix a = random_matrix(n, n, 6);
  for (auto _ : state) benchmark::DoNotOptimize(sigma_extremes(a));
}
BENCHMARK(BM_JacobiSingularValues)->Arg(8)->Arg(32)->Arg(64);

void BM_NearestSignedPermutation(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix a = random_matrix(n, n, 7);
  for (auto _ : state) benchmark::DoNotOptimize(nearest_generalized_permutation(a));
}
BENCHMARK(BM_NearestSignedPermutation)->Arg(8)->Arg(64);

// One forward + backward pass of the desk-scale copy task shape.
void BM_AsRnnStep(benchmark::State& state) {
  const auto hidden = static_cast<std::size_t>(state.range(0));
  const std::size_t steps = 120, batch = 128, vocab = 10;
  const ModelDims dims{vocab, hidden, vocab, HeadMode::kPerStep};
  ModelInit init;
  init.recurrent = InitSpec{InitScheme::kHenaff, 0.0, 0.0, 2e-5, 11};
  init.seed = 12;
  AsRnnModel model(dims, init_asrnn_params(dims, init));
  Sequence inputs(steps, Matrix(vocab, batch));
  for (std::size_t t = 0; t < steps; ++t)
    for (std::size_t b = 0; b < batch; ++b) inputs[t]((t + b) % vocab, b) = 1.0;
  TargetGrid targets(steps, std::vector<int>(batch, 0));
  MaskGrid mask(steps, std::vector<std::uint8_t>(batch, 1));
  for (auto _ : state) {
    const auto logits = model.forward(inputs, model.zero_state(batch));
    const LossResult loss = loss_and_grad(logits, targets, mask);
    benchmark::DoNotOptimize(model.backward(loss.grad_logits));
  }
}
BENCHMARK(BM_AsRnnStep)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
