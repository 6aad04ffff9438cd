// Conv kernels: naive reference vs optimized kernel on one thread vs all
// threads. Also times a full model forward/backward on a training batch.
//
//   ./bench/bench_conv --benchmark_counters_tabular=true

#include <benchmark/benchmark.h>

#include <algorithm>

#include <thread>

#include "tmsr/conv.hpp"
#include "tmsr/model.hpp"
#include "tmsr/parallel.hpp"
#include "tmsr/random.hpp"

namespace {

using namespace tmsr;

struct Case {
  int channels_in;
  int channels_out;
  int kh;
  int kw;
  bool depthwise;
};

// Layer shapes as they occur in the default model.
const Case kCases[] = {
    {1, 8, 3, 3, false},  // feature
    {8, 6, 1, 1, false},  // shrink
    {6, 6, 3, 3, false},  // block branch
    {6, 6, 1, 3, false},  // block branch
    {6, 6, 3, 3, true},   // depthwise variant
    {8, 4, 3, 3, false},  // upsample
};

struct Setup {
  ConvParams params;
  Tensor input;
  Tensor grad_out;
};

Setup make_setup(const Case& c, int batch, int size) {
  Rng rng(42);
  ConvShape shape{c.channels_in, c.channels_out, c.kh, c.kw, c.depthwise};
  Setup s{ConvParams(shape), Tensor(Shape{batch, c.channels_in, size, size}),
          Tensor(Shape{batch, c.channels_out, size, size})};
  for (float& v : s.params.weights.data()) v = static_cast<float>(rng.uniform(-0.5, 0.5));
  for (float& v : s.params.bias) v = static_cast<float>(rng.uniform(-0.1, 0.1));
  for (float& v : s.input.data()) v = static_cast<float>(rng.uniform(0, 1));
  for (float& v : s.grad_out.data()) v = static_cast<float>(rng.uniform(-1, 1));
  return s;
}

void set_labels(benchmark::State& state, const Case& c, int batch, int size) {
  state.SetLabel(std::to_string(c.channels_in) + "->" + std::to_string(c.channels_out) + " " +
                 std::to_string(c.kh) + "x" + std::to_string(c.kw) + (c.depthwise ? " dw" : "") + " n" +
                 std::to_string(batch) + " " + std::to_string(size) + "px");
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch) * size * size);
}

int all_threads() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

void BM_ForwardReference(benchmark::State& state) {
  const Case& c = kCases[state.range(0)];
  const int batch = 16, size = 32;
  Setup s = make_setup(c, batch, size);
  for (auto _ : state) benchmark::DoNotOptimize(reference::conv2d_forward(s.input, s.params.view()));
  set_labels(state, c, batch, size);
}

void forward_threads(benchmark::State& state, int threads) {
  const Case& c = kCases[state.range(0)];
  const int batch = 16, size = 32;
  Setup s = make_setup(c, batch, size);
  set_thread_count(threads);
  Tensor out;
  for (auto _ : state) {
    conv2d_forward_into(s.input, s.params.view(), out);
    benchmark::DoNotOptimize(out.data().data());
  }
  state.counters["threads"] = threads;
  set_labels(state, c, batch, size);
}

void BM_ForwardSerial(benchmark::State& state) { forward_threads(state, 1); }
void BM_ForwardParallel(benchmark::State& state) { forward_threads(state, all_threads()); }

void BM_BackwardReference(benchmark::State& state) {
  const Case& c = kCases[state.range(0)];
  const int batch = 16, size = 32;
  Setup s = make_setup(c, batch, size);
  for (auto _ : state) {
    benchmark::DoNotOptimize(reference::conv2d_backward(s.input, s.params.view(), s.grad_out));
  }
  set_labels(state, c, batch, size);
}

void backward_threads(benchmark::State& state, int threads) {
  const Case& c = kCases[state.range(0)];
  const int batch = 16, size = 32;
  Setup s = make_setup(c, batch, size);
  set_thread_count(threads);
  for (auto _ : state) {
    benchmark::DoNotOptimize(conv2d_backward(s.input, s.params.view(), s.grad_out));
  }
  state.counters["threads"] = threads;
  set_labels(state, c, batch, size);
}

void BM_BackwardSerial(benchmark::State& state) { backward_threads(state, 1); }
void BM_BackwardParallel(benchmark::State& state) { backward_threads(state, all_threads()); }

void model_step(benchmark::State& state, int threads) {
  set_thread_count(threads);
  TmsrModel model = TmsrModel::build(ModelConfig{}, 1);
  Rng rng(7);
  Tensor x(Shape{64, 1, 16, 16});
  for (float& v : x.data()) v = static_cast<float>(rng.uniform(0, 1));
  Tensor g(Shape{64, 1, 32, 32});
  for (float& v : g.data()) v = static_cast<float>(rng.uniform(-1, 1));
  ForwardCache cache;
  std::vector<float> grads(model.param_count());
  for (auto _ : state) {
    model.forward_train(x, cache);
    model.backward(cache, g, grads);
    benchmark::DoNotOptimize(grads.data());
  }
  state.counters["threads"] = threads;
  state.SetItemsProcessed(state.iterations() * 64);
}

void BM_ModelStepSerial(benchmark::State& state) { model_step(state, 1); }
void BM_ModelStepParallel(benchmark::State& state) { model_step(state, all_threads()); }

void all_cases(benchmark::internal::Benchmark* b) {
  for (int i = 0; i < static_cast<int>(std::size(kCases)); ++i) b->Arg(i);
  b->Unit(benchmark::kMicrosecond);
}

BENCHMARK(BM_ForwardReference)->Apply(all_cases);
BENCHMARK(BM_ForwardSerial)->Apply(all_cases);
BENCHMARK(BM_ForwardParallel)->Apply(all_cases)->UseRealTime();
BENCHMARK(BM_BackwardReference)->Apply(all_cases);
BENCHMARK(BM_BackwardSerial)->Apply(all_cases);
BENCHMARK(BM_BackwardParallel)->Apply(all_cases)->UseRealTime();
BENCHMARK(BM_ModelStepSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ModelStepParallel)->Unit(benchmark::kMillisecond)->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
