#include "ggmotion/data_io.hpp"
#include "ggmotion/model.hpp"
#include "ggmotion/train.hpp"

#include <benchmark/benchmark.h>

using namespace ggmotion;

namespace {

SkeletonTopology body22() {
  std::vector<int> parent = {-1, 0, 1, 2, 3, 4, 0, 6, 7, 8, 0, 10, 11, 12, 2, 14, 15, 16, 2, 18, 19, 20};
  std::vector<std::vector<int>> groups = {{0, 1, 2, 3},     {4, 5},           {6, 7, 8, 9},
                                          {10, 11, 12, 13}, {14, 15, 16, 17}, {18, 19, 20, 21}};
  return build_topology(parent, groups);
}

Model desk_model() {
  ModelConfig cfg;
  cfg.n_joints = 22;
  cfg.t_h = 10;
  cfg.t_f = 10;
  cfg.channels = 16;
  cfg.hidden = 32;
  cfg.blocks = 4;
  cfg.seed = 1;
  return build_model(cfg, body22());
}

std::vector<Mat> random_past(int n, int t_h, uint64_t seed) {
  Rng rng(seed);
  std::vector<Mat> past;
  for (int j = 0; j < n; ++j) {
    Mat g(3, t_h);
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < t_h; ++c) g(r, c) = rng.normal();
    }
    past.push_back(g);
  }
  return past;
}

void BM_ForwardDesk(benchmark::State& state) {
  Model model = desk_model();
  auto past = random_past(22, 10, 3);
  for (auto _ : state) {
    auto out = model_forward(model, past);
    benchmark::DoNotOptimize(out[0](0, 0));
  }
}
BENCHMARK(BM_ForwardDesk);

void BM_ForwardBackwardDesk(benchmark::State& state) {
  Model model = desk_model();
  auto past = random_past(22, 10, 3);
  auto truth = random_past(22, 10, 5);
  for (auto _ : state) {
    ad::Tape tape;
    ad::TapeCtx ctx(tape, model.params);
    auto pred = model_forward_tape(ctx, model, past);
    int loss = loss_pos_node(ctx, pred, truth);
    auto adj = tape.backward(loss);
    benchmark::DoNotOptimize(adj.size());
  }
}
BENCHMARK(BM_ForwardBackwardDesk);

void BM_EqMlpForward(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  ad::ParamStore store;
  auto params = make_eqmlp(store, "eq", n, 16, 32, false, Rng(1));
  Rng rng(2);
  std::vector<Mat> vars;
  for (int i = 0; i < n; ++i) {
    Mat g(3, 16);
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 16; ++c) g(r, c) = rng.normal();
    }
    vars.push_back(g);
  }
  for (auto _ : state) {
    ad::Tape tape;
    ad::TapeCtx ctx(tape, store);
    std::vector<int> nodes;
    for (const Mat& v : vars) nodes.push_back(tape.constant(v));
    benchmark::DoNotOptimize(tape.val(eqmlp_forward(ctx, params, nodes))(0, 0));
  }
}
BENCHMARK(BM_EqMlpForward)->Arg(3)->Arg(6);

void BM_PropagationSlab(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const bool parallel = state.range(1) == 1;
  std::vector<int> parent(static_cast<size_t>(n));
  std::vector<int> chain(static_cast<size_t>(n));
  parent[0] = -1;
  for (int j = 0; j < n; ++j) {
    chain[static_cast<size_t>(j)] = j;
    if (j > 0) parent[static_cast<size_t>(j)] = j - 1;
  }
  auto topo = build_topology(parent, {chain});
  ad::ParamStore store;
  auto params = make_group_params(store, "g", topo, 8, 16, false, Rng(1));
  Rng rng(2);
  auto slab = [&]() {
    Mat g(3 * n, 8);
    for (Eigen::Index r = 0; r < g.rows(); ++r) {
      for (int c = 0; c < 8; ++c) g(r, c) = rng.normal();
    }
    return g;
  };
  Mat x = slab(), v = slab(), f = slab(), out(3 * n, 8);
  ParallelDkWorkspace ws;
  for (auto _ : state) {
    if (parallel) {
      parallel_dk_slab(store, params, topo, x, v, f, 0, n, ws, out);
    } else {
      iterative_dk_slab(topo, x, v, f, kNormEps, out);
    }
    benchmark::DoNotOptimize(out(0, 0));
  }
}
BENCHMARK(BM_PropagationSlab)->Args({128, 1})->Args({128, 0})->Args({512, 1})->Args({512, 0});

void BM_SynthGenerate(benchmark::State& state) {
  SynthConfig cfg;
  cfg.topo = body22();
  cfg.bone_lengths.assign(22, 150.0);
  cfg.freq_hz.assign(22, 0.8);
  cfg.amplitude.assign(22, 0.5);
  cfg.drift = Vec3(40, 0, -20);
  cfg.frames = 250;
  cfg.seed = 7;
  for (auto _ : state) {
    auto seq = synth_generate(cfg);
    benchmark::DoNotOptimize(seq.joints[0](0, 0));
  }
}
BENCHMARK(BM_SynthGenerate);

}  // namespace

BENCHMARK_MAIN();
