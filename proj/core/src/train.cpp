#include "ggmotion/train.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <thread>

namespace ggmotion {

void TrainConfig::validate() const {
  if (epochs < 1 || batch_size < 1 || stride < 1 || threads < 1) {
    throw ConfigError("train config: epochs/batch_size/stride/threads must be positive");
  }
  if (lr <= 0.0 || input_scale <= 0.0 || adam_eps <= 0.0) {
    throw ConfigError("train config: lr/input_scale/adam_eps must be positive");
  }
  if (lr_decay <= 0.0 || lr_decay > 1.0) throw ConfigError("train config: lr_decay must be in (0, 1]");
  if (adam_beta1 < 0.0 || adam_beta1 >= 1.0 || adam_beta2 < 0.0 || adam_beta2 >= 1.0) {
    throw ConfigError("train config: adam betas must be in [0, 1)");
  }
  if (max_steps < 0) throw ConfigError("train config: max_steps must be >= 0");
}

TrainConfig train_config_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("train config JSON: ") + e.what());
  }
  TrainConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.lr = j.value("lr", c.lr);
  c.lr_decay = j.value("lr_decay", c.lr_decay);
  c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
  c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
  c.adam_eps = j.value("adam_eps", c.adam_eps);
  c.input_scale = j.value("input_scale", c.input_scale);
  c.seed = j.value("seed", c.seed);
  c.stride = j.value("stride", c.stride);
  c.use_aux = j.value("use_aux", c.use_aux);
  c.bone_length_aux = j.value("bone_length_aux", c.bone_length_aux);
  c.threads = j.value("threads", c.threads);
  c.max_steps = j.value("max_steps", c.max_steps);
  c.validate();
  return c;
}

std::string train_config_to_json(const TrainConfig& c) {
  nlohmann::json j;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["lr"] = c.lr;
  j["lr_decay"] = c.lr_decay;
  j["adam_beta1"] = c.adam_beta1;
  j["adam_beta2"] = c.adam_beta2;
  j["adam_eps"] = c.adam_eps;
  j["input_scale"] = c.input_scale;
  j["seed"] = c.seed;
  j["stride"] = c.stride;
  j["use_aux"] = c.use_aux;
  j["bone_length_aux"] = c.bone_length_aux;
  j["threads"] = c.threads;
  j["max_steps"] = c.max_steps;
  return j.dump(2);
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

namespace {

void check_pair(std::span<const Mat> pred, std::span<const Mat> truth) {
  if (pred.size() != truth.size() || pred.empty()) {
    throw UsageError("loss: prediction and truth joint counts differ");
  }
  for (size_t i = 0; i < pred.size(); ++i) {
    if (pred[i].rows() != truth[i].rows() || pred[i].cols() != truth[i].cols()) {
      throw UsageError("loss: shape mismatch at joint " + std::to_string(i));
    }
  }
}

}  // namespace

double loss_pos(std::span<const Mat> pred, std::span<const Mat> truth) {
  check_pair(pred, truth);
  double sum = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) {
    sum += (pred[i] - truth[i]).colwise().norm().sum();
  }
  return sum / (static_cast<double>(pred.size()) * static_cast<double>(pred[0].cols()));
}

int loss_pos_node(ad::TapeCtx& ctx, std::span<const int> pred, std::span<const Mat> truth) {
  auto& t = ctx.tape;
  if (pred.size() != truth.size() || pred.empty()) {
    throw UsageError("loss: prediction and truth joint counts differ");
  }
  int acc = -1;
  for (size_t i = 0; i < pred.size(); ++i) {
    int err = t.sum_all(t.colnorm(t.sub(pred[i], t.constant(truth[i]))));
    acc = acc < 0 ? err : t.add(acc, err);
  }
  double denom = static_cast<double>(pred.size()) * static_cast<double>(truth[0].cols());
  return t.scale_const(acc, 1.0 / denom);
}

double loss_aux(std::span<const Mat> pred, std::span<const Mat> truth,
                const SkeletonTopology& topo) {
  check_pair(pred, truth);
  if (static_cast<int>(pred.size()) != topo.n_joints) {
    throw UsageError("loss_aux: topology joint count mismatch");
  }
  if (topo.n_joints == 1) return 0.0;
  double sum = 0.0;
  for (int i = 0; i < topo.n_joints; ++i) {
    int p = topo.parent[static_cast<size_t>(i)];
    if (p == -1) continue;
    sum += (pred[static_cast<size_t>(i)] - truth[static_cast<size_t>(p)]).cwiseAbs().sum();
  }
  return sum / (static_cast<double>(topo.n_joints - 1) * static_cast<double>(pred[0].cols()));
}

int loss_aux_node(ad::TapeCtx& ctx, std::span<const int> pred, std::span<const Mat> truth,
                  const SkeletonTopology& topo) {
  auto& t = ctx.tape;
  if (static_cast<int>(pred.size()) != topo.n_joints) {
    throw UsageError("loss_aux: topology joint count mismatch");
  }
  if (topo.n_joints == 1) return t.constant(Mat::Zero(1, 1));
  int acc = -1;
  for (int i = 0; i < topo.n_joints; ++i) {
    int p = topo.parent[static_cast<size_t>(i)];
    if (p == -1) continue;
    int err = t.sum_abs(t.sub(pred[static_cast<size_t>(i)], t.constant(truth[static_cast<size_t>(p)])));
    acc = acc < 0 ? err : t.add(acc, err);
  }
  double denom = static_cast<double>(topo.n_joints - 1) * static_cast<double>(truth[0].cols());
  return t.scale_const(acc, 1.0 / denom);
}

int bone_length_aux_node(ad::TapeCtx& ctx, std::span<const int> pred, std::span<const Mat> truth,
                         const SkeletonTopology& topo) {
  auto& t = ctx.tape;
  if (topo.n_joints == 1) return t.constant(Mat::Zero(1, 1));
  int acc = -1;
  for (int i = 0; i < topo.n_joints; ++i) {
    int p = topo.parent[static_cast<size_t>(i)];
    if (p == -1) continue;
    int pred_len = t.colnorm(t.sub(pred[static_cast<size_t>(i)], pred[static_cast<size_t>(p)]));
    Mat true_len = (truth[static_cast<size_t>(i)] - truth[static_cast<size_t>(p)]).colwise().norm();
    int err = t.sum_abs(t.sub(pred_len, t.constant(true_len)));
    acc = acc < 0 ? err : t.add(acc, err);
  }
  double denom = static_cast<double>(topo.n_joints - 1) * static_cast<double>(truth[0].cols());
  return t.scale_const(acc, 1.0 / denom);
}

double mpjpe(std::span<const Mat> pred_mm, std::span<const Mat> truth_mm) {
  return loss_pos(pred_mm, truth_mm);
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

void adam_step(ad::ParamStore& params, AdamState& state, const TrainConfig& cfg, double lr) {
  const size_t n = params.count();
  if (state.m.empty()) {
    state.m.resize(n);
    state.v.resize(n);
    for (size_t i = 0; i < n; ++i) {
      const Mat& val = params.entry(static_cast<int>(i)).value;
      state.m[i] = Mat::Zero(val.rows(), val.cols());
      state.v[i] = Mat::Zero(val.rows(), val.cols());
    }
  }
  if (state.m.size() != n) throw ConfigError("adam_step: state does not match parameter store");

  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(state.step));
  for (size_t i = 0; i < n; ++i) {
    auto& e = params.entry(static_cast<int>(i));
    state.m[i] = cfg.adam_beta1 * state.m[i] + (1.0 - cfg.adam_beta1) * e.grad;
    state.v[i] = (cfg.adam_beta2 * state.v[i].array() +
                  (1.0 - cfg.adam_beta2) * e.grad.array().square())
                     .matrix();
    Mat m_hat = state.m[i] / bc1;
    Mat v_hat = state.v[i] / bc2;
    e.value -= lr * (m_hat.array() / (v_hat.array().sqrt() + cfg.adam_eps)).matrix();
  }
  params.apply_constraints();
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

namespace {

std::vector<Mat> scale_grids(const std::vector<Mat>& grids, double s) {
  std::vector<Mat> out;
  out.reserve(grids.size());
  for (const Mat& g : grids) out.push_back(g * s);
  return out;
}

std::vector<Mat> predict_mm(const Model& model, const Window& w, double input_scale) {
  auto pred = model_forward(model, scale_grids(w.past, input_scale));
  for (Mat& p : pred) p /= input_scale;
  return pred;
}

struct ItemResult {
  std::vector<Mat> grads;  // by parameter index; empty = zero
  double pos = 0.0;
  double aux = 0.0;
};

ItemResult run_item(const Model& model, const TrainConfig& cfg, const Window& scaled) {
  ad::Tape tape;
  ad::TapeCtx ctx(tape, model.params);
  auto pred = model_forward_tape(ctx, model, scaled.past);
  int lpos = loss_pos_node(ctx, pred, scaled.future);
  int total = lpos;
  int laux = -1;
  if (cfg.use_aux) {
    laux = cfg.bone_length_aux ? bone_length_aux_node(ctx, pred, scaled.future, model.topo)
                               : loss_aux_node(ctx, pred, scaled.future, model.topo);
    total = tape.add(lpos, laux);
  }
  auto adjoints = tape.backward(total);

  ItemResult out;
  out.pos = tape.val(lpos)(0, 0);
  out.aux = laux < 0 ? 0.0 : tape.val(laux)(0, 0);
  out.grads.resize(model.params.count());
  for (size_t pidx = 0; pidx < ctx.param_nodes.size(); ++pidx) {
    int node = ctx.param_nodes[pidx];
    if (node < 0) continue;
    const Mat& a = adjoints[static_cast<size_t>(node)];
    if (a.size() != 0) out.grads[pidx] = a;
  }
  return out;
}

}  // namespace

TrainResult train(Model& model, const TrainConfig& cfg, std::span<const Window> train_windows,
                  std::span<const Window> val_windows) {
  cfg.validate();
  if (train_windows.empty()) throw UsageError("train: empty dataset");

  std::vector<Window> scaled;
  scaled.reserve(train_windows.size());
  for (const Window& w : train_windows) {
    scaled.push_back({scale_grids(w.past, cfg.input_scale), scale_grids(w.future, cfg.input_scale)});
  }

  Rng base(cfg.seed);
  AdamState adam;
  TrainResult result;
  const int n_items = static_cast<int>(scaled.size());
  bool stop = false;

  for (int epoch = 1; epoch <= cfg.epochs && !stop; ++epoch) {
    const double lr = cfg.lr * std::pow(cfg.lr_decay, static_cast<double>(epoch - 1));

    std::vector<int> order(scaled.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    Rng shuffle = base.split("epoch." + std::to_string(epoch));
    for (size_t i = order.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(shuffle.next_u64() % i);
      std::swap(order[i - 1], order[j]);
    }

    double epoch_pos = 0.0, epoch_aux = 0.0;
    int epoch_items = 0;

    for (int start = 0; start < n_items && !stop; start += cfg.batch_size) {
      const int count = std::min(cfg.batch_size, n_items - start);
      std::vector<ItemResult> items(static_cast<size_t>(count));

      auto worker = [&](int thread_id, int n_threads) {
        for (int k = thread_id; k < count; k += n_threads) {
          items[static_cast<size_t>(k)] =
              run_item(model, cfg, scaled[static_cast<size_t>(order[static_cast<size_t>(start + k)])]);
        }
      };
      const int n_threads = std::min(cfg.threads, count);
      if (n_threads <= 1) {
        worker(0, 1);
      } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<size_t>(n_threads));
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker, t, n_threads);
        for (auto& t : pool) t.join();
      }

      // Reduce in window order so results do not depend on the thread count.
      model.params.zero_grads();
      double batch_pos = 0.0, batch_aux = 0.0;
      for (const ItemResult& item : items) {
        batch_pos += item.pos;
        batch_aux += item.aux;
        for (size_t pidx = 0; pidx < item.grads.size(); ++pidx) {
          if (item.grads[pidx].size() != 0) {
            model.params.entry(static_cast<int>(pidx)).grad += item.grads[pidx];
          }
        }
      }
      const double inv = 1.0 / static_cast<double>(count);
      for (size_t pidx = 0; pidx < model.params.count(); ++pidx) {
        model.params.entry(static_cast<int>(pidx)).grad *= inv;
      }
      if (!std::isfinite(batch_pos + batch_aux)) {
        throw NumericError("train: non-finite loss at optimizer step " +
                           std::to_string(result.steps + 1));
      }
      adam_step(model.params, adam, cfg, lr);
      result.steps += 1;
      epoch_pos += batch_pos;
      epoch_aux += batch_aux;
      epoch_items += count;
      if (cfg.max_steps > 0 && result.steps >= cfg.max_steps) stop = true;
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.loss_pos = epoch_pos / epoch_items;
    stats.loss_aux = epoch_aux / epoch_items;
    stats.lr = lr;
    stats.val_mpjpe = val_windows.empty()
                          ? std::numeric_limits<double>::quiet_NaN()
                          : evaluate(model, val_windows, cfg.input_scale).mean_mm;
    result.history.push_back(stats);
  }
  return result;
}

SplitIndices split_windows(size_t count, uint64_t seed) {
  std::vector<int> order(count);
  for (size_t i = 0; i < count; ++i) order[i] = static_cast<int>(i);
  Rng rng = Rng(seed).split("split");
  for (size_t i = count; i > 1; --i) {
    size_t j = static_cast<size_t>(rng.next_u64() % i);
    std::swap(order[i - 1], order[j]);
  }
  SplitIndices s;
  const size_t n_train = std::max<size_t>(1, static_cast<size_t>(0.8 * static_cast<double>(count)));
  const size_t n_val = static_cast<size_t>(0.1 * static_cast<double>(count));
  for (size_t i = 0; i < count; ++i) {
    if (i < n_train) {
      s.train.push_back(order[i]);
    } else if (i < n_train + n_val) {
      s.val.push_back(order[i]);
    } else {
      s.test.push_back(order[i]);
    }
  }
  return s;
}

EvalResult evaluate(const Model& model, std::span<const Window> windows, double input_scale) {
  if (windows.empty()) throw UsageError("evaluate: no windows");
  const int t_f = static_cast<int>(windows[0].future[0].cols());
  const int n_joints = static_cast<int>(windows[0].future.size());
  EvalResult r;
  r.per_horizon_mm.assign(static_cast<size_t>(t_f), 0.0);
  for (const Window& w : windows) {
    auto pred = predict_mm(model, w, input_scale);
    for (int t = 0; t < t_f; ++t) {
      double frame_sum = 0.0;
      for (int i = 0; i < n_joints; ++i) {
        frame_sum += (pred[static_cast<size_t>(i)].col(t) - w.future[static_cast<size_t>(i)].col(t)).norm();
      }
      r.per_horizon_mm[static_cast<size_t>(t)] += frame_sum / n_joints;
    }
  }
  double total = 0.0;
  for (double& v : r.per_horizon_mm) {
    v /= static_cast<double>(windows.size());
    total += v;
  }
  r.mean_mm = total / static_cast<double>(t_f);
  return r;
}

double bone_length_drift(const Model& model, std::span<const Window> windows,
                         std::span<const double> true_lengths, double input_scale) {
  if (windows.empty()) throw UsageError("bone_length_drift: no windows");
  const auto& topo = model.topo;
  double sum = 0.0;
  long terms = 0;
  for (const Window& w : windows) {
    auto pred = predict_mm(model, w, input_scale);
    for (int i = 0; i < topo.n_joints; ++i) {
      int p = topo.parent[static_cast<size_t>(i)];
      if (p == -1) continue;
      Row lengths = (pred[static_cast<size_t>(i)] - pred[static_cast<size_t>(p)]).colwise().norm();
      sum += (lengths.array() - true_lengths[static_cast<size_t>(i)]).abs().sum();
      terms += lengths.cols();
    }
  }
  return sum / static_cast<double>(terms);
}

// ---------------------------------------------------------------------------
// Ablation harness
// ---------------------------------------------------------------------------

namespace {

double train_and_score(const SkeletonTopology& topo, std::span<const Window> train_windows,
                       const ModelConfig& cfg, const TrainConfig& tcfg) {
  Model model = build_model(cfg, topo);
  train(model, tcfg, train_windows, {});
  return evaluate(model, train_windows, tcfg.input_scale).mean_mm;
}

}  // namespace

std::vector<FieldAblationRow> ablate_field(const SkeletonTopology& topo,
                                           std::span<const Window> train_windows,
                                           ModelConfig base, const TrainConfig& tcfg) {
  std::vector<FieldAblationRow> rows;
  const std::pair<const char*, FieldMode> modes[] = {
      {"full", FieldMode::kFull},
      {"spatial", FieldMode::kSpatialOnly},
      {"temporal", FieldMode::kTemporalOnly},
      {"off", FieldMode::kOff},
  };
  for (const auto& [name, mode] : modes) {
    ModelConfig cfg = base;
    cfg.field_mode = mode;
    rows.push_back({name, train_and_score(topo, train_windows, cfg, tcfg)});
  }
  return rows;
}

std::vector<GroupAblationRow> ablate_group(const SkeletonTopology& topo,
                                           std::span<const Window> train_windows,
                                           ModelConfig base, const TrainConfig& tcfg) {
  std::vector<GroupAblationRow> rows;
  rows.push_back({"grouped", train_and_score(topo, train_windows, base, tcfg)});

  std::vector<int> single;
  single.push_back(topo.root);
  for (int j : topo.order) {
    if (j != topo.root) single.push_back(j);
  }
  SkeletonTopology flat = build_topology(topo.parent, {single});
  rows.push_back({"single-group", train_and_score(flat, train_windows, base, tcfg)});
  return rows;
}

DkTiming ablate_dk_timing(int n_joints, int channels, int hidden, int repeats, uint64_t seed) {
  if (n_joints < 2 || repeats < 1) throw UsageError("dk timing: need >= 2 joints and >= 1 repeat");
  std::vector<int> parent(static_cast<size_t>(n_joints));
  std::vector<int> chain(static_cast<size_t>(n_joints));
  parent[0] = -1;
  for (int j = 0; j < n_joints; ++j) {
    chain[static_cast<size_t>(j)] = j;
    if (j > 0) parent[static_cast<size_t>(j)] = j - 1;
  }
  SkeletonTopology topo = build_topology(parent, {chain});

  ad::ParamStore store;
  GroupParams params = make_group_params(store, "dk_timing", topo, channels, hidden,
                                         /*inter_slice=*/false, Rng(seed));

  Rng rng = Rng(seed).split("features");
  auto slab = [&]() {
    Mat g(3 * n_joints, channels);
    for (Eigen::Index r = 0; r < g.rows(); ++r) {
      for (int c = 0; c < channels; ++c) g(r, c) = rng.normal();
    }
    return g;
  };
  Mat x = slab(), v = slab(), f = slab();

  DkTiming timing;
  timing.joints = n_joints;
  timing.channels = channels;
  timing.repeats = repeats;

  // Steady-state slab evaluation: joints split across two workers (they are
  // independent by construction), buffers reused between steps. A spin
  // handshake keeps the per-step synchronization cost in the nanoseconds.
  // The two variants are timed in interleaved batches and summarized by the
  // median batch so scheduler noise cancels.
  Mat out(3 * n_joints, channels);
  const int half = n_joints / 2;
  ParallelDkWorkspace ws_main, ws_worker;
  std::atomic<int> generation{0};
  std::atomic<int> done{0};
  std::atomic<bool> stop{false};
  std::thread worker([&]() {
    int seen = 0;
    while (!stop.load(std::memory_order_acquire)) {
      int gen = generation.load(std::memory_order_acquire);
      if (gen == seen) continue;
      seen = gen;
      parallel_dk_slab(store, params, topo, x, v, f, half, n_joints - half, ws_worker, out);
      done.fetch_add(1, std::memory_order_release);
    }
  });
  int expected = 0;
  auto parallel_step = [&]() {
    generation.fetch_add(1, std::memory_order_release);
    parallel_dk_slab(store, params, topo, x, v, f, 0, half, ws_main, out);
    ++expected;
    while (done.load(std::memory_order_acquire) != expected) {
    }
  };
  Mat iter_out(3 * n_joints, channels);
  auto iterative_step = [&]() { iterative_dk_slab(topo, x, v, f, kNormEps, iter_out); };

  const int batches = 9;
  const int per_batch = std::max(1, repeats / batches);
  auto run_batch = [&](auto&& fn) {
    auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < per_batch; ++i) fn();
    auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::micro>(t1 - t0).count() / per_batch;
  };

  for (int i = 0; i < 5; ++i) {
    parallel_step();
    iterative_step();
  }
  std::vector<double> parallel_us, iterative_us;
  for (int b = 0; b < batches; ++b) {
    parallel_us.push_back(run_batch(parallel_step));
    iterative_us.push_back(run_batch(iterative_step));
  }
  stop.store(true, std::memory_order_release);
  worker.join();

  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
  };
  timing.parallel_us = median(parallel_us);
  timing.iterative_us = median(iterative_us);
  return timing;
}

std::vector<LossAblationRow> ablate_loss(const SkeletonTopology& topo,
                                         std::span<const Window> train_windows,
                                         std::span<const Window> eval_windows,
                                         std::span<const double> bone_lengths, ModelConfig base,
                                         const TrainConfig& tcfg, std::span<const uint64_t> seeds) {
  std::vector<LossAblationRow> rows;
  for (uint64_t seed : seeds) {
    ModelConfig mcfg = base;
    mcfg.seed = seed;
    TrainConfig t = tcfg;
    t.seed = seed;
    LossAblationRow row;
    row.seed = seed;

    auto run_mode = [&](bool use_aux, bool bone_variant, double& drift_mm, double& mpjpe_mm) {
      TrainConfig local = t;
      local.use_aux = use_aux;
      local.bone_length_aux = bone_variant;
      Model model = build_model(mcfg, topo);
      train(model, local, train_windows, {});
      drift_mm = bone_length_drift(model, eval_windows, bone_lengths, local.input_scale);
      mpjpe_mm = evaluate(model, eval_windows, local.input_scale).mean_mm;
    };
    run_mode(false, false, row.drift_none_mm, row.mpjpe_none_mm);
    run_mode(true, false, row.drift_literal_mm, row.mpjpe_literal_mm);
    run_mode(true, true, row.drift_bone_mm, row.mpjpe_bone_mm);
    rows.push_back(row);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Equivariance check
// ---------------------------------------------------------------------------

EquivarianceReport check_equivariance(const Model& model, int trials, uint64_t seed) {
  if (trials < 1) throw UsageError("check_equivariance: trials must be >= 1");
  Rng rng = Rng(seed).split("equivariance");

  // Random history with an off-origin offset so the translation path is live.
  Vec3 offset(rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0));
  std::vector<Mat> past(static_cast<size_t>(model.cfg.n_joints));
  for (auto& joint : past) {
    joint.resize(3, model.cfg.t_h);
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < model.cfg.t_h; ++c) joint(r, c) = rng.normal() + offset(r);
    }
  }

  auto base = model_forward(model, past);
  double base_mag = 0.0;
  for (const Mat& b : base) base_mag = std::max(base_mag, b.cwiseAbs().maxCoeff());

  EquivarianceReport report;
  report.trials = trials;
  for (int k = 0; k < trials; ++k) {
    Mat3 r = sample_rotation(rng);
    const bool reflect = (k % 2 == 1);
    if (reflect) {
      r.col(2) *= -1.0;
      report.reflections += 1;
    }
    Vec3 t(rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0));

    std::vector<Mat> transformed;
    transformed.reserve(past.size());
    for (const Mat& joint : past) transformed.push_back((r * joint).colwise() + t);
    auto moved = model_forward(model, transformed);

    double dev = 0.0;
    for (size_t i = 0; i < base.size(); ++i) {
      Mat expected = (r * base[i]).colwise() + t;
      dev = std::max(dev, (moved[i] - expected).cwiseAbs().maxCoeff());
    }
    double rel = dev / base_mag;
    if (rel > report.max_rel_dev) {
      report.max_rel_dev = rel;
      report.worst_trial = k;
      report.worst_is_reflection = reflect;
    }
  }

  {
    Vec3 t(rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0));
    std::vector<Mat> transformed;
    transformed.reserve(past.size());
    for (const Mat& joint : past) transformed.push_back(joint.colwise() + t);
    auto moved = model_forward(model, transformed);
    double dev = 0.0;
    for (size_t i = 0; i < base.size(); ++i) {
      Mat expected = base[i].colwise() + Eigen::VectorXd(t);
      dev = std::max(dev, (moved[i] - expected).cwiseAbs().maxCoeff());
    }
    report.translation_only_dev = dev / base_mag;
  }
  return report;
}

}  // namespace ggmotion
