// ggmotion: command-line surface over the motion-prediction library.
//
// Machine-readable JSON goes to stdout, human logs to stderr. Exit codes:
// 0 success, 1 internal error, 2 usage/shape/format error, 3 numerical
// failure (NaN loss, failed check).

#include "ggmotion/data_io.hpp"
#include "ggmotion/model.hpp"
#include "ggmotion/train.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace {

using namespace ggmotion;
using nlohmann::json;

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::optional<uint64_t> env_seed_override() {
  const char* env = std::getenv("GGMOTION_SEED");
  if (env == nullptr || *env == '\0') return std::nullopt;
  char* end = nullptr;
  unsigned long long v = std::strtoull(env, &end, 10);
  if (end == nullptr || *end != '\0') {
    throw UsageError("GGMOTION_SEED must be an unsigned integer");
  }
  return static_cast<uint64_t>(v);
}

/// Collected once at startup; flushed atomically when the run ends.
struct ManifestWriter {
  std::string command;
  json config = json::object();
  uint64_t seed = 0;
  std::vector<std::string> artifacts;
  std::string path;  // empty = do not write
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  void write(int exit_status) const {
    if (path.empty()) return;
    json m;
    m["command"] = command;
    m["config"] = config;
    m["seed"] = seed;
    m["artifacts"] = artifacts;
    m["wall_time_s"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    m["exit_status"] = exit_status;
    const std::string tmp = path + ".tmp";
    {
      std::ofstream out(tmp);
      out << m.dump(2) << "\n";
      if (!out) return;
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
  }
};

json eval_to_json(const EvalResult& result, double fps) {
  json out;
  json horizon = json::object();
  json horizon_ms = json::object();
  for (size_t k = 0; k < result.per_horizon_mm.size(); ++k) {
    horizon[std::to_string(k + 1)] = result.per_horizon_mm[k];
    double ms = 1000.0 * static_cast<double>(k + 1) / fps;
    if (std::abs(ms - std::round(ms)) < 1e-9) {
      horizon_ms[std::to_string(static_cast<long>(std::round(ms)))] = result.per_horizon_mm[k];
    }
  }
  out["mpjpe_per_horizon"] = horizon;
  out["mpjpe_per_horizon_ms"] = horizon_ms;
  out["mean"] = result.mean_mm;
  return out;
}

std::vector<Window> collect_windows(const std::vector<std::string>& data_paths, int t_h, int t_f,
                                    int stride) {
  std::vector<Window> all;
  for (const std::string& path : data_paths) {
    auto seq = load_sequence(path);
    auto ws = windows(seq, t_h, t_f, stride);
    std::cerr << "loaded " << path << ": " << seq.n_joints() << " joints, " << seq.n_frames()
              << " frames, " << ws.size() << " windows\n";
    all.insert(all.end(), ws.begin(), ws.end());
  }
  return all;
}

Model load_model_for(const std::string& topology_path, const std::string& model_config_path,
                     const std::string& ckpt_path, std::optional<uint64_t> seed) {
  auto topo = load_topology(topology_path);
  auto cfg = model_config_from_json(read_file(model_config_path));
  if (seed) cfg.seed = *seed;
  if (topo.n_joints != cfg.n_joints) {
    throw UsageError("topology has " + std::to_string(topo.n_joints) +
                     " joints but the model config expects " + std::to_string(cfg.n_joints));
  }
  Model model = build_model(cfg, std::move(topo));
  if (!ckpt_path.empty()) load_checkpoint(model, ckpt_path);
  return model;
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

int cmd_synth(const std::string& config_path, const std::string& out_path, ManifestWriter& mf) {
  auto cfg = synth_config_from_json(read_file(config_path));
  if (auto seed = env_seed_override()) cfg.seed = *seed;
  mf.seed = cfg.seed;
  mf.config = json::parse(synth_config_to_json(cfg));
  auto seq = synth_generate(cfg);
  save_sequence(seq, out_path);
  mf.artifacts.push_back(out_path);

  json out;
  out["n_joints"] = seq.n_joints();
  out["n_frames"] = seq.n_frames();
  out["fps"] = seq.fps;
  out["path"] = out_path;
  std::cout << out.dump() << "\n";
  return 0;
}

int cmd_train(const std::vector<std::string>& data, const std::string& topology_path,
              const std::string& model_config_path, const std::string& train_config_path,
              const std::string& out_path, const std::string& history_path, int threads,
              ManifestWriter& mf) {
  auto tcfg = train_config_from_json(read_file(train_config_path));
  if (threads > 0) tcfg.threads = threads;
  auto seed = env_seed_override();
  if (seed) tcfg.seed = *seed;

  Model model = load_model_for(topology_path, model_config_path, "", seed);
  if (model.cfg.dk_mode == DkMode::kIterative) {
    throw UsageError("dk_mode=iterative is forward-only (ablation); train with parallel or off");
  }
  mf.seed = tcfg.seed;
  mf.config["model"] = json::parse(model_config_to_json(model.cfg));
  mf.config["train"] = json::parse(train_config_to_json(tcfg));

  auto all = collect_windows(data, model.cfg.t_h, model.cfg.t_f, tcfg.stride);
  if (all.empty()) throw UsageError("no training windows in the given data");
  auto split = split_windows(all.size(), tcfg.seed);
  auto pick = [&](const std::vector<int>& idx) {
    std::vector<Window> out;
    out.reserve(idx.size());
    for (int i : idx) out.push_back(all[static_cast<size_t>(i)]);
    return out;
  };
  auto train_ws = pick(split.train);
  auto val_ws = pick(split.val);
  auto test_ws = pick(split.test);
  std::cerr << "split: " << train_ws.size() << " train / " << val_ws.size() << " val / "
            << test_ws.size() << " test\n";

  auto result = train(model, tcfg, train_ws, val_ws);

  const std::string hist = history_path.empty() ? out_path + ".history.jsonl" : history_path;
  {
    std::ofstream h(hist);
    for (const auto& e : result.history) {
      json line;
      line["epoch"] = e.epoch;
      line["loss_pos"] = e.loss_pos;
      line["loss_aux"] = e.loss_aux;
      if (std::isfinite(e.val_mpjpe)) {
        line["val_mpjpe"] = e.val_mpjpe;
      } else {
        line["val_mpjpe"] = nullptr;
      }
      line["lr"] = e.lr;
      h << line.dump() << "\n";
    }
  }
  save_checkpoint(model, out_path);
  mf.artifacts.push_back(out_path);
  mf.artifacts.push_back(hist);

  json out;
  out["steps"] = result.steps;
  out["epochs"] = result.history.size();
  out["final_loss_pos"] = result.history.back().loss_pos;
  out["final_loss_aux"] = result.history.back().loss_aux;
  if (!val_ws.empty()) out["final_val_mpjpe"] = result.history.back().val_mpjpe;
  if (!test_ws.empty()) out["test_mpjpe"] = evaluate(model, test_ws, tcfg.input_scale).mean_mm;
  out["checkpoint"] = out_path;
  out["history"] = hist;
  out["params"] = param_count(model);
  std::cout << out.dump() << "\n";
  return 0;
}

int cmd_predict(const std::string& ckpt, const std::string& topology_path,
                const std::string& model_config_path, const std::string& input_path,
                const std::string& out_path, double scale, ManifestWriter& mf) {
  Model model = load_model_for(topology_path, model_config_path, ckpt, std::nullopt);
  auto seq = load_sequence(input_path);
  if (seq.n_joints() != model.cfg.n_joints) {
    throw UsageError("input has " + std::to_string(seq.n_joints()) + " joints, model expects " +
                     std::to_string(model.cfg.n_joints));
  }
  if (seq.n_frames() < model.cfg.t_h) {
    throw UsageError("input has " + std::to_string(seq.n_frames()) + " frames, need at least " +
                     std::to_string(model.cfg.t_h));
  }
  mf.seed = model.cfg.seed;
  mf.config["model"] = json::parse(model_config_to_json(model.cfg));

  std::vector<Mat> past;
  past.reserve(seq.joints.size());
  for (const Mat& j : seq.joints) past.push_back(j.rightCols(model.cfg.t_h) * scale);
  auto pred = model_forward(model, past);

  MotionSequence out_seq;
  out_seq.fps = seq.fps;
  for (Mat& p : pred) out_seq.joints.push_back(p / scale);
  save_sequence(out_seq, out_path);
  mf.artifacts.push_back(out_path);

  json out;
  out["n_joints"] = out_seq.n_joints();
  out["n_frames"] = out_seq.n_frames();
  out["path"] = out_path;
  std::cout << out.dump() << "\n";
  return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& topology_path,
             const std::string& model_config_path, const std::vector<std::string>& data,
             int stride, double scale) {
  Model model = load_model_for(topology_path, model_config_path, ckpt, std::nullopt);
  auto ws = collect_windows(data, model.cfg.t_h, model.cfg.t_f, stride);
  if (ws.empty()) throw UsageError("no evaluation windows in the given data");
  double fps = load_sequence(data.front()).fps;
  auto result = evaluate(model, ws, scale);
  std::cout << eval_to_json(result, fps).dump() << "\n";
  return 0;
}

int cmd_check(const std::string& ckpt, const std::string& topology_path,
              const std::string& model_config_path, uint64_t seed, int trials, double tol,
              bool inject_fault) {
  auto env = env_seed_override();
  if (env) seed = *env;
  Model model = load_model_for(topology_path, model_config_path, ckpt,
                               ckpt.empty() ? std::optional<uint64_t>(seed) : std::nullopt);
  if (inject_fault) model.fault_bias = Vec3(0.05, -0.03, 0.07);
  auto report = check_equivariance(model, trials, seed);

  json out;
  out["trials"] = report.trials;
  out["reflections"] = report.reflections;
  out["max_rel_deviation"] = report.max_rel_dev;
  out["worst_trial"] = report.worst_trial;
  out["worst_is_reflection"] = report.worst_is_reflection;
  out["translation_only_deviation"] = report.translation_only_dev;
  out["tol"] = tol;
  out["pass"] = report.max_rel_dev <= tol;
  std::cout << out.dump() << "\n";
  return report.max_rel_dev <= tol ? 0 : 3;
}

int cmd_gradcheck(const std::string& topology_path, const std::string& model_config_path,
                  uint64_t seed, int coords, double tol) {
  auto env = env_seed_override();
  if (env) seed = *env;

  Model model = [&]() {
    if (!topology_path.empty() && !model_config_path.empty()) {
      return load_model_for(topology_path, model_config_path, "", seed);
    }
    // Built-in toy: a two-group chain small enough for fast finite differences.
    std::vector<int> parent = {-1, 0, 1, 2, 3, 4};
    SkeletonTopology topo = build_topology(parent, {{0, 1, 2}, {3, 4, 5}});
    ModelConfig cfg;
    cfg.n_joints = 6;
    cfg.t_h = 6;
    cfg.t_f = 4;
    cfg.channels = 8;
    cfg.hidden = 16;
    cfg.blocks = 2;
    cfg.seed = seed;
    return build_model(cfg, topo);
  }();

  // Deterministic toy batch from the model's own topology.
  SynthConfig synth;
  synth.topo = model.topo;
  const size_t n = static_cast<size_t>(model.topo.n_joints);
  synth.bone_lengths.assign(n, 150.0);
  synth.freq_hz.assign(n, 0.8);
  synth.amplitude.assign(n, 0.6);
  synth.drift = Vec3(30, -10, 20);
  synth.frames = model.cfg.t_h + model.cfg.t_f + 4;
  synth.seed = seed + 1;
  auto seq = synth_generate(synth);
  auto ws = windows(seq, model.cfg.t_h, model.cfg.t_f, 2);

  std::vector<Window> scaled;
  for (const Window& w : ws) {
    Window s;
    for (const Mat& m : w.past) s.past.push_back(m * 1e-3);
    for (const Mat& m : w.future) s.future.push_back(m * 1e-3);
    scaled.push_back(std::move(s));
  }
  auto program = [&](ad::TapeCtx& ctx) {
    int total = -1;
    for (const Window& w : scaled) {
      auto pred = model_forward_tape(ctx, model, w.past);
      int l = ctx.tape.add(loss_pos_node(ctx, pred, w.future),
                           loss_aux_node(ctx, pred, w.future, model.topo));
      total = total < 0 ? l : ctx.tape.add(total, l);
    }
    return ctx.tape.scale_const(total, 1.0 / static_cast<double>(scaled.size()));
  };
  auto report = ad::grad_check(program, model.params, Rng(seed).split("gradcheck"), coords);

  json out;
  out["coords"] = report.coords;
  out["max_rel_err"] = report.max_rel_err;
  out["worst_path"] = report.worst_path;
  out["worst_row"] = report.worst_row;
  out["worst_col"] = report.worst_col;
  out["analytic"] = report.worst_analytic;
  out["numeric"] = report.worst_numeric;
  out["tol"] = tol;
  out["pass"] = report.pass(tol);
  std::cout << out.dump() << "\n";
  return report.pass(tol) ? 0 : 3;
}

int cmd_ablate(const std::string& axis, uint64_t seed, int steps, ManifestWriter& mf) {
  auto env = env_seed_override();
  if (env) seed = *env;
  mf.seed = seed;

  // Desk-scale fixtures. Field and group variants separate most cleanly on
  // the 22-joint six-group body in the capacity-bound regime; the loss axis
  // uses a chain with held-out windows so the rigidity prior is measured off
  // the training set.
  auto body22 = []() {
    std::vector<int> parent = {-1, 0, 1, 2, 3, 4, 0, 6, 7, 8, 0, 10, 11, 12, 2, 14, 15, 16, 2, 18, 19, 20};
    std::vector<std::vector<int>> groups = {{0, 1, 2, 3},     {4, 5},           {6, 7, 8, 9},
                                            {10, 11, 12, 13}, {14, 15, 16, 17}, {18, 19, 20, 21}};
    return build_topology(parent, groups);
  };
  auto make_synth = [&](const SkeletonTopology& topo, int frames) {
    SynthConfig synth;
    synth.topo = topo;
    const size_t n = static_cast<size_t>(topo.n_joints);
    synth.bone_lengths.assign(n, 0.0);
    synth.freq_hz.assign(n, 0.0);
    synth.amplitude.assign(n, 0.0);
    Rng rng(seed);
    for (size_t j = 0; j < n; ++j) {
      synth.bone_lengths[j] = 80.0 + 120.0 * rng.uniform();
      synth.freq_hz[j] = 0.3 + 1.2 * rng.uniform();
      synth.amplitude[j] = 0.3 + 0.8 * rng.uniform();
    }
    synth.drift = Vec3(40, 10, -25);
    synth.frames = frames;
    synth.fps = 25.0;
    synth.seed = seed;
    return synth;
  };
  auto base_model_config = [&](int n_joints) {
    ModelConfig mcfg;
    mcfg.n_joints = n_joints;
    mcfg.t_h = 8;
    mcfg.t_f = 6;
    mcfg.channels = 8;
    mcfg.hidden = 16;
    mcfg.blocks = 2;
    mcfg.seed = seed;
    return mcfg;
  };
  auto base_train_config = [&](long max_steps, int batch) {
    TrainConfig tcfg;
    tcfg.epochs = 1000000;  // bounded by max_steps
    tcfg.batch_size = batch;
    tcfg.lr = 5e-3;
    tcfg.lr_decay = 1.0;
    tcfg.seed = seed;
    tcfg.use_aux = false;
    tcfg.max_steps = max_steps;
    return tcfg;
  };

  json out;
  out["axis"] = axis;
  out["seed"] = seed;
  if (axis == "field" || axis == "group") {
    SkeletonTopology topo = body22();
    auto synth = make_synth(topo, 100);
    auto ws = windows(synth_generate(synth), 8, 6, 2);
    ModelConfig mcfg = base_model_config(topo.n_joints);
    TrainConfig tcfg = base_train_config(steps > 0 ? steps : 80, 16);
    out["steps"] = tcfg.max_steps;
    if (axis == "field") {
      auto rows = ablate_field(topo, ws, mcfg, tcfg);
      for (const auto& r : rows) out["final_train_mpjpe_mm"][r.mode] = r.final_train_mpjpe;
    } else {
      auto rows = ablate_group(topo, ws, mcfg, tcfg);
      for (const auto& r : rows) out["final_train_mpjpe_mm"][r.name] = r.final_train_mpjpe;
    }
  } else if (axis == "dk") {
    auto timing = ablate_dk_timing(512, 8, 16, 270, seed);
    out["joints"] = timing.joints;
    out["channels"] = timing.channels;
    out["repeats"] = timing.repeats;
    out["parallel_us_per_step"] = timing.parallel_us;
    out["iterative_us_per_step"] = timing.iterative_us;
    out["parallel_faster"] = timing.parallel_us <= timing.iterative_us;
  } else if (axis == "loss") {
    std::vector<int> parent(8);
    parent[0] = -1;
    for (int j = 1; j < 8; ++j) parent[static_cast<size_t>(j)] = j - 1;
    SkeletonTopology topo = build_topology(parent, {{0, 1, 2, 3}, {4, 5, 6, 7}});
    auto synth = make_synth(topo, 80);
    auto all = windows(synth_generate(synth), 8, 6, 2);
    const size_t n_train = all.size() * 2 / 3;
    std::vector<Window> train_ws(all.begin(), all.begin() + static_cast<long>(n_train));
    std::vector<Window> held(all.begin() + static_cast<long>(n_train), all.end());
    ModelConfig mcfg = base_model_config(8);
    TrainConfig tcfg = base_train_config(steps > 0 ? steps : 100, 32);
    out["steps"] = tcfg.max_steps;
    out["train_windows"] = train_ws.size();
    out["heldout_windows"] = held.size();
    std::vector<uint64_t> seeds{seed, seed + 1, seed + 2};
    auto rows = ablate_loss(topo, train_ws, held, synth.bone_lengths, mcfg, tcfg, seeds);
    json list = json::array();
    for (const auto& r : rows) {
      json row;
      row["seed"] = r.seed;
      row["heldout_drift_mm"] = {{"none", r.drift_none_mm},
                                 {"literal_aux", r.drift_literal_mm},
                                 {"bone_length_aux", r.drift_bone_mm}};
      row["heldout_mpjpe_mm"] = {{"none", r.mpjpe_none_mm},
                                 {"literal_aux", r.mpjpe_literal_mm},
                                 {"bone_length_aux", r.mpjpe_bone_mm}};
      list.push_back(row);
    }
    out["rows"] = list;
  } else {
    throw UsageError("unknown ablation axis: " + axis + " (use field|group|dk|loss)");
  }
  mf.config = out;
  std::cout << out.dump() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GGMotion: equivariant group-graph motion prediction"};
  app.require_subcommand(1);

  ManifestWriter mf;
  {
    std::ostringstream cmdline;
    for (int i = 0; i < argc; ++i) cmdline << (i ? " " : "") << argv[i];
    mf.command = cmdline.str();
  }
  std::string manifest_path;
  app.add_option("--manifest", manifest_path, "write a run manifest to this path");

  // synth
  auto* synth = app.add_subcommand("synth", "generate a rigid synthetic sequence");
  std::string synth_config, synth_out;
  synth->add_option("--config", synth_config, "synthesis config JSON")->required();
  synth->add_option("--out", synth_out, "output GGS1 sequence path")->required();

  // train
  auto* train = app.add_subcommand("train", "train a model");
  std::vector<std::string> train_data;
  std::string train_topo, train_mcfg, train_tcfg, train_out, train_hist;
  int train_threads = 0;
  train->add_option("--data", train_data, "sequence files")->required()->expected(-1);
  train->add_option("--topology", train_topo, "topology JSON")->required();
  train->add_option("--model-config", train_mcfg, "model config JSON")->required();
  train->add_option("--train-config", train_tcfg, "train config JSON")->required();
  train->add_option("--out", train_out, "output checkpoint path")->required();
  train->add_option("--history", train_hist, "history JSONL path (default <out>.history.jsonl)");
  train->add_option("--threads", train_threads, "worker threads for batch items");

  // predict
  auto* predict = app.add_subcommand("predict", "predict future frames");
  std::string pred_ckpt, pred_topo, pred_mcfg, pred_in, pred_out;
  double pred_scale = 1e-3;
  predict->add_option("--ckpt", pred_ckpt, "checkpoint")->required();
  predict->add_option("--topology", pred_topo, "topology JSON")->required();
  predict->add_option("--model-config", pred_mcfg, "model config JSON")->required();
  predict->add_option("--input", pred_in, "input sequence")->required();
  predict->add_option("--out", pred_out, "output sequence")->required();
  predict->add_option("--scale", pred_scale, "input scale applied before the model");

  // eval
  auto* eval = app.add_subcommand("eval", "report MPJPE per horizon");
  std::string eval_ckpt, eval_topo, eval_mcfg;
  std::vector<std::string> eval_data;
  int eval_stride = 1;
  double eval_scale = 1e-3;
  eval->add_option("--ckpt", eval_ckpt, "checkpoint")->required();
  eval->add_option("--topology", eval_topo, "topology JSON")->required();
  eval->add_option("--model-config", eval_mcfg, "model config JSON")->required();
  eval->add_option("--data", eval_data, "sequence files")->required()->expected(-1);
  eval->add_option("--stride", eval_stride, "window stride");
  eval->add_option("--scale", eval_scale, "input scale");

  // check
  auto* check = app.add_subcommand("check", "equivariance check");
  std::string check_ckpt, check_topo, check_mcfg;
  uint64_t check_seed = 1;
  int check_trials = 100;
  double check_tol = 1e-9;
  bool check_fault = false;
  check->add_option("--ckpt", check_ckpt, "checkpoint (omit to test a fresh seeded model)");
  check->add_option("--topology", check_topo, "topology JSON")->required();
  check->add_option("--model-config", check_mcfg, "model config JSON")->required();
  check->add_option("--seed", check_seed, "seed for the fresh model and transforms");
  check->add_option("--trials", check_trials, "number of random transforms");
  check->add_option("--tol", check_tol, "relative deviation tolerance");
  check->add_flag("--inject-fault", check_fault,
                  "add a coordinate-axis bias to demonstrate a detectable violation");

  // gradcheck
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient check");
  std::string gc_topo, gc_mcfg;
  uint64_t gc_seed = 1;
  int gc_coords = 200;
  double gc_tol = 1e-4;
  gradcheck->add_option("--topology", gc_topo, "topology JSON (default: built-in toy)");
  gradcheck->add_option("--model-config", gc_mcfg, "model config JSON (default: built-in toy)");
  gradcheck->add_option("--seed", gc_seed, "seed");
  gradcheck->add_option("--coords", gc_coords, "sampled parameter coordinates");
  gradcheck->add_option("--tol", gc_tol, "relative error tolerance");

  // ablate
  auto* ablate = app.add_subcommand("ablate", "desk-scale ablation harness");
  std::string ablate_axis;
  uint64_t ablate_seed = 1;
  int ablate_steps = 0;
  ablate->add_option("--axis", ablate_axis, "field|group|dk|loss")->required();
  ablate->add_option("--seed", ablate_seed, "seed");
  ablate->add_option("--steps", ablate_steps, "optimizer steps per variant (0 = per-axis default)");

  CLI11_PARSE(app, argc, argv);

  int status = 0;
  try {
    if (synth->parsed()) {
      if (manifest_path.empty()) manifest_path = synth_out + ".manifest.json";
      mf.path = manifest_path;
      status = cmd_synth(synth_config, synth_out, mf);
    } else if (train->parsed()) {
      if (manifest_path.empty()) manifest_path = train_out + ".manifest.json";
      mf.path = manifest_path;
      status = cmd_train(train_data, train_topo, train_mcfg, train_tcfg, train_out, train_hist,
                         train_threads, mf);
    } else if (predict->parsed()) {
      if (manifest_path.empty()) manifest_path = pred_out + ".manifest.json";
      mf.path = manifest_path;
      status = cmd_predict(pred_ckpt, pred_topo, pred_mcfg, pred_in, pred_out, pred_scale, mf);
    } else if (eval->parsed()) {
      mf.path = manifest_path;
      status = cmd_eval(eval_ckpt, eval_topo, eval_mcfg, eval_data, eval_stride, eval_scale);
    } else if (check->parsed()) {
      mf.path = manifest_path;
      status = cmd_check(check_ckpt, check_topo, check_mcfg, check_seed, check_trials, check_tol,
                         check_fault);
    } else if (gradcheck->parsed()) {
      mf.path = manifest_path;
      status = cmd_gradcheck(gc_topo, gc_mcfg, gc_seed, gc_coords, gc_tol);
    } else if (ablate->parsed()) {
      mf.path = manifest_path;
      status = cmd_ablate(ablate_axis, ablate_seed, ablate_steps, mf);
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    status = 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    status = 2;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    status = 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    status = 3;
  } catch (const DomainError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    status = 3;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    status = 1;
  }
  mf.write(status);
  return status;
}
