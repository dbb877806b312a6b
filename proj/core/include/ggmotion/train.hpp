#pragma once

#include "ggmotion/data_io.hpp"
#include "ggmotion/model.hpp"

#include <span>
#include <string>
#include <vector>

namespace ggmotion {

struct TrainConfig {
  int epochs = 50;
  int batch_size = 64;
  double lr = 3e-4;
  double lr_decay = 0.88;  // multiplies the learning rate after every epoch
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double input_scale = 1e-3;  // mm -> model units at the input, inverted at the output
  uint64_t seed = 1;
  int stride = 1;  // windowing stride when slicing sequences
  bool use_aux = true;
  bool bone_length_aux = false;  // penalize |pred bone length - true bone length| instead
  int threads = 1;
  long max_steps = 0;  // stop after this many optimizer steps (0 = epochs only)

  void validate() const;
};

TrainConfig train_config_from_json(const std::string& text);
std::string train_config_to_json(const TrainConfig& cfg);

// ---------------------------------------------------------------------------
// Losses and metric
// ---------------------------------------------------------------------------

/// Mean of per-joint per-frame L2 errors: (1 / (T_f N)) sum_t sum_i |e_i(t)|_2.
double loss_pos(std::span<const Mat> pred, std::span<const Mat> truth);
int loss_pos_node(ad::TapeCtx& ctx, std::span<const int> pred, std::span<const Mat> truth);

/// Literal auxiliary loss: mean L1 distance between each predicted non-root
/// joint and the ground-truth position of its parent.
double loss_aux(std::span<const Mat> pred, std::span<const Mat> truth,
                const SkeletonTopology& topo);
int loss_aux_node(ad::TapeCtx& ctx, std::span<const int> pred, std::span<const Mat> truth,
                  const SkeletonTopology& topo);

/// Alternative auxiliary reading (off by default): mean absolute deviation of
/// predicted bone lengths from ground-truth bone lengths.
int bone_length_aux_node(ad::TapeCtx& ctx, std::span<const int> pred, std::span<const Mat> truth,
                         const SkeletonTopology& topo);

/// Same formula as loss_pos, reported in millimeters.
double mpjpe(std::span<const Mat> pred_mm, std::span<const Mat> truth_mm);

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

struct AdamState {
  std::vector<Mat> m;
  std::vector<Mat> v;
  long step = 0;
};

/// Bias-corrected Adam over every parameter, followed by constraint
/// re-projection (the centroid map keeps unit column sums).
void adam_step(ad::ParamStore& params, AdamState& state, const TrainConfig& cfg, double lr);

// ---------------------------------------------------------------------------
// Training and evaluation
// ---------------------------------------------------------------------------

struct EpochStats {
  int epoch = 0;  // 1-based
  double loss_pos = 0.0;
  double loss_aux = 0.0;
  double val_mpjpe = 0.0;  // NaN when no validation windows were given
  double lr = 0.0;
};

struct TrainResult {
  std::vector<EpochStats> history;
  long steps = 0;
};

/// Minimizes loss_pos (+ the auxiliary term unless disabled). Deterministic
/// for a fixed seed regardless of the thread count: per-item gradients are
/// reduced in window order. Throws NumericError when the loss goes non-finite.
TrainResult train(Model& model, const TrainConfig& cfg, std::span<const Window> train_windows,
                  std::span<const Window> val_windows);

/// 80/10/10 split by window index after a seeded shuffle.
struct SplitIndices {
  std::vector<int> train, val, test;
};
SplitIndices split_windows(size_t count, uint64_t seed);

struct EvalResult {
  std::vector<double> per_horizon_mm;  // MPJPE per future frame, mm
  double mean_mm = 0.0;
};

EvalResult evaluate(const Model& model, std::span<const Window> windows, double input_scale);

/// Mean |predicted bone length - true bone length| in mm over all windows,
/// future frames and bones.
double bone_length_drift(const Model& model, std::span<const Window> windows,
                         std::span<const double> true_lengths, double input_scale);

// ---------------------------------------------------------------------------
// Ablation harness
// ---------------------------------------------------------------------------

struct FieldAblationRow {
  std::string mode;  // full / spatial / temporal / off
  double final_train_mpjpe = 0.0;
};
std::vector<FieldAblationRow> ablate_field(const SkeletonTopology& topo,
                                           std::span<const Window> train_windows,
                                           ModelConfig base, const TrainConfig& tcfg);

struct GroupAblationRow {
  std::string name;  // grouped / single-group
  double final_train_mpjpe = 0.0;
};
std::vector<GroupAblationRow> ablate_group(const SkeletonTopology& topo,
                                           std::span<const Window> train_windows,
                                           ModelConfig base, const TrainConfig& tcfg);

/// Wall-clock per forward update of the acceleration stage on a chain
/// skeleton: the parallel form evaluates all joints as a handful of batched
/// matrix products, the iterative form walks the chain link by link.
struct DkTiming {
  double parallel_us = 0.0;
  double iterative_us = 0.0;
  int joints = 0;
  int channels = 0;
  int repeats = 0;
};
DkTiming ablate_dk_timing(int n_joints, int channels, int hidden, int repeats, uint64_t seed);

/// One row per seed, covering all three loss configurations: position loss
/// alone, plus the literal parent-anchored auxiliary, plus the bone-length
/// auxiliary variant. Drift and MPJPE are measured on `eval_windows`
/// (held-out data: a rigidity prior earns its keep off the training set).
/// On rigid synthetic data the literal form drags child joints toward their
/// parents' positions, so the bone-length variant is the one that realizes
/// the drift-reduction direction.
struct LossAblationRow {
  uint64_t seed = 0;
  double drift_none_mm = 0.0;
  double drift_literal_mm = 0.0;
  double drift_bone_mm = 0.0;
  double mpjpe_none_mm = 0.0;
  double mpjpe_literal_mm = 0.0;
  double mpjpe_bone_mm = 0.0;
};
std::vector<LossAblationRow> ablate_loss(const SkeletonTopology& topo,
                                         std::span<const Window> train_windows,
                                         std::span<const Window> eval_windows,
                                         std::span<const double> bone_lengths, ModelConfig base,
                                         const TrainConfig& tcfg, std::span<const uint64_t> seeds);

// ---------------------------------------------------------------------------
// Equivariance check
// ---------------------------------------------------------------------------

struct EquivarianceReport {
  int trials = 0;
  int reflections = 0;
  double max_rel_dev = 0.0;
  int worst_trial = -1;
  bool worst_is_reflection = false;
  double translation_only_dev = 0.0;
};

/// Runs `trials` random (R, t) transforms through the model on a seeded
/// random history; odd trials use reflections. Deviation is
/// max |F(RX + t) - (R F(X) + t)|_inf / max |F(X)|_inf.
EquivarianceReport check_equivariance(const Model& model, int trials, uint64_t seed);

}  // namespace ggmotion
