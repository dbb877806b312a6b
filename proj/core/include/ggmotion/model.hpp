#pragma once

#include "ggmotion/fields.hpp"
#include "ggmotion/group_dk.hpp"

#include <string>
#include <vector>

namespace ggmotion {

struct ModelConfig {
  int n_joints = 22;
  int t_h = 10;
  int t_f = 10;
  int channels = 16;
  int hidden = 32;  // even; also the hop-encoding width
  int blocks = 4;
  uint64_t seed = 1;

  // Ablation switches; defaults are the full model.
  FieldMode field_mode = FieldMode::kFull;
  bool use_inter = true;
  bool use_intra = true;
  bool inter_slice = false;
  DkMode dk_mode = DkMode::kParallel;
  bool centroid_refresh = true;

  void validate() const;
};

ModelConfig model_config_from_json(const std::string& text);
std::string model_config_to_json(const ModelConfig& cfg);

struct BlockParams {
  FieldParams field;
  GroupParams group;
};

struct Model {
  ModelConfig cfg;
  SkeletonTopology topo;
  HopEmbedding hopemb;
  ad::ParamStore params;

  int embed_pos = -1;  // T_h x C
  int embed_vel = -1;  // (T_h - 1) x C
  int head = -1;       // C x T_f
  std::vector<BlockParams> blocks;

  /// Debug hook for fault-injection checks: a nonzero vector is added to the
  /// coordinate axis of the embedded velocities, which breaks rotation
  /// equivariance on purpose. Never serialized.
  Vec3 fault_bias = Vec3::Zero();
};

/// Builds a seeded model; parameter values depend only on (seed, path).
Model build_model(const ModelConfig& cfg, SkeletonTopology topo);

/// Block-level state right after embedding: per-joint position and velocity
/// features plus the space-time centroid node (3x1).
struct EmbeddedState {
  std::vector<int> x;
  std::vector<int> v;
  int centroid = -1;
};

/// Embeds T_h raw frames per joint into position/velocity features. The
/// centroid is subtracted before the channel map and added back, which is what
/// carries translations through exactly.
EmbeddedState embed_tape(ad::TapeCtx& ctx, const Model& model, const std::vector<Mat>& past);

/// Records the full forward pass. `past` holds one 3 x T_h grid per joint in
/// model units; returns one 3 x T_f prediction node per joint.
std::vector<int> model_forward_tape(ad::TapeCtx& ctx, const Model& model,
                                    const std::vector<Mat>& past);

/// Convenience wrapper running the taped program on a scratch tape.
std::vector<Mat> model_forward(const Model& model, const std::vector<Mat>& past);

/// Exact number of learnable scalars.
size_t param_count(const Model& model);

// ---------------------------------------------------------------------------
// Checkpoints: magic "GGMP", version u16, record count u32, then per record
// path (u16 length + bytes), u32 rows, u32 cols, rows*cols little-endian f32.
// ---------------------------------------------------------------------------

void save_checkpoint(const Model& model, const std::string& path);

/// Loads values into an already-built model; every parameter must be present
/// with matching shape and no unknown records may appear. Constrained
/// parameters are re-projected after the single-precision round trip.
void load_checkpoint(Model& model, const std::string& path);

}  // namespace ggmotion
