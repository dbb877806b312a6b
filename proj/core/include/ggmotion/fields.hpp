#pragma once

#include "ggmotion/autodiff.hpp"
#include "ggmotion/topology.hpp"

#include <span>
#include <string>
#include <vector>

namespace ggmotion {

/// ParamStore handles for one invariant MLP (in -> hidden, tanh, -> out).
struct MlpRef {
  int w1 = -1, b1 = -1, w2 = -1;
};

MlpRef make_invariant_mlp(ad::ParamStore& store, const std::string& prefix, int in, int hidden,
                          int out, const Rng& rng);

/// forward: x (1 x in) -> 1 x out on the tape.
int invariant_mlp_node(ad::TapeCtx& ctx, const MlpRef& m, int x);

/// Which radial-field components feed the motion force (ablation axis).
enum class FieldMode : uint8_t { kFull, kSpatialOnly, kTemporalOnly, kOff };

/// Per-block radial-field parameters.
struct FieldParams {
  MlpRef phi_e;      // C -> C' -> C, spatial edge weights
  MlpRef phi_m;      // C -> C' -> C, centroid edge weights
  int phi_lin_s = -1;  // C x C
  int phi_lin_t = -1;  // C x C
  int phi_att = -1;    // C' x 1, sigmoid applied after
  int beta = -1;       // N x C per-joint spatial scaling rows
  int gamma = -1;      // N x C per-joint temporal scaling rows
};

FieldParams make_field_params(ad::ParamStore& store, const std::string& prefix, int n_joints,
                              int channels, int hidden, const Rng& rng);

/// Spatial radial field: neighbor-edge aggregation gated by the hop-encoded
/// group attention. Translation-invariant (differences only).
std::vector<int> spatial_field(ad::TapeCtx& ctx, const FieldParams& p,
                               const SkeletonTopology& topo, const HopEmbedding& hopemb,
                               std::span<const int> x, std::span<const int> v);

/// Temporal radial field: joint-to-centroid aggregation.
std::vector<int> temporal_field(ad::TapeCtx& ctx, const FieldParams& p, std::span<const int> x,
                                std::span<const int> v, int centroid);

/// Elementwise sum of the two field outputs.
std::vector<int> total_force(ad::TapeCtx& ctx, std::span<const int> f_spatial,
                             std::span<const int> f_temporal);

}  // namespace ggmotion
