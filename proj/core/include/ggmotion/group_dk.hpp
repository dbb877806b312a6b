#pragma once

#include "ggmotion/eqmlp.hpp"
#include "ggmotion/topology.hpp"

#include <span>
#include <string>
#include <vector>

namespace ggmotion {

/// How joint accelerations are derived from forces (ablation axis).
enum class DkMode : uint8_t { kParallel, kIterative, kOff };

/// Per-block interaction and propagation parameters.
struct GroupParams {
  EqMlpParams inter;                // n = S over group resultant forces
  std::vector<EqMlpParams> intra;   // one per group, n = |G_s|, per-variable out
  EqMlpParams dk;                   // n = 3 over [f, r, v], shared across joints
  int v_update = -1;                // C x C velocity update map
  int phi_c = -1;                   // C x C centroid map, columns sum to one

  /// Alternative inter-group residual: each joint receives its own group's
  /// slice of the S intermediates instead of the shared output.
  bool inter_slice = false;
};

GroupParams make_group_params(ad::ParamStore& store, const std::string& prefix,
                              const SkeletonTopology& topo, int channels, int hidden,
                              bool inter_slice, const Rng& rng);

/// Adds the inter-group interaction over group resultant forces residually.
std::vector<int> inter_group(ad::TapeCtx& ctx, const GroupParams& p, const SkeletonTopology& topo,
                             std::span<const int> f);

/// Adds each group's covariance-attention deltas to its members residually.
std::vector<int> intra_group(ad::TapeCtx& ctx, const GroupParams& p, const SkeletonTopology& topo,
                             std::span<const int> f);

/// Parallel acceleration update: a_j = f_j - phi_eq([f_j, r_ij, v_ij]) with
/// r, v differences to the parent (zeros at the global root). Every joint is
/// independent of the others.
std::vector<int> parallel_dk(ad::TapeCtx& ctx, const GroupParams& p, const SkeletonTopology& topo,
                             std::span<const int> f, std::span<const int> x,
                             std::span<const int> v);

/// Taped iterative propagation (root to leaves) used by the ablation harness.
/// Denominators are softened with kNormEps^2 so degenerate links stay finite.
std::vector<int> iterative_dk_tape(ad::TapeCtx& ctx, const SkeletonTopology& topo,
                                   std::span<const int> f, std::span<const int> x,
                                   std::span<const int> v);

/// Kinematic integration: V' = V + v_update(a); X' = X + V'.
void kinematics_update(ad::TapeCtx& ctx, const GroupParams& p, std::span<const int> a,
                       std::vector<int>& x, std::vector<int>& v);

/// Learned centroid refresh: mean over joints and channels of phi_c(X') per
/// coordinate axis. Returns a 3x1 node.
int centroid_update(ad::TapeCtx& ctx, const GroupParams& p, const SkeletonTopology& topo,
                    std::span<const int> x_next);

// ---------------------------------------------------------------------------
// Eager physics propagation
// ---------------------------------------------------------------------------

/// Sequential rigid-link acceleration propagation along a parent-to-leaf
/// chain:
///   alpha = r x (f_j - a_i) / |r|^2,  omega = r x v / |r|^2,
///   a_j   = a_i + alpha x r + omega x v.
/// Throws DomainError when any link column norm is <= eps. Returns one
/// acceleration per chain joint, in chain order.
std::vector<GeoFeature> iterative_dk_chain(const GeoFeature& a_root, std::span<const int> chain,
                                           std::span<const GeoFeature> x,
                                           std::span<const GeoFeature> v,
                                           std::span<const GeoFeature> f, double eps = kNormEps);

/// Same propagation over a whole tree in root-to-leaf order with
/// a_root = f_root. Used for wall-clock comparison against the parallel path.
std::vector<GeoFeature> iterative_dk_tree(const SkeletonTopology& topo,
                                          std::span<const GeoFeature> x,
                                          std::span<const GeoFeature> v,
                                          std::span<const GeoFeature> f, double eps = kNormEps);

/// Reusable buffers for parallel_dk_eager so steady-state steps do not pay
/// for allocation.
struct ParallelDkWorkspace {
  Mat z, q, k, val, gram_flat, hidden, mixed, cat, delta;
  Eigen::VectorXd rowsum, nrm, scale;
};

/// Batched eager evaluation of the parallel update: all joints are stacked
/// into a handful of large matrix products (possible precisely because the
/// parallel formulation has no cross-joint dependency). `first`/`count`
/// restrict the evaluation to a joint range so independent ranges can run on
/// separate threads.
void parallel_dk_eager_range(const ad::ParamStore& store, const GroupParams& p,
                             const SkeletonTopology& topo, std::span<const GeoFeature> x,
                             std::span<const GeoFeature> v, std::span<const GeoFeature> f,
                             int first, int count, ParallelDkWorkspace& ws,
                             std::vector<GeoFeature>& out);

std::vector<GeoFeature> parallel_dk_eager(const ad::ParamStore& store, const GroupParams& p,
                                          const SkeletonTopology& topo,
                                          std::span<const GeoFeature> x,
                                          std::span<const GeoFeature> v,
                                          std::span<const GeoFeature> f);

// Contiguous-layout evaluation for the timing harness: rows [3j, 3j+3) of
// each slab hold joint j's grid. Same arithmetic as the per-joint paths
// (covered by equivalence tests); the parallel form runs as pure slab math
// with no per-joint dispatch, which the chain-bound iterative form cannot do.
void parallel_dk_slab(const ad::ParamStore& store, const GroupParams& p,
                      const SkeletonTopology& topo, const Mat& x, const Mat& v, const Mat& f,
                      int first, int count, ParallelDkWorkspace& ws, Mat& out);

void iterative_dk_slab(const SkeletonTopology& topo, const Mat& x, const Mat& v, const Mat& f,
                       double eps, Mat& out);

}  // namespace ggmotion
