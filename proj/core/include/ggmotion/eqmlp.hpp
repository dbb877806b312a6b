#pragma once

#include "ggmotion/autodiff.hpp"
#include "ggmotion/geom.hpp"

#include <span>
#include <string>
#include <vector>

namespace ggmotion {

/// Covariance-attention MLP over n geometric variables.
///
/// Attention weights come from the row-normalized Gram matrix of the q/k
/// projections (a rotation-invariant quantity), so the output rotates exactly
/// with the inputs — the equivariant replacement for softmax attention.
struct EqMlpParams {
  int n = 0;
  int channels = 0;

  // ParamStore indices.
  int wq = -1, wk = -1, wv = -1;            // C x C each
  int mix_w1 = -1, mix_b1 = -1, mix_w2 = -1;  // n^2 -> hidden -> n^2
  int out_w = -1;  // (n*C) x C, or C x C when per_var_out

  /// When set, the shared output map is C x C and is applied to each of the
  /// n intermediates separately (one output per input variable) instead of to
  /// their channel concatenation.
  bool per_var_out = false;
};

/// Registers all parameters under `prefix` and returns the handle set.
EqMlpParams make_eqmlp(ad::ParamStore& store, const std::string& prefix, int n, int channels,
                       int hidden, bool per_var_out, const Rng& rng);

/// Eager Gram matrix: entry (a, b) is the full inner product (coordinate and
/// channel axes) of vars_q[a] with vars_k[b].
Mat gram(std::span<const GeoFeature> vars_q, std::span<const GeoFeature> vars_k);

/// Single-output forward (out map on the concatenated intermediates).
int eqmlp_forward(ad::TapeCtx& ctx, const EqMlpParams& p, std::span<const int> vars);

/// Per-variable forward: intermediate a maps onto input variable a and goes
/// through the shared C x C output projection. Requires per_var_out params.
std::vector<int> eqmlp_forward_per_var(ad::TapeCtx& ctx, const EqMlpParams& p,
                                       std::span<const int> vars);

}  // namespace ggmotion
