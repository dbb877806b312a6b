#pragma once

#include "ggmotion/geom.hpp"

#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace ggmotion::ad {

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------
//
// Reverse-mode differentiation over whole grids, not scalars: every node
// value is a small dense matrix (3xC features, 1xC invariant rows, nxn Gram
// matrices, 1x1 losses). Recording an op evaluates it immediately, so a taped
// program produces bit-identical values to composing the eager kernels.

enum class Op : uint8_t {
  kLeaf,            // parameter (wants a gradient)
  kConst,           // data (no gradient)
  kAdd,             // A + B
  kSub,             // A - B
  kMatmul,          // A * B
  kHadamard,        // A .* B (same shape)
  kColScale,        // A (r x C) scaled per column by row s (1 x C)
  kColScaleInv,     // A (r x C) divided per column by row s (1 x C)
  kColNorm,         // 3xC -> 1xC column Euclidean norms
  kTanh,            // elementwise
  kSigmoid,         // elementwise
  kScaleScalar,     // A * s, s a 1x1 node
  kScaleConst,      // A * constant
  kSubColBcast,     // A (3xC) - v (3x1) broadcast over columns
  kAddColBcast,     // A (3xC) + v (3x1) broadcast over columns
  kRowMean,         // 3xC -> 3x1 mean over columns
  kSumAll,          // sum of entries -> 1x1
  kSumAbs,          // sum of |entries| -> 1x1
  kGram,            // q_0..q_{n-1}, k_0..k_{n-1} -> nxn of full inner products
  kRowL2Normalize,  // rows divided by max(row norm, eps)
  kReshape,         // row-major reinterpret
  kWeightedSum,     // sum_b M(b, a) * v_b for a fixed column a
  kConcatCols,      // horizontal concatenation
  kCrossCols,       // column-wise cross product
  kTakeRow,         // one row of a matrix as 1xC
};

struct Node {
  Mat value;
  Op op = Op::kConst;
  std::vector<int32_t> in;  // input node ids (for kWeightedSum the last is M)
  double aux = 0.0;         // constant scale / eps / row index, depending on op
  bool needs_grad = false;
};

class Tape {
 public:
  int constant(Mat v);
  int leaf(Mat v);

  int add(int a, int b);
  int sub(int a, int b);
  int matmul(int a, int b);
  int hadamard(int a, int b);
  int colscale(int a, int s);
  int colscale_inv(int a, int s);
  int colnorm(int a);
  int tanh(int a);
  int sigmoid(int a);
  int scale_scalar(int a, int s);
  int scale_const(int a, double c);
  int sub_colbcast(int a, int v);
  int add_colbcast(int a, int v);
  int row_mean(int a);
  int sum_all(int a);
  int sum_abs(int a);
  int gram(std::span<const int> q, std::span<const int> k);
  int row_l2_normalize(int a, double eps);
  int reshape(int a, int rows, int cols);
  int weighted_sum(std::span<const int> vs, int m, int col);
  int concat_cols(std::span<const int> parts);
  int cross_cols(int a, int b);
  int take_row(int a, int row);

  const Mat& val(int id) const { return nodes_[static_cast<size_t>(id)].value; }
  size_t size() const { return nodes_.size(); }

  /// Adjoint of every node w.r.t. a 1x1 loss node. Entries never touched by
  /// the sweep stay empty (gradient zero).
  std::vector<Mat> backward(int loss) const;

 private:
  int push(Node n);
  const Node& at(int id) const { return nodes_[static_cast<size_t>(id)]; }

  std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------
// Parameter store
// ---------------------------------------------------------------------------

enum class ParamConstraint : uint8_t {
  kNone,
  // Every column of the weight matrix sums to one. Keeps the learned centroid
  // map translation-covariant; re-applied after each optimizer step and after
  // loading single-precision checkpoints.
  kColumnsSumToOne,
};

struct ParamEntry {
  std::string path;
  Mat value;
  Mat grad;
  ParamConstraint constraint = ParamConstraint::kNone;
};

class ParamStore {
 public:
  /// Registers a parameter under a unique path; returns its index.
  int add(std::string path, Mat init, ParamConstraint c = ParamConstraint::kNone);

  int index_of(const std::string& path) const;  // -1 when absent
  ParamEntry& entry(int idx) { return entries_[static_cast<size_t>(idx)]; }
  const ParamEntry& entry(int idx) const { return entries_[static_cast<size_t>(idx)]; }
  Mat& value(const std::string& path);

  size_t count() const { return entries_.size(); }
  size_t scalar_count() const;
  const std::vector<ParamEntry>& entries() const { return entries_; }

  void zero_grads();
  void apply_constraints();

 private:
  std::vector<ParamEntry> entries_;
  std::unordered_map<std::string, int> index_;
};

/// Binds ParamStore entries to tape leaves on demand, so a program touches
/// only the parameters it actually uses.
struct TapeCtx {
  Tape& tape;
  const ParamStore& params;
  std::vector<int> param_nodes;  // param index -> node id, -1 until bound

  TapeCtx(Tape& t, const ParamStore& p)
      : tape(t), params(p), param_nodes(p.count(), -1) {}

  /// Tape node for parameter `idx` (bound lazily).
  int p(int idx);

  /// grad += adjoint for every bound parameter. `adjoints` comes from
  /// Tape::backward on this context's tape.
  void accumulate_grads(ParamStore& into, const std::vector<Mat>& adjoints) const;
};

// ---------------------------------------------------------------------------
// Gradient checking
// ---------------------------------------------------------------------------

struct GradCheckReport {
  int coords = 0;
  double max_rel_err = 0.0;  // |analytic - numeric| / max(|analytic|, |numeric|, floor)
  std::string worst_path;
  int worst_row = 0;
  int worst_col = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;

  bool pass(double rel_tol) const { return max_rel_err <= rel_tol; }
};

/// Compares tape gradients of `program` (which must return a 1x1 loss node)
/// against central finite differences over `n_coords` randomly sampled
/// parameter coordinates. The relative error denominator is floored at
/// abs_tol/rel_tol, so `pass(rel_tol)` is exactly the
/// max(rel_tol * |g|, abs_tol) criterion per coordinate.
GradCheckReport grad_check(const std::function<int(TapeCtx&)>& program, ParamStore& params,
                           Rng rng, int n_coords, double h = 1e-5, double rel_tol = 1e-4,
                           double abs_tol = 1e-7);

}  // namespace ggmotion::ad
