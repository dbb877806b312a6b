#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ggmotion {

using Mat = Eigen::MatrixXd;
using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;
using Row = Eigen::RowVectorXd;

/// A geometric feature: 3 coordinate rows by C channel columns. The row axis
/// rotates with the pose, the channel axis never does.
using GeoFeature = Mat;

// Error taxonomy shared by every module. The CLI maps these onto exit codes.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Guard for norm denominators throughout the library.
inline constexpr double kNormEps = 1e-8;

// ---------------------------------------------------------------------------
// Deterministic RNG
// ---------------------------------------------------------------------------

/// Counter-free 64-bit generator (splitmix64 core). Streams are reproducible
/// from (seed, label sequence) alone, so parameter initialization does not
/// depend on construction order.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64();

  /// Uniform in [0, 1).
  double uniform();
  /// Uniform in [lo, hi).
  double uniform(double lo, double hi);
  /// Standard normal via Box-Muller (two uniforms per call, no caching).
  double normal();

  /// Derive an independent stream for `label` without advancing this one.
  Rng split(std::string_view label) const;

 private:
  uint64_t state_;
};

// ---------------------------------------------------------------------------
// Fixed-shape kernels
// ---------------------------------------------------------------------------

/// Column-wise cross product: column c of the result is a[:,c] x b[:,c].
GeoFeature cross_cols(const GeoFeature& a, const GeoFeature& b);

/// Euclidean norm of each column; rotation-invariant row of C scalars.
Row col_norm(const GeoFeature& a);

/// Bias-free channel-mixing map, C_in x C_out. Acts on the channel axis only,
/// which is what keeps it rotation-equivariant.
struct LinearMap {
  Mat weights;

  int c_in() const { return static_cast<int>(weights.rows()); }
  int c_out() const { return static_cast<int>(weights.cols()); }
};

/// result = a * m.weights (the coordinate axis is untouched).
GeoFeature apply_linear(const LinearMap& m, const GeoFeature& a);

/// Two linear stages with tanh between and a bias on the hidden stage.
/// Only ever applied to rotation-invariant scalar rows, so the bias and the
/// nonlinearity cannot break equivariance.
struct InvariantMlp {
  Mat w1;   // in x hidden
  Row b1;   // 1 x hidden
  Mat w2;   // hidden x out
};

Row invariant_mlp(const InvariantMlp& m, const Row& x);

/// Divide each row by max(row L2 norm, eps); zero rows stay zero.
Mat row_l2_normalize(const Mat& m, double eps);

/// Rodrigues rotation about a (not necessarily unit) axis.
Mat3 rotation_axis_angle(const Vec3& axis, double angle);

/// Random element of O(3): a uniform axis-angle rotation, composed with a
/// coordinate reflection on a coin flip so both determinant branches occur.
Mat3 sample_orthogonal(Rng& rng);

/// Random rotation only (determinant +1).
Mat3 sample_rotation(Rng& rng);

/// Weight initialization: uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)].
Mat init_weights(int fan_in, int fan_out, Rng rng);

}  // namespace ggmotion
