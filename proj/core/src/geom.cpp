#include "ggmotion/geom.hpp"

#include <cmath>

namespace ggmotion {

namespace {

inline uint64_t splitmix64(uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline uint64_t fnv1a(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

uint64_t Rng::next_u64() { return splitmix64(state_); }

double Rng::uniform() {
  // 53 mantissa bits -> [0, 1)
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  // u1 in (0, 1] so the log is finite.
  double u1 = 1.0 - uniform();
  double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

Rng Rng::split(std::string_view label) const {
  uint64_t s = state_ ^ fnv1a(label);
  // Two scrambling rounds so nearby labels land far apart.
  splitmix64(s);
  splitmix64(s);
  return Rng(s);
}

GeoFeature cross_cols(const GeoFeature& a, const GeoFeature& b) {
  if (a.rows() != 3 || b.rows() != 3 || a.cols() != b.cols()) {
    throw ConfigError("cross_cols: expected matching 3xC grids, got " +
                      std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " and " +
                      std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
  GeoFeature out(3, a.cols());
  for (Eigen::Index c = 0; c < a.cols(); ++c) {
    out.col(c) = Vec3(a.col(c)).cross(Vec3(b.col(c)));
  }
  return out;
}

Row col_norm(const GeoFeature& a) { return a.colwise().norm(); }

GeoFeature apply_linear(const LinearMap& m, const GeoFeature& a) {
  if (a.cols() != m.weights.rows()) {
    throw ConfigError("apply_linear: feature has " + std::to_string(a.cols()) +
                      " channels, map expects " + std::to_string(m.weights.rows()));
  }
  return a * m.weights;
}

Row invariant_mlp(const InvariantMlp& m, const Row& x) {
  Row h = x * m.w1 + m.b1;
  return h.array().tanh().matrix() * m.w2;
}

Mat row_l2_normalize(const Mat& m, double eps) {
  if (eps <= 0.0) throw ConfigError("row_l2_normalize: eps must be positive");
  Mat out = m;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out.row(i) /= std::max(m.row(i).norm(), eps);
  }
  return out;
}

Mat3 rotation_axis_angle(const Vec3& axis, double angle) {
  double n = axis.norm();
  Vec3 u = n > 0.0 ? Vec3(axis / n) : Vec3(0, 0, 1);
  Mat3 k;
  k << 0, -u.z(), u.y(), u.z(), 0, -u.x(), -u.y(), u.x(), 0;
  return Mat3::Identity() + std::sin(angle) * k + (1.0 - std::cos(angle)) * (k * k);
}

Mat3 sample_rotation(Rng& rng) {
  Vec3 axis(rng.normal(), rng.normal(), rng.normal());
  if (axis.norm() < 1e-12) axis = Vec3(0, 0, 1);
  double angle = rng.uniform(0.0, 2.0 * M_PI);
  return rotation_axis_angle(axis, angle);
}

Mat3 sample_orthogonal(Rng& rng) {
  Mat3 r = sample_rotation(rng);
  if (rng.uniform() < 0.5) {
    r.col(2) *= -1.0;  // mirror -> determinant -1
  }
  return r;
}

Mat init_weights(int fan_in, int fan_out, Rng rng) {
  double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Mat w(fan_in, fan_out);
  for (int i = 0; i < fan_in; ++i) {
    for (int j = 0; j < fan_out; ++j) {
      w(i, j) = rng.uniform(-bound, bound);
    }
  }
  return w;
}

}  // namespace ggmotion
