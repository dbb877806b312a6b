#pragma once

#include "ggmotion/data_io.hpp"
#include "ggmotion/geom.hpp"
#include "ggmotion/model.hpp"
#include "ggmotion/topology.hpp"

#include <vector>

namespace ggmtest {

using namespace ggmotion;

// ---------------------------------------------------------------------------
// Fixture topologies
// ---------------------------------------------------------------------------

inline SkeletonTopology chain_topology(int n) {
  std::vector<int> parent(static_cast<size_t>(n));
  std::vector<int> all(static_cast<size_t>(n));
  parent[0] = -1;
  for (int j = 0; j < n; ++j) {
    all[static_cast<size_t>(j)] = j;
    if (j > 0) parent[static_cast<size_t>(j)] = j - 1;
  }
  return build_topology(parent, {all});
}

/// Chain split into two groups rooted at joints 0 and n/2.
inline SkeletonTopology two_group_chain(int n) {
  std::vector<int> parent(static_cast<size_t>(n));
  parent[0] = -1;
  for (int j = 1; j < n; ++j) parent[static_cast<size_t>(j)] = j - 1;
  std::vector<int> a, b;
  for (int j = 0; j < n / 2; ++j) a.push_back(j);
  for (int j = n / 2; j < n; ++j) b.push_back(j);
  return build_topology(parent, {a, b});
}

/// The desk-scale 22-joint layout: spine, head, both legs, both arms.
inline SkeletonTopology h36m22_topology() {
  std::vector<int> parent = {-1, 0, 1, 2,          // spine 0-3
                             3,  4,                // head 4-5
                             0,  6, 7, 8,          // left leg 6-9
                             0,  10, 11, 12,       // right leg 10-13
                             2,  14, 15, 16,       // left arm 14-17
                             2,  18, 19, 20};      // right arm 18-21
  std::vector<std::vector<int>> groups = {
      {0, 1, 2, 3}, {4, 5}, {6, 7, 8, 9}, {10, 11, 12, 13}, {14, 15, 16, 17}, {18, 19, 20, 21}};
  return build_topology(parent, groups);
}

// ---------------------------------------------------------------------------
// Independent oracles
// ---------------------------------------------------------------------------

/// Cofactor-expansion cross product, kept separate from the library kernel.
inline Vec3 cofactor_cross(const Vec3& a, const Vec3& b) {
  return Vec3(a.y() * b.z() - a.z() * b.y(),
              a.z() * b.x() - a.x() * b.z(),
              a.x() * b.y() - a.y() * b.x());
}

/// All-pairs shortest paths by Floyd-Warshall over an explicit adjacency.
inline Eigen::MatrixXi floyd_warshall(const SkeletonTopology& topo) {
  const int n = topo.n_joints;
  const int inf = 1 << 20;
  Eigen::MatrixXi d = Eigen::MatrixXi::Constant(n, n, inf);
  for (int i = 0; i < n; ++i) d(i, i) = 0;
  for (int j = 0; j < n; ++j) {
    int p = topo.parent[static_cast<size_t>(j)];
    if (p != -1) {
      d(j, p) = 1;
      d(p, j) = 1;
    }
  }
  for (int k = 0; k < n; ++k) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        d(i, j) = std::min(d(i, j), d(i, k) + d(k, j));
      }
    }
  }
  return d;
}

/// Random tree on n joints: each joint's parent drawn among lower indices.
inline SkeletonTopology random_tree(int n, Rng& rng) {
  std::vector<int> parent(static_cast<size_t>(n));
  std::vector<int> all(static_cast<size_t>(n));
  parent[0] = -1;
  all[0] = 0;
  for (int j = 1; j < n; ++j) {
    parent[static_cast<size_t>(j)] = static_cast<int>(rng.next_u64() % static_cast<uint64_t>(j));
    all[static_cast<size_t>(j)] = j;
  }
  return build_topology(parent, {all});
}

inline Mat random_grid(Rng& rng, int rows, int cols) {
  Mat g(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) g(r, c) = rng.normal();
  }
  return g;
}

/// Independent symbolic count of every parameter grid in the model.
inline size_t closed_form_param_count(const ggmotion::ModelConfig& cfg, const SkeletonTopology& topo) {
  const size_t c = static_cast<size_t>(cfg.channels);
  const size_t h = static_cast<size_t>(cfg.hidden);
  const size_t n = static_cast<size_t>(cfg.n_joints);
  const size_t s = static_cast<size_t>(topo.n_groups());

  auto inv_mlp = [&](size_t in, size_t out) { return in * h + h + h * out; };
  auto eqmlp = [&](size_t vars, bool per_var_out) {
    size_t total = 3 * c * c;                 // q, k, v maps
    total += inv_mlp(vars * vars, vars * vars);  // mixing MLP
    total += per_var_out ? c * c : vars * c * c;  // output projection
    return total;
  };

  size_t per_block = 0;
  per_block += 2 * inv_mlp(c, c);  // phi_e, phi_m
  per_block += 2 * c * c;          // phi_lin_s, phi_lin_t
  per_block += h;                  // phi_att
  per_block += 2 * n * c;          // beta, gamma
  per_block += eqmlp(s, cfg.inter_slice);
  for (const auto& group : topo.groups) per_block += eqmlp(group.size(), true);
  per_block += eqmlp(3, false);  // acceleration update
  per_block += 2 * c * c;        // v_update, phi_c

  size_t total = static_cast<size_t>(cfg.t_h) * c + static_cast<size_t>(cfg.t_h - 1) * c;
  total += static_cast<size_t>(cfg.blocks) * per_block;
  total += c * static_cast<size_t>(cfg.t_f);
  return total;
}

// ---------------------------------------------------------------------------
// Planar double pendulum (rigid massless rods, point masses, gravity on -y)
// ---------------------------------------------------------------------------

struct PendulumConfig {
  double l1 = 1.0, l2 = 0.7;
  double m1 = 1.0, m2 = 1.0;
  double g = 9.81;
};

struct PendulumState {
  double th1, th2, w1, w2;
};

inline PendulumState pendulum_derivative(const PendulumConfig& c, const PendulumState& s) {
  const double delta = s.th1 - s.th2;
  const double den = 2.0 * c.m1 + c.m2 - c.m2 * std::cos(2.0 * s.th1 - 2.0 * s.th2);
  const double a1 =
      (-c.g * (2.0 * c.m1 + c.m2) * std::sin(s.th1) - c.m2 * c.g * std::sin(s.th1 - 2.0 * s.th2) -
       2.0 * std::sin(delta) * c.m2 *
           (s.w2 * s.w2 * c.l2 + s.w1 * s.w1 * c.l1 * std::cos(delta))) /
      (c.l1 * den);
  const double a2 = (2.0 * std::sin(delta) *
                     (s.w1 * s.w1 * c.l1 * (c.m1 + c.m2) + c.g * (c.m1 + c.m2) * std::cos(s.th1) +
                      s.w2 * s.w2 * c.l2 * c.m2 * std::cos(delta))) /
                    (c.l2 * den);
  return {s.w1, s.w2, a1, a2};
}

inline PendulumState pendulum_rk4_step(const PendulumConfig& c, const PendulumState& s, double dt) {
  auto advance = [&](const PendulumState& base, const PendulumState& k, double h) {
    return PendulumState{base.th1 + h * k.th1, base.th2 + h * k.th2, base.w1 + h * k.w1,
                         base.w2 + h * k.w2};
  };
  PendulumState k1 = pendulum_derivative(c, s);
  PendulumState k2 = pendulum_derivative(c, advance(s, k1, dt / 2));
  PendulumState k3 = pendulum_derivative(c, advance(s, k2, dt / 2));
  PendulumState k4 = pendulum_derivative(c, advance(s, k3, dt));
  return PendulumState{
      s.th1 + dt / 6 * (k1.th1 + 2 * k2.th1 + 2 * k3.th1 + k4.th1),
      s.th2 + dt / 6 * (k1.th2 + 2 * k2.th2 + 2 * k3.th2 + k4.th2),
      s.w1 + dt / 6 * (k1.w1 + 2 * k2.w1 + 2 * k3.w1 + k4.w1),
      s.w2 + dt / 6 * (k1.w2 + 2 * k2.w2 + 2 * k3.w2 + k4.w2),
  };
}

inline Vec3 pendulum_pos1(const PendulumConfig& c, const PendulumState& s) {
  return Vec3(c.l1 * std::sin(s.th1), -c.l1 * std::cos(s.th1), 0.0);
}
inline Vec3 pendulum_pos2(const PendulumConfig& c, const PendulumState& s) {
  return pendulum_pos1(c, s) + Vec3(c.l2 * std::sin(s.th2), -c.l2 * std::cos(s.th2), 0.0);
}
inline Vec3 pendulum_vel1(const PendulumConfig& c, const PendulumState& s) {
  return Vec3(c.l1 * s.w1 * std::cos(s.th1), c.l1 * s.w1 * std::sin(s.th1), 0.0);
}
inline Vec3 pendulum_vel2(const PendulumConfig& c, const PendulumState& s) {
  return pendulum_vel1(c, s) +
         Vec3(c.l2 * s.w2 * std::cos(s.th2), c.l2 * s.w2 * std::sin(s.th2), 0.0);
}
inline Vec3 pendulum_acc1(const PendulumConfig& c, const PendulumState& s) {
  PendulumState d = pendulum_derivative(c, s);
  return Vec3(c.l1 * (d.w1 * std::cos(s.th1) - s.w1 * s.w1 * std::sin(s.th1)),
              c.l1 * (d.w1 * std::sin(s.th1) + s.w1 * s.w1 * std::cos(s.th1)), 0.0);
}
inline Vec3 pendulum_acc2(const PendulumConfig& c, const PendulumState& s) {
  PendulumState d = pendulum_derivative(c, s);
  return pendulum_acc1(c, s) +
         Vec3(c.l2 * (d.w2 * std::cos(s.th2) - s.w2 * s.w2 * std::sin(s.th2)),
              c.l2 * (d.w2 * std::sin(s.th2) + s.w2 * s.w2 * std::cos(s.th2)), 0.0);
}

// ---------------------------------------------------------------------------
// Synthetic dataset shortcut
// ---------------------------------------------------------------------------

inline SynthConfig default_synth(const SkeletonTopology& topo, int frames, uint64_t seed) {
  SynthConfig cfg;
  cfg.topo = topo;
  const size_t n = static_cast<size_t>(topo.n_joints);
  cfg.bone_lengths.assign(n, 120.0);
  cfg.freq_hz.assign(n, 0.0);
  cfg.amplitude.assign(n, 0.0);
  Rng rng(seed);
  for (size_t j = 0; j < n; ++j) {
    cfg.bone_lengths[j] = 80.0 + 120.0 * rng.uniform();
    cfg.freq_hz[j] = 0.3 + 1.2 * rng.uniform();
    cfg.amplitude[j] = 0.3 + 0.8 * rng.uniform();
  }
  cfg.drift = Vec3(40.0, 10.0, -25.0);
  cfg.frames = frames;
  cfg.fps = 25.0;
  cfg.seed = seed;
  return cfg;
}

}  // namespace ggmtest
