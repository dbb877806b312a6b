#include "ggmotion/group_dk.hpp"

#include <array>
#include <cmath>

namespace ggmotion {

GroupParams make_group_params(ad::ParamStore& store, const std::string& prefix,
                              const SkeletonTopology& topo, int channels, int hidden,
                              bool inter_slice, const Rng& rng) {
  GroupParams p;
  p.inter_slice = inter_slice;
  p.inter = make_eqmlp(store, prefix + ".inter", topo.n_groups(), channels, hidden,
                       /*per_var_out=*/inter_slice, rng);
  p.intra.reserve(topo.groups.size());
  for (size_t s = 0; s < topo.groups.size(); ++s) {
    p.intra.push_back(make_eqmlp(store, prefix + ".intra." + std::to_string(s),
                                 static_cast<int>(topo.groups[s].size()), channels, hidden,
                                 /*per_var_out=*/true, rng));
  }
  p.dk = make_eqmlp(store, prefix + ".dk", 3, channels, hidden, /*per_var_out=*/false, rng);
  p.v_update =
      store.add(prefix + ".v_update", init_weights(channels, channels, rng.split(prefix + ".v_update")));
  p.phi_c = store.add(prefix + ".phi_c", init_weights(channels, channels, rng.split(prefix + ".phi_c")),
                      ad::ParamConstraint::kColumnsSumToOne);
  return p;
}

namespace {

std::vector<int> group_sums(ad::TapeCtx& ctx, const SkeletonTopology& topo,
                            std::span<const int> f) {
  std::vector<int> sums(topo.groups.size(), -1);
  for (size_t s = 0; s < topo.groups.size(); ++s) {
    int acc = -1;
    for (int j : topo.groups[s]) {
      acc = acc < 0 ? f[static_cast<size_t>(j)] : ctx.tape.add(acc, f[static_cast<size_t>(j)]);
    }
    sums[s] = acc;
  }
  return sums;
}

}  // namespace

std::vector<int> inter_group(ad::TapeCtx& ctx, const GroupParams& p, const SkeletonTopology& topo,
                             std::span<const int> f) {
  auto sums = group_sums(ctx, topo, f);
  std::vector<int> out(f.size());
  if (p.inter_slice) {
    auto deltas = eqmlp_forward_per_var(ctx, p.inter, sums);
    for (int j : topo.order) {
      out[static_cast<size_t>(j)] = ctx.tape.add(
          f[static_cast<size_t>(j)], deltas[static_cast<size_t>(topo.group_of[static_cast<size_t>(j)])]);
    }
  } else {
    int delta = eqmlp_forward(ctx, p.inter, sums);
    for (int j : topo.order) {
      out[static_cast<size_t>(j)] = ctx.tape.add(f[static_cast<size_t>(j)], delta);
    }
  }
  return out;
}

std::vector<int> intra_group(ad::TapeCtx& ctx, const GroupParams& p, const SkeletonTopology& topo,
                             std::span<const int> f) {
  std::vector<int> out(f.size());
  for (size_t s = 0; s < topo.groups.size(); ++s) {
    std::vector<int> members;
    members.reserve(topo.groups[s].size());
    for (int j : topo.groups[s]) members.push_back(f[static_cast<size_t>(j)]);
    auto deltas = eqmlp_forward_per_var(ctx, p.intra[s], members);
    for (size_t k = 0; k < topo.groups[s].size(); ++k) {
      int j = topo.groups[s][k];
      out[static_cast<size_t>(j)] = ctx.tape.add(f[static_cast<size_t>(j)], deltas[k]);
    }
  }
  return out;
}

std::vector<int> parallel_dk(ad::TapeCtx& ctx, const GroupParams& p, const SkeletonTopology& topo,
                             std::span<const int> f, std::span<const int> x,
                             std::span<const int> v) {
  auto& t = ctx.tape;
  const Eigen::Index channels = t.val(f[0]).cols();
  int zero = -1;
  std::vector<int> out(f.size());
  for (int j : topo.order) {
    const size_t js = static_cast<size_t>(j);
    int r_node, v_node;
    if (topo.parent[js] == -1) {
      if (zero < 0) zero = t.constant(Mat::Zero(3, channels));
      r_node = zero;
      v_node = zero;
    } else {
      const size_t ps = static_cast<size_t>(topo.parent[js]);
      r_node = t.sub(x[js], x[ps]);
      v_node = t.sub(v[js], v[ps]);
    }
    std::array<int, 3> vars{f[js], r_node, v_node};
    out[js] = t.sub(f[js], eqmlp_forward(ctx, p.dk, vars));
  }
  return out;
}

std::vector<int> iterative_dk_tape(ad::TapeCtx& ctx, const SkeletonTopology& topo,
                                   std::span<const int> f, std::span<const int> x,
                                   std::span<const int> v) {
  auto& t = ctx.tape;
  const Eigen::Index channels = t.val(f[0]).cols();
  int soft = t.constant(Mat::Constant(1, channels, kNormEps * kNormEps));
  std::vector<int> out(f.size(), -1);
  // Parents precede children in BFS order from the root.
  std::vector<int> bfs{topo.root};
  for (size_t q = 0; q < bfs.size(); ++q) {
    for (int nb : topo.neighbors[static_cast<size_t>(bfs[q])]) {
      if (nb != topo.parent[static_cast<size_t>(bfs[q])]) bfs.push_back(nb);
    }
  }
  for (int j : bfs) {
    const size_t js = static_cast<size_t>(j);
    if (topo.parent[js] == -1) {
      out[js] = f[js];
      continue;
    }
    const size_t ps = static_cast<size_t>(topo.parent[js]);
    int r = t.sub(x[js], x[ps]);
    int rel_v = t.sub(v[js], v[ps]);
    int nrm = t.colnorm(r);
    int denom = t.add(t.hadamard(nrm, nrm), soft);
    int alpha = t.colscale_inv(t.cross_cols(r, t.sub(f[js], out[ps])), denom);
    int omega = t.colscale_inv(t.cross_cols(r, rel_v), denom);
    out[js] = t.add(out[ps], t.add(t.cross_cols(alpha, r), t.cross_cols(omega, rel_v)));
  }
  return out;
}

void kinematics_update(ad::TapeCtx& ctx, const GroupParams& p, std::span<const int> a,
                       std::vector<int>& x, std::vector<int>& v) {
  auto& t = ctx.tape;
  for (size_t i = 0; i < a.size(); ++i) {
    v[i] = t.add(v[i], t.matmul(a[i], ctx.p(p.v_update)));
    x[i] = t.add(x[i], v[i]);
  }
}

int centroid_update(ad::TapeCtx& ctx, const GroupParams& p, const SkeletonTopology& topo,
                    std::span<const int> x_next) {
  auto& t = ctx.tape;
  int acc = -1;
  for (int j : topo.order) {
    int per_joint = t.row_mean(t.matmul(x_next[static_cast<size_t>(j)], ctx.p(p.phi_c)));
    acc = acc < 0 ? per_joint : t.add(acc, per_joint);
  }
  return t.scale_const(acc, 1.0 / static_cast<double>(topo.n_joints));
}

// ---------------------------------------------------------------------------
// Eager propagation
// ---------------------------------------------------------------------------

namespace {

/// One Eq-style link step with exact denominators.
GeoFeature propagate_link(const GeoFeature& a_parent, const GeoFeature& r, const GeoFeature& v,
                          const GeoFeature& f_child, double eps) {
  Row n = col_norm(r);
  for (Eigen::Index c = 0; c < n.cols(); ++c) {
    if (n(c) <= eps) {
      throw DomainError("iterative propagation: degenerate link (|r| = " + std::to_string(n(c)) +
                        " <= eps in channel " + std::to_string(c) + ")");
    }
  }
  Row n2 = n.cwiseProduct(n);
  GeoFeature alpha = (cross_cols(r, f_child - a_parent).array().rowwise() / n2.array()).matrix();
  GeoFeature omega = (cross_cols(r, v).array().rowwise() / n2.array()).matrix();
  return a_parent + cross_cols(alpha, r) + cross_cols(omega, v);
}

}  // namespace

std::vector<GeoFeature> iterative_dk_chain(const GeoFeature& a_root, std::span<const int> chain,
                                           std::span<const GeoFeature> x,
                                           std::span<const GeoFeature> v,
                                           std::span<const GeoFeature> f, double eps) {
  if (chain.empty()) throw UsageError("iterative_dk_chain: empty chain");
  std::vector<GeoFeature> acc;
  acc.reserve(chain.size());
  acc.push_back(a_root);
  for (size_t k = 1; k < chain.size(); ++k) {
    const size_t i = static_cast<size_t>(chain[k - 1]);
    const size_t j = static_cast<size_t>(chain[k]);
    GeoFeature r = x[j] - x[i];
    GeoFeature rel_v = v[j] - v[i];
    acc.push_back(propagate_link(acc.back(), r, rel_v, f[j], eps));
  }
  return acc;
}

std::vector<GeoFeature> iterative_dk_tree(const SkeletonTopology& topo,
                                          std::span<const GeoFeature> x,
                                          std::span<const GeoFeature> v,
                                          std::span<const GeoFeature> f, double eps) {
  std::vector<GeoFeature> acc(static_cast<size_t>(topo.n_joints));
  std::vector<int> bfs{topo.root};
  for (size_t q = 0; q < bfs.size(); ++q) {
    for (int nb : topo.neighbors[static_cast<size_t>(bfs[q])]) {
      if (nb != topo.parent[static_cast<size_t>(bfs[q])]) bfs.push_back(nb);
    }
  }
  for (int j : bfs) {
    const size_t js = static_cast<size_t>(j);
    if (topo.parent[js] == -1) {
      acc[js] = f[js];
      continue;
    }
    const size_t ps = static_cast<size_t>(topo.parent[js]);
    acc[js] = propagate_link(acc[ps], x[js] - x[ps], v[js] - v[ps], f[js], eps);
  }
  return acc;
}

void parallel_dk_eager_range(const ad::ParamStore& store, const GroupParams& p,
                             const SkeletonTopology& topo, std::span<const GeoFeature> x,
                             std::span<const GeoFeature> v, std::span<const GeoFeature> f,
                             int first, int count, ParallelDkWorkspace& ws,
                             std::vector<GeoFeature>& out) {
  const int n = count;
  const Eigen::Index c = f[0].cols();
  const Mat& wq = store.entry(p.dk.wq).value;
  const Mat& wk = store.entry(p.dk.wk).value;
  const Mat& wv = store.entry(p.dk.wv).value;
  const Mat& mw1 = store.entry(p.dk.mix_w1).value;
  const Mat& mb1 = store.entry(p.dk.mix_b1).value;
  const Mat& mw2 = store.entry(p.dk.mix_w2).value;
  const Mat& ow = store.entry(p.dk.out_w).value;

  // Slot-major stacks: rows [3j .. 3j+2] of slot s hold variable s of joint
  // (first + j); slot 0 = f, slot 1 = r, slot 2 = v.
  ws.z.resize(9 * n, c);
  for (int j = 0; j < n; ++j) {
    const size_t js = static_cast<size_t>(first + j);
    ws.z.middleRows(3 * j, 3) = f[js];
    if (topo.parent[js] == -1) {
      ws.z.middleRows(3 * n + 3 * j, 3).setZero();
      ws.z.middleRows(6 * n + 3 * j, 3).setZero();
    } else {
      const size_t ps = static_cast<size_t>(topo.parent[js]);
      ws.z.middleRows(3 * n + 3 * j, 3) = x[js] - x[ps];
      ws.z.middleRows(6 * n + 3 * j, 3) = v[js] - v[ps];
    }
  }
  ws.q.noalias() = ws.z * wq;
  ws.k.noalias() = ws.z * wk;
  ws.val.noalias() = ws.z * wv;

  // Gram entries for all joints at once: column (a*3 + b) of `gram_flat` is
  // <q_a, k_b> per joint. The row sums fold the product expression directly,
  // no slab-sized temporary.
  ws.gram_flat.resize(n, 9);
  ws.rowsum.resize(3 * n);
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      ws.rowsum.noalias() = ws.q.middleRows(3 * n * a, 3 * n)
                                .cwiseProduct(ws.k.middleRows(3 * n * b, 3 * n))
                                .rowwise()
                                .sum();
      for (int j = 0; j < n; ++j) {
        ws.gram_flat(j, 3 * a + b) = ws.rowsum(3 * j) + ws.rowsum(3 * j + 1) + ws.rowsum(3 * j + 2);
      }
    }
  }
  ws.nrm.resize(n);
  for (int a = 0; a < 3; ++a) {
    ws.nrm.noalias() = ws.gram_flat.middleCols(3 * a, 3).rowwise().norm();
    for (int j = 0; j < n; ++j) {
      ws.gram_flat.row(j).segment(3 * a, 3) /= std::max(ws.nrm(j), kNormEps);
    }
  }

  ws.hidden.noalias() = ws.gram_flat * mw1;
  ws.hidden = (ws.hidden.rowwise() + mb1.row(0)).array().tanh().matrix();
  ws.mixed.noalias() = ws.hidden * mw2;  // n x 9, row-major (b, a) per joint

  ws.cat.resize(3 * n, 3 * c);
  ws.scale.resize(3 * n);
  for (int a = 0; a < 3; ++a) {
    auto inter = ws.cat.middleCols(a * c, c);
    inter.setZero();
    for (int b = 0; b < 3; ++b) {
      for (int j = 0; j < n; ++j) {
        double w = ws.mixed(j, 3 * b + a);
        ws.scale(3 * j) = ws.scale(3 * j + 1) = ws.scale(3 * j + 2) = w;
      }
      inter += (ws.val.middleRows(3 * n * b, 3 * n).array().colwise() * ws.scale.array()).matrix();
    }
  }
  ws.delta.noalias() = ws.cat * ow;

  for (int j = 0; j < n; ++j) {
    out[static_cast<size_t>(first + j)] = f[static_cast<size_t>(first + j)] - ws.delta.middleRows(3 * j, 3);
  }
}

std::vector<GeoFeature> parallel_dk_eager(const ad::ParamStore& store, const GroupParams& p,
                                          const SkeletonTopology& topo,
                                          std::span<const GeoFeature> x,
                                          std::span<const GeoFeature> v,
                                          std::span<const GeoFeature> f) {
  std::vector<GeoFeature> out(static_cast<size_t>(topo.n_joints));
  ParallelDkWorkspace ws;
  parallel_dk_eager_range(store, p, topo, x, v, f, 0, topo.n_joints, ws, out);
  return out;
}

void parallel_dk_slab(const ad::ParamStore& store, const GroupParams& p,
                      const SkeletonTopology& topo, const Mat& x, const Mat& v, const Mat& f,
                      int first, int count, ParallelDkWorkspace& ws, Mat& out) {
  const int n = count;
  const Eigen::Index c = f.cols();
  const Mat& wq = store.entry(p.dk.wq).value;
  const Mat& wk = store.entry(p.dk.wk).value;
  const Mat& wv = store.entry(p.dk.wv).value;
  const Mat& mw1 = store.entry(p.dk.mix_w1).value;
  const Mat& mb1 = store.entry(p.dk.mix_b1).value;
  const Mat& mw2 = store.entry(p.dk.mix_w2).value;
  const Mat& ow = store.entry(p.dk.out_w).value;

  bool shifted_chain = true;
  for (int j = std::max(first, 1); j < first + n; ++j) {
    if (topo.parent[static_cast<size_t>(j)] != j - 1) {
      shifted_chain = false;
      break;
    }
  }

  ws.z.resize(9 * n, c);
  ws.z.middleRows(0, 3 * n) = f.middleRows(3 * first, 3 * n);
  auto r_slab = ws.z.middleRows(3 * n, 3 * n);
  auto vrel_slab = ws.z.middleRows(6 * n, 3 * n);
  if (shifted_chain && (first == 0 ? true : topo.parent[static_cast<size_t>(first)] == first - 1)) {
    // Chain: the parent rows are just the slab shifted by one joint.
    int lead = (first == 0) ? 1 : 0;
    if (lead == 1) {
      r_slab.topRows(3).setZero();
      vrel_slab.topRows(3).setZero();
    }
    const int rest = n - lead;
    if (rest > 0) {
      r_slab.bottomRows(3 * rest) = x.middleRows(3 * (first + lead), 3 * rest) -
                                    x.middleRows(3 * (first + lead) - 3, 3 * rest);
      vrel_slab.bottomRows(3 * rest) = v.middleRows(3 * (first + lead), 3 * rest) -
                                       v.middleRows(3 * (first + lead) - 3, 3 * rest);
    }
  } else {
    for (int j = 0; j < n; ++j) {
      const size_t js = static_cast<size_t>(first + j);
      if (topo.parent[js] == -1) {
        r_slab.middleRows(3 * j, 3).setZero();
        vrel_slab.middleRows(3 * j, 3).setZero();
      } else {
        const int ps = topo.parent[js];
        r_slab.middleRows(3 * j, 3) = x.middleRows(3 * (first + j), 3) - x.middleRows(3 * ps, 3);
        vrel_slab.middleRows(3 * j, 3) = v.middleRows(3 * (first + j), 3) - v.middleRows(3 * ps, 3);
      }
    }
  }

  ws.q.noalias() = ws.z * wq;
  ws.k.noalias() = ws.z * wk;
  ws.val.noalias() = ws.z * wv;

  ws.gram_flat.resize(n, 9);
  ws.rowsum.resize(3 * n);
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      ws.rowsum.noalias() = ws.q.middleRows(3 * n * a, 3 * n)
                                .cwiseProduct(ws.k.middleRows(3 * n * b, 3 * n))
                                .rowwise()
                                .sum();
      for (int j = 0; j < n; ++j) {
        ws.gram_flat(j, 3 * a + b) = ws.rowsum(3 * j) + ws.rowsum(3 * j + 1) + ws.rowsum(3 * j + 2);
      }
    }
  }
  ws.nrm.resize(n);
  for (int a = 0; a < 3; ++a) {
    ws.nrm.noalias() = ws.gram_flat.middleCols(3 * a, 3).rowwise().norm();
    for (int j = 0; j < n; ++j) {
      ws.gram_flat.row(j).segment(3 * a, 3) /= std::max(ws.nrm(j), kNormEps);
    }
  }

  ws.hidden.noalias() = ws.gram_flat * mw1;
  ws.hidden = (ws.hidden.rowwise() + mb1.row(0)).array().tanh().matrix();
  ws.mixed.noalias() = ws.hidden * mw2;

  ws.cat.resize(3 * n, 3 * c);
  ws.scale.resize(3 * n);
  for (int a = 0; a < 3; ++a) {
    auto inter = ws.cat.middleCols(a * c, c);
    inter.setZero();
    for (int b = 0; b < 3; ++b) {
      for (int j = 0; j < n; ++j) {
        double w = ws.mixed(j, 3 * b + a);
        ws.scale(3 * j) = ws.scale(3 * j + 1) = ws.scale(3 * j + 2) = w;
      }
      inter += (ws.val.middleRows(3 * n * b, 3 * n).array().colwise() * ws.scale.array()).matrix();
    }
  }
  ws.delta.noalias() = ws.cat * ow;
  out.middleRows(3 * first, 3 * n) = f.middleRows(3 * first, 3 * n) - ws.delta;
}

void iterative_dk_slab(const SkeletonTopology& topo, const Mat& x, const Mat& v, const Mat& f,
                       double eps, Mat& out) {
  std::vector<int> bfs{topo.root};
  for (size_t q = 0; q < bfs.size(); ++q) {
    for (int nb : topo.neighbors[static_cast<size_t>(bfs[q])]) {
      if (nb != topo.parent[static_cast<size_t>(bfs[q])]) bfs.push_back(nb);
    }
  }
  for (int j : bfs) {
    const size_t js = static_cast<size_t>(j);
    if (topo.parent[js] == -1) {
      out.middleRows(3 * j, 3) = f.middleRows(3 * j, 3);
      continue;
    }
    const int ps = topo.parent[js];
    GeoFeature r = x.middleRows(3 * j, 3) - x.middleRows(3 * ps, 3);
    GeoFeature rel_v = v.middleRows(3 * j, 3) - v.middleRows(3 * ps, 3);
    out.middleRows(3 * j, 3) =
        propagate_link(out.middleRows(3 * ps, 3), r, rel_v, f.middleRows(3 * j, 3), eps);
  }
}

}  // namespace ggmotion
