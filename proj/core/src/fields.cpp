#include "ggmotion/fields.hpp"

namespace ggmotion {

MlpRef make_invariant_mlp(ad::ParamStore& store, const std::string& prefix, int in, int hidden,
                          int out, const Rng& rng) {
  MlpRef m;
  m.w1 = store.add(prefix + ".w1", init_weights(in, hidden, rng.split(prefix + ".w1")));
  m.b1 = store.add(prefix + ".b1", init_weights(1, hidden, rng.split(prefix + ".b1")));
  m.w2 = store.add(prefix + ".w2", init_weights(hidden, out, rng.split(prefix + ".w2")));
  return m;
}

int invariant_mlp_node(ad::TapeCtx& ctx, const MlpRef& m, int x) {
  auto& t = ctx.tape;
  int hidden = t.tanh(t.add(t.matmul(x, ctx.p(m.w1)), ctx.p(m.b1)));
  return t.matmul(hidden, ctx.p(m.w2));
}

FieldParams make_field_params(ad::ParamStore& store, const std::string& prefix, int n_joints,
                              int channels, int hidden, const Rng& rng) {
  FieldParams p;
  p.phi_e = make_invariant_mlp(store, prefix + ".phi_e", channels, hidden, channels, rng);
  p.phi_m = make_invariant_mlp(store, prefix + ".phi_m", channels, hidden, channels, rng);
  p.phi_lin_s =
      store.add(prefix + ".phi_lin_s", init_weights(channels, channels, rng.split(prefix + ".phi_lin_s")));
  p.phi_lin_t =
      store.add(prefix + ".phi_lin_t", init_weights(channels, channels, rng.split(prefix + ".phi_lin_t")));
  p.phi_att = store.add(prefix + ".phi_att", init_weights(hidden, 1, rng.split(prefix + ".phi_att")));
  p.beta = store.add(prefix + ".beta", init_weights(n_joints, channels, rng.split(prefix + ".beta")));
  p.gamma = store.add(prefix + ".gamma", init_weights(n_joints, channels, rng.split(prefix + ".gamma")));
  return p;
}

std::vector<int> spatial_field(ad::TapeCtx& ctx, const FieldParams& p,
                               const SkeletonTopology& topo, const HopEmbedding& hopemb,
                               std::span<const int> x, std::span<const int> v) {
  auto& t = ctx.tape;
  const int n = topo.n_joints;
  if (static_cast<int>(x.size()) != n || static_cast<int>(v.size()) != n) {
    throw ConfigError("spatial_field: expected one feature per joint");
  }
  const Eigen::Index channels = t.val(x[0]).cols();

  // Per-group gate: summed sigmoid hop attention from the group root to every
  // other member. A singleton group has an empty sum and gates to zero.
  std::vector<int> gate(topo.groups.size(), -1);
  for (size_t s = 0; s < topo.groups.size(); ++s) {
    const auto& members = topo.groups[s];
    int root = members.front();
    int acc = -1;
    for (size_t m = 1; m < members.size(); ++m) {
      int emb = t.constant(hopemb.row(topo.hop(root, members[m])));
      int att = t.sigmoid(t.matmul(emb, ctx.p(p.phi_att)));
      acc = acc < 0 ? att : t.add(acc, att);
    }
    gate[s] = acc < 0 ? t.constant(Mat::Zero(1, 1)) : acc;
  }

  std::vector<int> out(static_cast<size_t>(n), -1);
  for (int j : topo.order) {
    int agg = -1;
    for (int nb : topo.neighbors[static_cast<size_t>(j)]) {
      int diff = t.sub(x[static_cast<size_t>(j)], x[static_cast<size_t>(nb)]);
      int weight = t.hadamard(t.take_row(ctx.p(p.beta), j),
                              invariant_mlp_node(ctx, p.phi_e, t.colnorm(diff)));
      int term = t.colscale(t.matmul(diff, ctx.p(p.phi_lin_s)), weight);
      agg = agg < 0 ? term : t.add(agg, term);
    }
    if (agg < 0) agg = t.constant(Mat::Zero(3, channels));
    int gated = t.scale_scalar(agg, gate[static_cast<size_t>(topo.group_of[static_cast<size_t>(j)])]);
    out[static_cast<size_t>(j)] = t.add(v[static_cast<size_t>(j)], gated);
  }
  return out;
}

std::vector<int> temporal_field(ad::TapeCtx& ctx, const FieldParams& p, std::span<const int> x,
                                std::span<const int> v, int centroid) {
  auto& t = ctx.tape;
  if (x.size() != v.size()) throw ConfigError("temporal_field: feature count mismatch");
  std::vector<int> out(x.size(), -1);
  for (size_t i = 0; i < x.size(); ++i) {
    int diff = t.sub_colbcast(x[i], centroid);
    int weight = t.hadamard(t.take_row(ctx.p(p.gamma), static_cast<int>(i)),
                            invariant_mlp_node(ctx, p.phi_m, t.colnorm(diff)));
    int term = t.colscale(t.matmul(diff, ctx.p(p.phi_lin_t)), weight);
    out[i] = t.add(v[i], term);
  }
  return out;
}

std::vector<int> total_force(ad::TapeCtx& ctx, std::span<const int> f_spatial,
                             std::span<const int> f_temporal) {
  if (f_spatial.size() != f_temporal.size()) throw ConfigError("total_force: count mismatch");
  std::vector<int> out(f_spatial.size());
  for (size_t i = 0; i < f_spatial.size(); ++i) out[i] = ctx.tape.add(f_spatial[i], f_temporal[i]);
  return out;
}

}  // namespace ggmotion
