#include "ggmotion/eqmlp.hpp"

namespace ggmotion {

EqMlpParams make_eqmlp(ad::ParamStore& store, const std::string& prefix, int n, int channels,
                       int hidden, bool per_var_out, const Rng& rng) {
  if (n < 1 || channels < 1 || hidden < 1) {
    throw ConfigError("make_eqmlp: n, channels and hidden must be positive");
  }
  EqMlpParams p;
  p.n = n;
  p.channels = channels;
  p.per_var_out = per_var_out;
  const int n2 = n * n;
  auto w = [&](const std::string& name, int rows, int cols) {
    return store.add(prefix + "." + name, init_weights(rows, cols, rng.split(prefix + "." + name)));
  };
  p.wq = w("wq", channels, channels);
  p.wk = w("wk", channels, channels);
  p.wv = w("wv", channels, channels);
  p.mix_w1 = w("mix.w1", n2, hidden);
  p.mix_b1 = w("mix.b1", 1, hidden);
  p.mix_w2 = w("mix.w2", hidden, n2);
  p.out_w = per_var_out ? w("out", channels, channels) : w("out", n * channels, channels);
  return p;
}

Mat gram(std::span<const GeoFeature> vars_q, std::span<const GeoFeature> vars_k) {
  if (vars_q.size() != vars_k.size() || vars_q.empty()) {
    throw ConfigError("gram: need matching non-empty variable lists");
  }
  const int n = static_cast<int>(vars_q.size());
  Mat out(n, n);
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      if (vars_q[a].rows() != vars_k[b].rows() || vars_q[a].cols() != vars_k[b].cols()) {
        throw ConfigError("gram: variable shape mismatch");
      }
      out(a, b) = vars_q[a].cwiseProduct(vars_k[b]).sum();
    }
  }
  return out;
}

namespace {

/// Shared pipeline up to the n intermediates.
std::vector<int> intermediates(ad::TapeCtx& ctx, const EqMlpParams& p, std::span<const int> vars) {
  if (static_cast<int>(vars.size()) != p.n) {
    throw ConfigError("eqmlp: built for n=" + std::to_string(p.n) + ", got " +
                      std::to_string(vars.size()) + " variables");
  }
  auto& t = ctx.tape;
  std::vector<int> q(vars.size()), k(vars.size()), v(vars.size());
  for (size_t i = 0; i < vars.size(); ++i) {
    q[i] = t.matmul(vars[i], ctx.p(p.wq));
    k[i] = t.matmul(vars[i], ctx.p(p.wk));
    v[i] = t.matmul(vars[i], ctx.p(p.wv));
  }
  int sigma = t.gram(q, k);
  int sigma_hat = t.row_l2_normalize(sigma, kNormEps);
  int flat = t.reshape(sigma_hat, 1, p.n * p.n);
  int hidden = t.tanh(t.add(t.matmul(flat, ctx.p(p.mix_w1)), ctx.p(p.mix_b1)));
  int mixed = t.matmul(hidden, ctx.p(p.mix_w2));
  int m = t.reshape(mixed, p.n, p.n);

  std::vector<int> inter(vars.size());
  for (int a = 0; a < p.n; ++a) {
    inter[static_cast<size_t>(a)] = t.weighted_sum(v, m, a);
  }
  return inter;
}

}  // namespace

int eqmlp_forward(ad::TapeCtx& ctx, const EqMlpParams& p, std::span<const int> vars) {
  if (p.per_var_out) throw ConfigError("eqmlp_forward: params were built for per-variable output");
  auto inter = intermediates(ctx, p, vars);
  int cat = ctx.tape.concat_cols(inter);
  return ctx.tape.matmul(cat, ctx.p(p.out_w));
}

std::vector<int> eqmlp_forward_per_var(ad::TapeCtx& ctx, const EqMlpParams& p,
                                       std::span<const int> vars) {
  if (!p.per_var_out) throw ConfigError("eqmlp_forward_per_var: params have a concat output map");
  auto inter = intermediates(ctx, p, vars);
  std::vector<int> out(inter.size());
  for (size_t a = 0; a < inter.size(); ++a) {
    out[a] = ctx.tape.matmul(inter[a], ctx.p(p.out_w));
  }
  return out;
}

}  // namespace ggmotion
