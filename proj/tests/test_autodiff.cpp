#include "ggmotion/autodiff.hpp"

#include "helpers.hpp"

#include <doctest.h>

using namespace ggmotion;
using namespace ggmtest;
using ad::ParamStore;
using ad::Tape;
using ad::TapeCtx;

TEST_CASE("taped values equal eager kernel composition bit for bit") {
  Rng rng(17);
  Mat a = random_grid(rng, 3, 4);
  Mat w = random_grid(rng, 4, 4);
  Mat b = random_grid(rng, 3, 4);

  Tape tape;
  int na = tape.constant(a);
  int nw = tape.constant(w);
  int nb = tape.constant(b);
  int taped = tape.colnorm(tape.add(tape.matmul(na, nw), tape.cross_cols(na, nb)));

  Mat eager = col_norm(apply_linear(LinearMap{w}, a) + cross_cols(a, b));
  CHECK(tape.val(taped) == eager);
}

TEST_CASE("sum of squares gradient is twice the grid") {
  ParamStore params;
  Rng rng(3);
  int p = params.add("grid", random_grid(rng, 3, 5));

  Tape tape;
  TapeCtx ctx(tape, params);
  int node = ctx.p(p);
  int loss = tape.sum_all(tape.hadamard(node, node));
  ctx.accumulate_grads(params, tape.backward(loss));

  CHECK((params.entry(p).grad - 2.0 * params.entry(p).value).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("parameters outside the program get exactly zero gradient") {
  ParamStore params;
  Rng rng(4);
  int used = params.add("used", random_grid(rng, 2, 2));
  int unused = params.add("unused", random_grid(rng, 2, 2));

  params.zero_grads();
  Tape tape;
  TapeCtx ctx(tape, params);
  int loss = tape.sum_all(ctx.p(used));
  ctx.accumulate_grads(params, tape.backward(loss));
  CHECK(params.entry(unused).grad.isZero(0));
  CHECK(params.entry(used).grad == Mat::Ones(2, 2));
}

TEST_CASE("backward requires a scalar loss") {
  Tape tape;
  int a = tape.leaf(Mat::Ones(2, 2));
  CHECK_THROWS_AS(tape.backward(a), UsageError);
}

TEST_CASE("cross product backward identity d/da [c.(a x b)] = b x c") {
  Rng rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    Mat a = random_grid(rng, 3, 1), b = random_grid(rng, 3, 1), c = random_grid(rng, 3, 1);
    Tape tape;
    int na = tape.leaf(a);
    int nb = tape.constant(b);
    int nc = tape.constant(c);
    int loss = tape.sum_all(tape.hadamard(nc, tape.cross_cols(na, nb)));
    auto adj = tape.backward(loss);
    Vec3 expected = cofactor_cross(b.col(0), c.col(0));
    CHECK((adj[static_cast<size_t>(na)].col(0) - expected).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("grad_check: linear program is exact to 1e-10") {
  ParamStore params;
  Rng rng(5);
  params.add("w", random_grid(rng, 4, 3));
  Mat x = random_grid(rng, 3, 4);

  auto program = [&](TapeCtx& ctx) {
    int w = ctx.p(0);
    return ctx.tape.sum_all(ctx.tape.matmul(ctx.tape.constant(x), w));
  };
  // A generous step: central differences of a linear map are exact in any
  // case, and the larger h keeps cancellation noise out of the comparison.
  auto report = ad::grad_check(program, params, Rng(100), 12, 1e-2);
  CHECK(report.max_rel_err <= 1e-10);
}

TEST_CASE("grad_check: single tanh layer within 1e-6") {
  ParamStore params;
  Rng rng(6);
  params.add("w1", random_grid(rng, 4, 8));
  params.add("b1", random_grid(rng, 1, 8));
  params.add("w2", random_grid(rng, 8, 2));
  Mat x = random_grid(rng, 1, 4);

  auto program = [&](TapeCtx& ctx) {
    auto& t = ctx.tape;
    int h = t.tanh(t.add(t.matmul(t.constant(x), ctx.p(0)), ctx.p(1)));
    return t.sum_all(t.matmul(h, ctx.p(2)));
  };
  auto report = ad::grad_check(program, params, Rng(101), 40);
  CHECK(report.max_rel_err <= 1e-6);
}

TEST_CASE("grad_check covers every recorded op") {
  // One program touching the whole op set, checked against central
  // differences; shapes kept tiny so the check is fast.
  ParamStore params;
  Rng rng(7);
  params.add("a", random_grid(rng, 3, 4));
  params.add("b", random_grid(rng, 3, 4));
  params.add("row", random_grid(rng, 1, 4));
  params.add("mix", random_grid(rng, 2, 2));
  params.add("sq", random_grid(rng, 8, 2));
  Mat vcol_data = random_grid(rng, 3, 1);

  auto program = [&](TapeCtx& ctx) {
    auto& t = ctx.tape;
    int a = ctx.p(0), b = ctx.p(1), row = ctx.p(2), mix = ctx.p(3), sq = ctx.p(4);
    int total = t.sum_all(t.colnorm(t.cross_cols(a, b)));
    total = t.add(total, t.sum_abs(t.colscale(t.sub(a, b), row)));
    int denom = t.constant(Mat::Constant(1, 4, 2.0));
    total = t.add(total, t.sum_all(t.colscale_inv(t.hadamard(a, b), denom)));
    total = t.add(total, t.sum_all(t.sigmoid(t.row_mean(a))));
    std::array<int, 2> q{a, b};
    std::array<int, 2> k{b, a};
    int gm = t.row_l2_normalize(t.gram(q, k), kNormEps);
    total = t.add(total, t.sum_all(t.reshape(gm, 1, 4)));
    std::array<int, 2> vs{a, b};
    total = t.add(total, t.sum_all(t.weighted_sum(vs, mix, 1)));
    std::array<int, 2> cats{a, b};
    total = t.add(total, t.sum_all(t.matmul(t.concat_cols(cats), sq)));
    int vcol = t.constant(vcol_data);
    total = t.add(total, t.sum_all(t.sub_colbcast(t.add_colbcast(a, vcol), vcol)));
    total = t.add(total, t.sum_all(t.scale_scalar(t.take_row(a, 1), t.sum_all(b))));
    total = t.add(total, t.scale_const(t.sum_all(t.tanh(a)), 0.25));
    return total;
  };
  // Deterministic data, so the same program is rebuilt identically per eval.
  auto report = ad::grad_check(program, params, Rng(55), 80);
  CHECK(report.max_rel_err <= 1e-5);
}

TEST_CASE("row_l2_normalize backward handles the eps guard branch") {
  ParamStore params;
  Mat tiny(1, 2);
  tiny << 1e-10, -2e-10;  // below the 1e-8 guard: forward divides by eps
  params.add("m", tiny);
  auto program = [&](TapeCtx& ctx) {
    return ctx.tape.sum_all(ctx.tape.row_l2_normalize(ctx.p(0), 1e-8));
  };
  // Small step so the perturbed rows stay inside the guard branch.
  auto report = ad::grad_check(program, params, Rng(9), 4, 1e-9);
  CHECK(report.max_rel_err <= 1e-6);
}

TEST_CASE("gradients are deterministic") {
  ParamStore params;
  Rng rng(12);
  params.add("w", random_grid(rng, 6, 6));
  Mat x = random_grid(rng, 3, 6);

  auto run = [&]() {
    params.zero_grads();
    Tape tape;
    TapeCtx ctx(tape, params);
    int y = tape.tanh(tape.matmul(tape.constant(x), ctx.p(0)));
    ctx.accumulate_grads(params, tape.backward(tape.sum_all(y)));
    return Mat(params.entry(0).grad);
  };
  CHECK(run() == run());
}

TEST_CASE("param store rejects duplicates and reports scalar counts") {
  ParamStore params;
  params.add("a", Mat::Zero(3, 5));
  CHECK_THROWS_AS(params.add("a", Mat::Zero(1, 1)), ConfigError);
  params.add("b", Mat::Zero(2, 2));
  CHECK(params.scalar_count() == 19);
  CHECK(params.index_of("b") == 1);
  CHECK(params.index_of("missing") == -1);
}
