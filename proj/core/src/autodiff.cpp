#include "ggmotion/autodiff.hpp"

#include <algorithm>
#include <cmath>

namespace ggmotion::ad {

namespace {

void check_same_shape(const Mat& a, const Mat& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ConfigError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                      std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                      std::to_string(b.cols()));
  }
}

Mat reshape_rowmajor(const Mat& a, int rows, int cols) {
  Mat out(rows, cols);
  const Eigen::Index ac = a.cols();
  for (Eigen::Index idx = 0; idx < a.size(); ++idx) {
    out(idx / cols, idx % cols) = a(idx / ac, idx % ac);
  }
  return out;
}

}  // namespace

int Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

int Tape::constant(Mat v) {
  Node n;
  n.value = std::move(v);
  n.op = Op::kConst;
  return push(std::move(n));
}

int Tape::leaf(Mat v) {
  Node n;
  n.value = std::move(v);
  n.op = Op::kLeaf;
  n.needs_grad = true;
  return push(std::move(n));
}

#define GGM_BINARY_PROLOGUE(a, b)                        \
  Node n;                                                \
  n.in = {a, b};                                         \
  n.needs_grad = at(a).needs_grad || at(b).needs_grad;

#define GGM_UNARY_PROLOGUE(a)     \
  Node n;                         \
  n.in = {a};                     \
  n.needs_grad = at(a).needs_grad;

int Tape::add(int a, int b) {
  check_same_shape(val(a), val(b), "add");
  GGM_BINARY_PROLOGUE(a, b)
  n.op = Op::kAdd;
  n.value = val(a) + val(b);
  return push(std::move(n));
}

int Tape::sub(int a, int b) {
  check_same_shape(val(a), val(b), "sub");
  GGM_BINARY_PROLOGUE(a, b)
  n.op = Op::kSub;
  n.value = val(a) - val(b);
  return push(std::move(n));
}

int Tape::matmul(int a, int b) {
  if (val(a).cols() != val(b).rows()) {
    throw ConfigError("matmul: inner dimensions " + std::to_string(val(a).cols()) + " vs " +
                      std::to_string(val(b).rows()));
  }
  GGM_BINARY_PROLOGUE(a, b)
  n.op = Op::kMatmul;
  n.value = val(a) * val(b);
  return push(std::move(n));
}

int Tape::hadamard(int a, int b) {
  check_same_shape(val(a), val(b), "hadamard");
  GGM_BINARY_PROLOGUE(a, b)
  n.op = Op::kHadamard;
  n.value = val(a).cwiseProduct(val(b));
  return push(std::move(n));
}

int Tape::colscale(int a, int s) {
  if (val(s).rows() != 1 || val(s).cols() != val(a).cols()) {
    throw ConfigError("colscale: scale row must be 1x" + std::to_string(val(a).cols()));
  }
  GGM_BINARY_PROLOGUE(a, s)
  n.op = Op::kColScale;
  n.value = (val(a).array().rowwise() * val(s).row(0).array()).matrix();
  return push(std::move(n));
}

int Tape::colscale_inv(int a, int s) {
  if (val(s).rows() != 1 || val(s).cols() != val(a).cols()) {
    throw ConfigError("colscale_inv: scale row must be 1x" + std::to_string(val(a).cols()));
  }
  GGM_BINARY_PROLOGUE(a, s)
  n.op = Op::kColScaleInv;
  n.value = (val(a).array().rowwise() / val(s).row(0).array()).matrix();
  return push(std::move(n));
}

int Tape::colnorm(int a) {
  GGM_UNARY_PROLOGUE(a)
  n.op = Op::kColNorm;
  n.value = val(a).colwise().norm();
  return push(std::move(n));
}

int Tape::tanh(int a) {
  GGM_UNARY_PROLOGUE(a)
  n.op = Op::kTanh;
  n.value = val(a).array().tanh().matrix();
  return push(std::move(n));
}

int Tape::sigmoid(int a) {
  GGM_UNARY_PROLOGUE(a)
  n.op = Op::kSigmoid;
  n.value = (1.0 / (1.0 + (-val(a).array()).exp())).matrix();
  return push(std::move(n));
}

int Tape::scale_scalar(int a, int s) {
  if (val(s).size() != 1) throw ConfigError("scale_scalar: scale must be 1x1");
  GGM_BINARY_PROLOGUE(a, s)
  n.op = Op::kScaleScalar;
  n.value = val(a) * val(s)(0, 0);
  return push(std::move(n));
}

int Tape::scale_const(int a, double c) {
  GGM_UNARY_PROLOGUE(a)
  n.op = Op::kScaleConst;
  n.aux = c;
  n.value = val(a) * c;
  return push(std::move(n));
}

int Tape::sub_colbcast(int a, int v) {
  if (val(v).cols() != 1 || val(v).rows() != val(a).rows()) {
    throw ConfigError("sub_colbcast: vector must be " + std::to_string(val(a).rows()) + "x1");
  }
  GGM_BINARY_PROLOGUE(a, v)
  n.op = Op::kSubColBcast;
  n.value = val(a).colwise() - Eigen::VectorXd(val(v).col(0));
  return push(std::move(n));
}

int Tape::add_colbcast(int a, int v) {
  if (val(v).cols() != 1 || val(v).rows() != val(a).rows()) {
    throw ConfigError("add_colbcast: vector must be " + std::to_string(val(a).rows()) + "x1");
  }
  GGM_BINARY_PROLOGUE(a, v)
  n.op = Op::kAddColBcast;
  n.value = val(a).colwise() + Eigen::VectorXd(val(v).col(0));
  return push(std::move(n));
}

int Tape::row_mean(int a) {
  GGM_UNARY_PROLOGUE(a)
  n.op = Op::kRowMean;
  n.value = val(a).rowwise().mean();
  return push(std::move(n));
}

int Tape::sum_all(int a) {
  GGM_UNARY_PROLOGUE(a)
  n.op = Op::kSumAll;
  n.value = Mat::Constant(1, 1, val(a).sum());
  return push(std::move(n));
}

int Tape::sum_abs(int a) {
  GGM_UNARY_PROLOGUE(a)
  n.op = Op::kSumAbs;
  n.value = Mat::Constant(1, 1, val(a).array().abs().sum());
  return push(std::move(n));
}

int Tape::gram(std::span<const int> q, std::span<const int> k) {
  if (q.size() != k.size() || q.empty()) throw ConfigError("gram: need matching variable lists");
  const int nv = static_cast<int>(q.size());
  Node n;
  n.op = Op::kGram;
  n.in.reserve(2 * q.size());
  for (int id : q) n.in.push_back(id);
  for (int id : k) n.in.push_back(id);
  n.value.resize(nv, nv);
  for (int a = 0; a < nv; ++a) {
    for (int b = 0; b < nv; ++b) {
      check_same_shape(val(q[a]), val(k[b]), "gram");
      n.value(a, b) = val(q[a]).cwiseProduct(val(k[b])).sum();
    }
  }
  for (int id : n.in) n.needs_grad = n.needs_grad || at(id).needs_grad;
  return push(std::move(n));
}

int Tape::row_l2_normalize(int a, double eps) {
  GGM_UNARY_PROLOGUE(a)
  n.op = Op::kRowL2Normalize;
  n.aux = eps;
  n.value = ggmotion::row_l2_normalize(val(a), eps);
  return push(std::move(n));
}

int Tape::reshape(int a, int rows, int cols) {
  if (val(a).size() != static_cast<Eigen::Index>(rows) * cols) {
    throw ConfigError("reshape: size mismatch");
  }
  GGM_UNARY_PROLOGUE(a)
  n.op = Op::kReshape;
  n.value = reshape_rowmajor(val(a), rows, cols);
  return push(std::move(n));
}

int Tape::weighted_sum(std::span<const int> vs, int m, int col) {
  if (vs.empty()) throw ConfigError("weighted_sum: empty variable list");
  if (val(m).rows() != static_cast<Eigen::Index>(vs.size()) || col < 0 || col >= val(m).cols()) {
    throw ConfigError("weighted_sum: mixing matrix shape/column mismatch");
  }
  Node n;
  n.op = Op::kWeightedSum;
  n.aux = static_cast<double>(col);
  for (int id : vs) n.in.push_back(id);
  n.in.push_back(m);
  n.value = Mat::Zero(val(vs[0]).rows(), val(vs[0]).cols());
  for (size_t b = 0; b < vs.size(); ++b) {
    check_same_shape(val(vs[0]), val(vs[b]), "weighted_sum");
    n.value += val(m)(static_cast<Eigen::Index>(b), col) * val(vs[b]);
  }
  for (int id : n.in) n.needs_grad = n.needs_grad || at(id).needs_grad;
  return push(std::move(n));
}

int Tape::concat_cols(std::span<const int> parts) {
  if (parts.empty()) throw ConfigError("concat_cols: empty list");
  Eigen::Index rows = val(parts[0]).rows();
  Eigen::Index cols = 0;
  for (int id : parts) {
    if (val(id).rows() != rows) throw ConfigError("concat_cols: row count mismatch");
    cols += val(id).cols();
  }
  Node n;
  n.op = Op::kConcatCols;
  n.value.resize(rows, cols);
  Eigen::Index off = 0;
  for (int id : parts) {
    n.in.push_back(id);
    n.value.middleCols(off, val(id).cols()) = val(id);
    off += val(id).cols();
  }
  for (int id : n.in) n.needs_grad = n.needs_grad || at(id).needs_grad;
  return push(std::move(n));
}

int Tape::cross_cols(int a, int b) {
  GGM_BINARY_PROLOGUE(a, b)
  n.op = Op::kCrossCols;
  n.value = ggmotion::cross_cols(val(a), val(b));
  return push(std::move(n));
}

int Tape::take_row(int a, int row) {
  if (row < 0 || row >= val(a).rows()) throw ConfigError("take_row: row out of range");
  GGM_UNARY_PROLOGUE(a)
  n.op = Op::kTakeRow;
  n.aux = static_cast<double>(row);
  n.value = val(a).row(row);
  return push(std::move(n));
}

#undef GGM_BINARY_PROLOGUE
#undef GGM_UNARY_PROLOGUE

std::vector<Mat> Tape::backward(int loss) const {
  const Node& ln = at(loss);
  if (ln.value.rows() != 1 || ln.value.cols() != 1) {
    throw UsageError("backward: loss node must be 1x1, got " + std::to_string(ln.value.rows()) +
                     "x" + std::to_string(ln.value.cols()));
  }
  std::vector<Mat> adj(nodes_.size());
  adj[static_cast<size_t>(loss)] = Mat::Constant(1, 1, 1.0);

  auto acc = [&](int id, const Mat& g) {
    if (!at(id).needs_grad) return;
    Mat& slot = adj[static_cast<size_t>(id)];
    if (slot.size() == 0) {
      slot = g;
    } else {
      slot += g;
    }
  };

  for (int id = loss; id >= 0; --id) {
    const Node& n = at(id);
    if (!n.needs_grad) continue;
    const Mat& g = adj[static_cast<size_t>(id)];
    if (g.size() == 0) continue;

    switch (n.op) {
      case Op::kLeaf:
      case Op::kConst:
        break;
      case Op::kAdd:
        acc(n.in[0], g);
        acc(n.in[1], g);
        break;
      case Op::kSub:
        acc(n.in[0], g);
        acc(n.in[1], -g);
        break;
      case Op::kMatmul:
        acc(n.in[0], g * val(n.in[1]).transpose());
        acc(n.in[1], val(n.in[0]).transpose() * g);
        break;
      case Op::kHadamard:
        acc(n.in[0], g.cwiseProduct(val(n.in[1])));
        acc(n.in[1], g.cwiseProduct(val(n.in[0])));
        break;
      case Op::kColScale: {
        const Mat& a = val(n.in[0]);
        const Mat& s = val(n.in[1]);
        acc(n.in[0], (g.array().rowwise() * s.row(0).array()).matrix());
        acc(n.in[1], g.cwiseProduct(a).colwise().sum());
        break;
      }
      case Op::kColScaleInv: {
        const Mat& a = val(n.in[0]);
        const Mat& s = val(n.in[1]);
        Mat ginv = (g.array().rowwise() / s.row(0).array()).matrix();
        acc(n.in[0], ginv);
        Row ds = -(ginv.cwiseProduct(a).colwise().sum().array() / s.row(0).array()).matrix();
        acc(n.in[1], ds);
        break;
      }
      case Op::kColNorm: {
        const Mat& a = val(n.in[0]);
        Mat da = Mat::Zero(a.rows(), a.cols());
        for (Eigen::Index c = 0; c < a.cols(); ++c) {
          double nrm = n.value(0, c);
          if (nrm > 0.0) da.col(c) = g(0, c) * a.col(c) / nrm;
          // zero column: subgradient 0
        }
        acc(n.in[0], da);
        break;
      }
      case Op::kTanh:
        acc(n.in[0], (g.array() * (1.0 - n.value.array().square())).matrix());
        break;
      case Op::kSigmoid:
        acc(n.in[0], (g.array() * n.value.array() * (1.0 - n.value.array())).matrix());
        break;
      case Op::kScaleScalar: {
        acc(n.in[0], g * val(n.in[1])(0, 0));
        acc(n.in[1], Mat::Constant(1, 1, g.cwiseProduct(val(n.in[0])).sum()));
        break;
      }
      case Op::kScaleConst:
        acc(n.in[0], g * n.aux);
        break;
      case Op::kSubColBcast:
        acc(n.in[0], g);
        acc(n.in[1], Mat(-g.rowwise().sum()));
        break;
      case Op::kAddColBcast:
        acc(n.in[0], g);
        acc(n.in[1], Mat(g.rowwise().sum()));
        break;
      case Op::kRowMean: {
        double inv = 1.0 / static_cast<double>(val(n.in[0]).cols());
        acc(n.in[0], (g * Mat::Ones(1, val(n.in[0]).cols())) * inv);
        break;
      }
      case Op::kSumAll:
        acc(n.in[0], Mat::Constant(val(n.in[0]).rows(), val(n.in[0]).cols(), g(0, 0)));
        break;
      case Op::kSumAbs: {
        const Mat& a = val(n.in[0]);
        acc(n.in[0], (g(0, 0) * a.array().sign()).matrix());
        break;
      }
      case Op::kGram: {
        const int nv = static_cast<int>(n.in.size() / 2);
        for (int a = 0; a < nv; ++a) {
          for (int b = 0; b < nv; ++b) {
            double w = g(a, b);
            if (w == 0.0) continue;
            acc(n.in[static_cast<size_t>(a)], w * val(n.in[static_cast<size_t>(nv + b)]));
            acc(n.in[static_cast<size_t>(nv + b)], w * val(n.in[static_cast<size_t>(a)]));
          }
        }
        break;
      }
      case Op::kRowL2Normalize: {
        const Mat& a = val(n.in[0]);
        const double eps = n.aux;
        Mat da(a.rows(), a.cols());
        for (Eigen::Index i = 0; i < a.rows(); ++i) {
          double nrm = a.row(i).norm();
          if (nrm >= eps) {
            // d(r/|r|) = g/|r| - r (r.g)/|r|^3
            double rg = a.row(i).dot(g.row(i));
            da.row(i) = g.row(i) / nrm - a.row(i) * (rg / (nrm * nrm * nrm));
          } else {
            // guard branch: denominator held at eps
            da.row(i) = g.row(i) / eps;
          }
        }
        acc(n.in[0], da);
        break;
      }
      case Op::kReshape: {
        const Mat& a = val(n.in[0]);
        acc(n.in[0], reshape_rowmajor(g, static_cast<int>(a.rows()), static_cast<int>(a.cols())));
        break;
      }
      case Op::kWeightedSum: {
        const int nv = static_cast<int>(n.in.size()) - 1;
        const int mid = n.in[static_cast<size_t>(nv)];
        const int col = static_cast<int>(n.aux);
        const Mat& m = val(mid);
        Mat dm = Mat::Zero(m.rows(), m.cols());
        for (int b = 0; b < nv; ++b) {
          acc(n.in[static_cast<size_t>(b)], m(b, col) * g);
          dm(b, col) = g.cwiseProduct(val(n.in[static_cast<size_t>(b)])).sum();
        }
        acc(mid, dm);
        break;
      }
      case Op::kConcatCols: {
        Eigen::Index off = 0;
        for (int part : n.in) {
          Eigen::Index w = val(part).cols();
          acc(part, g.middleCols(off, w));
          off += w;
        }
        break;
      }
      case Op::kCrossCols: {
        const Mat& a = val(n.in[0]);
        const Mat& b = val(n.in[1]);
        acc(n.in[0], ggmotion::cross_cols(b, g));
        acc(n.in[1], ggmotion::cross_cols(g, a));
        break;
      }
      case Op::kTakeRow: {
        const Mat& a = val(n.in[0]);
        Mat da = Mat::Zero(a.rows(), a.cols());
        da.row(static_cast<Eigen::Index>(n.aux)) = g;
        acc(n.in[0], da);
        break;
      }
    }
  }
  return adj;
}

// ---------------------------------------------------------------------------
// ParamStore
// ---------------------------------------------------------------------------

int ParamStore::add(std::string path, Mat init, ParamConstraint c) {
  if (index_.count(path)) throw ConfigError("ParamStore: duplicate path " + path);
  ParamEntry e;
  e.path = path;
  e.grad = Mat::Zero(init.rows(), init.cols());
  e.value = std::move(init);
  e.constraint = c;
  int idx = static_cast<int>(entries_.size());
  index_.emplace(std::move(path), idx);
  entries_.push_back(std::move(e));
  if (c != ParamConstraint::kNone) apply_constraints();
  return idx;
}

int ParamStore::index_of(const std::string& path) const {
  auto it = index_.find(path);
  return it == index_.end() ? -1 : it->second;
}

Mat& ParamStore::value(const std::string& path) {
  int idx = index_of(path);
  if (idx < 0) throw ConfigError("ParamStore: unknown path " + path);
  return entries_[static_cast<size_t>(idx)].value;
}

size_t ParamStore::scalar_count() const {
  size_t n = 0;
  for (const auto& e : entries_) n += static_cast<size_t>(e.value.size());
  return n;
}

void ParamStore::zero_grads() {
  for (auto& e : entries_) e.grad.setZero();
}

void ParamStore::apply_constraints() {
  for (auto& e : entries_) {
    if (e.constraint == ParamConstraint::kColumnsSumToOne) {
      for (Eigen::Index c = 0; c < e.value.cols(); ++c) {
        double defect = 1.0 - e.value.col(c).sum();
        e.value.col(c).array() += defect / static_cast<double>(e.value.rows());
      }
    }
  }
}

int TapeCtx::p(int idx) {
  int& node = param_nodes[static_cast<size_t>(idx)];
  if (node < 0) node = tape.leaf(params.entry(idx).value);
  return node;
}

void TapeCtx::accumulate_grads(ParamStore& into, const std::vector<Mat>& adjoints) const {
  for (size_t i = 0; i < param_nodes.size(); ++i) {
    int node = param_nodes[i];
    if (node < 0) continue;
    const Mat& a = adjoints[static_cast<size_t>(node)];
    if (a.size() == 0) continue;
    into.entry(static_cast<int>(i)).grad += a;
  }
}

// ---------------------------------------------------------------------------
// Gradient check
// ---------------------------------------------------------------------------

GradCheckReport grad_check(const std::function<int(TapeCtx&)>& program, ParamStore& params,
                           Rng rng, int n_coords, double h, double rel_tol, double abs_tol) {
  if (n_coords < 1) throw UsageError("grad_check: n_coords must be >= 1");

  // Analytic gradients once.
  params.zero_grads();
  {
    Tape tape;
    TapeCtx ctx(tape, params);
    int loss = program(ctx);
    ctx.accumulate_grads(params, tape.backward(loss));
  }

  auto eval_loss = [&]() {
    Tape tape;
    TapeCtx ctx(tape, params);
    return tape.val(program(ctx))(0, 0);
  };

  const size_t total = params.scalar_count();
  const double floor = abs_tol / rel_tol;
  GradCheckReport report;
  report.coords = n_coords;

  for (int s = 0; s < n_coords; ++s) {
    size_t flat = static_cast<size_t>(rng.uniform() * static_cast<double>(total));
    flat = std::min(flat, total - 1);
    int pidx = 0;
    for (const auto& e : params.entries()) {
      if (flat < static_cast<size_t>(e.value.size())) break;
      flat -= static_cast<size_t>(e.value.size());
      ++pidx;
    }
    auto& entry = params.entry(pidx);
    Eigen::Index r = static_cast<Eigen::Index>(flat) % entry.value.rows();
    Eigen::Index c = static_cast<Eigen::Index>(flat) / entry.value.rows();

    const double saved = entry.value(r, c);
    entry.value(r, c) = saved + h;
    double lp = eval_loss();
    entry.value(r, c) = saved - h;
    double lm = eval_loss();
    entry.value(r, c) = saved;

    double numeric = (lp - lm) / (2.0 * h);
    double analytic = entry.grad(r, c);
    double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
    double rel = std::abs(analytic - numeric) / denom;
    if (rel >= report.max_rel_err) {
      report.max_rel_err = rel;
      report.worst_path = entry.path;
      report.worst_row = static_cast<int>(r);
      report.worst_col = static_cast<int>(c);
      report.worst_analytic = analytic;
      report.worst_numeric = numeric;
    }
  }
  return report;
}

}  // namespace ggmotion::ad
