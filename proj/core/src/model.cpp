#include "ggmotion/model.hpp"

#include <nlohmann/json.hpp>

#include <cstring>
#include <fstream>

namespace ggmotion {

void ModelConfig::validate() const {
  if (n_joints < 1 || t_h < 2 || t_f < 1 || channels < 1 || hidden < 1 || blocks < 1) {
    throw ConfigError("model config: n_joints/t_h/t_f/channels/hidden/blocks must be positive "
                      "(and t_h >= 2 for velocities)");
  }
  if (hidden % 2 != 0) throw ConfigError("model config: hidden width must be even");
}

namespace {

FieldMode field_mode_from_string(const std::string& s) {
  if (s == "full") return FieldMode::kFull;
  if (s == "spatial") return FieldMode::kSpatialOnly;
  if (s == "temporal") return FieldMode::kTemporalOnly;
  if (s == "off") return FieldMode::kOff;
  throw ConfigError("model config: unknown field_mode \"" + s + "\"");
}

std::string to_string(FieldMode m) {
  switch (m) {
    case FieldMode::kFull: return "full";
    case FieldMode::kSpatialOnly: return "spatial";
    case FieldMode::kTemporalOnly: return "temporal";
    case FieldMode::kOff: return "off";
  }
  return "full";
}

DkMode dk_mode_from_string(const std::string& s) {
  if (s == "parallel") return DkMode::kParallel;
  if (s == "iterative") return DkMode::kIterative;
  if (s == "off") return DkMode::kOff;
  throw ConfigError("model config: unknown dk_mode \"" + s + "\"");
}

std::string to_string(DkMode m) {
  switch (m) {
    case DkMode::kParallel: return "parallel";
    case DkMode::kIterative: return "iterative";
    case DkMode::kOff: return "off";
  }
  return "parallel";
}

}  // namespace

ModelConfig model_config_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("model config JSON: ") + e.what());
  }
  ModelConfig c;
  c.n_joints = j.value("n_joints", c.n_joints);
  c.t_h = j.value("t_h", c.t_h);
  c.t_f = j.value("t_f", c.t_f);
  c.channels = j.value("channels", c.channels);
  c.hidden = j.value("hidden", c.hidden);
  c.blocks = j.value("blocks", c.blocks);
  c.seed = j.value("seed", c.seed);
  if (j.contains("field_mode")) c.field_mode = field_mode_from_string(j.at("field_mode"));
  c.use_inter = j.value("use_inter", c.use_inter);
  c.use_intra = j.value("use_intra", c.use_intra);
  c.inter_slice = j.value("inter_slice", c.inter_slice);
  if (j.contains("dk_mode")) c.dk_mode = dk_mode_from_string(j.at("dk_mode"));
  c.centroid_refresh = j.value("centroid_refresh", c.centroid_refresh);
  c.validate();
  return c;
}

std::string model_config_to_json(const ModelConfig& c) {
  nlohmann::json j;
  j["n_joints"] = c.n_joints;
  j["t_h"] = c.t_h;
  j["t_f"] = c.t_f;
  j["channels"] = c.channels;
  j["hidden"] = c.hidden;
  j["blocks"] = c.blocks;
  j["seed"] = c.seed;
  j["field_mode"] = to_string(c.field_mode);
  j["use_inter"] = c.use_inter;
  j["use_intra"] = c.use_intra;
  j["inter_slice"] = c.inter_slice;
  j["dk_mode"] = to_string(c.dk_mode);
  j["centroid_refresh"] = c.centroid_refresh;
  return j.dump(2);
}

Model build_model(const ModelConfig& cfg, SkeletonTopology topo) {
  cfg.validate();
  if (topo.n_joints != cfg.n_joints) {
    throw ConfigError("build_model: config says " + std::to_string(cfg.n_joints) +
                      " joints, topology has " + std::to_string(topo.n_joints));
  }
  Model m;
  m.cfg = cfg;
  m.topo = std::move(topo);
  m.hopemb = build_hop_embedding(m.topo, cfg.hidden);
  Rng rng(cfg.seed);

  m.embed_pos = m.params.add("embed.pos", init_weights(cfg.t_h, cfg.channels, rng.split("embed.pos")));
  m.embed_vel =
      m.params.add("embed.vel", init_weights(cfg.t_h - 1, cfg.channels, rng.split("embed.vel")));
  m.blocks.reserve(static_cast<size_t>(cfg.blocks));
  for (int l = 0; l < cfg.blocks; ++l) {
    std::string prefix = "block." + std::to_string(l);
    BlockParams b;
    b.field = make_field_params(m.params, prefix + ".field", cfg.n_joints, cfg.channels,
                                cfg.hidden, rng);
    b.group = make_group_params(m.params, prefix + ".group", m.topo, cfg.channels, cfg.hidden,
                                cfg.inter_slice, rng);
    m.blocks.push_back(std::move(b));
  }
  m.head = m.params.add("head", init_weights(cfg.channels, cfg.t_f, rng.split("head")));
  return m;
}

EmbeddedState embed_tape(ad::TapeCtx& ctx, const Model& model, const std::vector<Mat>& past) {
  const auto& cfg = model.cfg;
  const auto& topo = model.topo;
  auto& t = ctx.tape;
  if (static_cast<int>(past.size()) != cfg.n_joints) {
    throw UsageError("forward: expected " + std::to_string(cfg.n_joints) + " joints, got " +
                     std::to_string(past.size()));
  }
  for (const Mat& j : past) {
    if (j.rows() != 3 || j.cols() != cfg.t_h) {
      throw UsageError("forward: every joint needs a 3x" + std::to_string(cfg.t_h) +
                       " history, got " + std::to_string(j.rows()) + "x" + std::to_string(j.cols()));
    }
  }

  // Centroid over joints and frames; canonical joint order.
  Vec3 centroid0 = Vec3::Zero();
  for (int j : topo.order) centroid0 += past[static_cast<size_t>(j)].rowwise().sum();
  centroid0 /= static_cast<double>(cfg.n_joints) * cfg.t_h;

  EmbeddedState state;
  state.centroid = t.constant(centroid0);
  state.x.resize(past.size());
  state.v.resize(past.size());
  const bool inject_fault = model.fault_bias.squaredNorm() > 0.0;
  int fault = inject_fault ? t.constant(model.fault_bias) : -1;
  for (int j : topo.order) {
    const size_t js = static_cast<size_t>(j);
    Mat centered = past[js].colwise() - centroid0;
    state.x[js] =
        t.add_colbcast(t.matmul(t.constant(centered), ctx.p(model.embed_pos)), state.centroid);
    Mat diffs = past[js].rightCols(cfg.t_h - 1) - past[js].leftCols(cfg.t_h - 1);
    state.v[js] = t.matmul(t.constant(diffs), ctx.p(model.embed_vel));
    if (inject_fault) state.v[js] = t.add_colbcast(state.v[js], fault);
  }
  return state;
}

std::vector<int> model_forward_tape(ad::TapeCtx& ctx, const Model& model,
                                    const std::vector<Mat>& past) {
  const auto& cfg = model.cfg;
  const auto& topo = model.topo;
  auto& t = ctx.tape;

  EmbeddedState state = embed_tape(ctx, model, past);
  std::vector<int>& x = state.x;
  std::vector<int>& v = state.v;

  int centroid = state.centroid;
  for (const BlockParams& block : model.blocks) {
    std::vector<int> f;
    switch (cfg.field_mode) {
      case FieldMode::kFull: {
        auto fs = spatial_field(ctx, block.field, topo, model.hopemb, x, v);
        auto ft = temporal_field(ctx, block.field, x, v, centroid);
        f = total_force(ctx, fs, ft);
        break;
      }
      case FieldMode::kSpatialOnly:
        f = spatial_field(ctx, block.field, topo, model.hopemb, x, v);
        break;
      case FieldMode::kTemporalOnly:
        f = temporal_field(ctx, block.field, x, v, centroid);
        break;
      case FieldMode::kOff:
        f.assign(v.begin(), v.end());
        break;
    }
    if (cfg.use_inter) f = inter_group(ctx, block.group, topo, f);
    if (cfg.use_intra) f = intra_group(ctx, block.group, topo, f);

    std::vector<int> a;
    switch (cfg.dk_mode) {
      case DkMode::kParallel:
        a = parallel_dk(ctx, block.group, topo, f, x, v);
        break;
      case DkMode::kIterative:
        a = iterative_dk_tape(ctx, topo, f, x, v);
        break;
      case DkMode::kOff:
        a = f;
        break;
    }
    kinematics_update(ctx, block.group, a, x, v);
    if (cfg.centroid_refresh) centroid = centroid_update(ctx, block.group, topo, x);
  }

  std::vector<int> out(past.size());
  for (int j : topo.order) {
    const size_t js = static_cast<size_t>(j);
    out[js] =
        t.add_colbcast(t.matmul(t.sub_colbcast(x[js], centroid), ctx.p(model.head)), centroid);
  }
  return out;
}

std::vector<Mat> model_forward(const Model& model, const std::vector<Mat>& past) {
  ad::Tape tape;
  ad::TapeCtx ctx(tape, model.params);
  auto nodes = model_forward_tape(ctx, model, past);
  std::vector<Mat> out;
  out.reserve(nodes.size());
  for (int id : nodes) out.push_back(tape.val(id));
  return out;
}

size_t param_count(const Model& model) { return model.params.scalar_count(); }

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'G', 'G', 'M', 'P'};
constexpr uint16_t kVersion = 1;

template <typename T>
void write_raw(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_raw(std::istream& in, T& v, const std::string& what) {
  const long at = static_cast<long>(in.tellg());
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) {
    throw FormatError("checkpoint: truncated while reading " + what + " at byte " +
                      std::to_string(at));
  }
}

}  // namespace

void save_checkpoint(const Model& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot open checkpoint for writing: " + path);
  out.write(kMagic, 4);
  write_raw(out, kVersion);
  write_raw(out, static_cast<uint32_t>(model.params.count()));
  for (const auto& e : model.params.entries()) {
    write_raw(out, static_cast<uint16_t>(e.path.size()));
    out.write(e.path.data(), static_cast<std::streamsize>(e.path.size()));
    write_raw(out, static_cast<uint32_t>(e.value.rows()));
    write_raw(out, static_cast<uint32_t>(e.value.cols()));
    for (Eigen::Index r = 0; r < e.value.rows(); ++r) {
      for (Eigen::Index c = 0; c < e.value.cols(); ++c) {
        write_raw(out, static_cast<float>(e.value(r, c)));
      }
    }
  }
  if (!out) throw UsageError("checkpoint write failed: " + path);
}

void load_checkpoint(Model& model, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError("checkpoint: bad magic at byte 0 (expected \"GGMP\")");
  }
  uint16_t version;
  read_raw(in, version, "version");
  if (version != kVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  }
  uint32_t count;
  read_raw(in, count, "record count");

  std::vector<bool> seen(model.params.count(), false);
  for (uint32_t rec = 0; rec < count; ++rec) {
    uint16_t len;
    read_raw(in, len, "path length");
    std::string p(len, '\0');
    in.read(p.data(), len);
    if (!in) throw FormatError("checkpoint: truncated path in record " + std::to_string(rec));
    uint32_t rows, cols;
    read_raw(in, rows, "rows");
    read_raw(in, cols, "cols");
    int idx = model.params.index_of(p);
    if (idx < 0) throw FormatError("checkpoint: unknown parameter \"" + p + "\"");
    auto& entry = model.params.entry(idx);
    if (entry.value.rows() != static_cast<Eigen::Index>(rows) ||
        entry.value.cols() != static_cast<Eigen::Index>(cols)) {
      throw FormatError("checkpoint: shape mismatch for \"" + p + "\": file has " +
                        std::to_string(rows) + "x" + std::to_string(cols) + ", model expects " +
                        std::to_string(entry.value.rows()) + "x" +
                        std::to_string(entry.value.cols()));
    }
    if (seen[static_cast<size_t>(idx)]) {
      throw FormatError("checkpoint: duplicate parameter \"" + p + "\"");
    }
    seen[static_cast<size_t>(idx)] = true;
    for (uint32_t r = 0; r < rows; ++r) {
      for (uint32_t c = 0; c < cols; ++c) {
        float v;
        read_raw(in, v, "payload of \"" + p + "\"");
        entry.value(r, c) = static_cast<double>(v);
      }
    }
  }
  for (size_t i = 0; i < seen.size(); ++i) {
    if (!seen[i]) {
      throw FormatError("checkpoint: missing parameter \"" + model.params.entry(static_cast<int>(i)).path +
                        "\"");
    }
  }
  // Single-precision storage perturbs constrained columns; restore exactly.
  model.params.apply_constraints();
}

}  // namespace ggmotion
