#include "ggmotion/data_io.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace ggmotion {

namespace {

constexpr char kMagic[4] = {'G', 'G', 'S', '1'};

template <typename T>
void write_raw(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_raw(std::istream& in, T& v, const std::string& what) {
  const long at = static_cast<long>(in.tellg());
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) {
    throw FormatError("sequence: truncated while reading " + what + " at byte " +
                      std::to_string(at));
  }
}

void check_sequence(const MotionSequence& seq) {
  if (seq.joints.empty() || seq.n_frames() < 1) {
    throw UsageError("sequence: need at least one joint and one frame");
  }
  for (const Mat& j : seq.joints) {
    if (j.rows() != 3 || j.cols() != seq.joints[0].cols()) {
      throw UsageError("sequence: inconsistent joint grid shapes");
    }
  }
}

}  // namespace

void save_sequence(const MotionSequence& seq, const std::string& path) {
  check_sequence(seq);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot open sequence for writing: " + path);
  out.write(kMagic, 4);
  write_raw(out, static_cast<uint32_t>(seq.n_joints()));
  write_raw(out, static_cast<uint32_t>(seq.n_frames()));
  write_raw(out, static_cast<float>(seq.fps));
  for (const Mat& joint : seq.joints) {
    for (Eigen::Index t = 0; t < joint.cols(); ++t) {
      for (int axis = 0; axis < 3; ++axis) {
        write_raw(out, static_cast<float>(joint(axis, t)));
      }
    }
  }
  if (!out) throw UsageError("sequence write failed: " + path);
}

MotionSequence load_sequence_ggs1(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open sequence: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError("sequence: bad magic at byte 0 (expected \"GGS1\")");
  }
  uint32_t n_joints, n_frames;
  float fps;
  read_raw(in, n_joints, "joint count");
  read_raw(in, n_frames, "frame count");
  read_raw(in, fps, "frame rate");
  if (n_joints == 0 || n_frames == 0) {
    throw FormatError("sequence: zero joints or frames in header");
  }
  MotionSequence seq;
  seq.fps = static_cast<double>(fps);
  seq.joints.assign(n_joints, Mat(3, n_frames));
  for (uint32_t j = 0; j < n_joints; ++j) {
    for (uint32_t t = 0; t < n_frames; ++t) {
      for (int axis = 0; axis < 3; ++axis) {
        float v;
        read_raw(in, v, "position of joint " + std::to_string(j) + " frame " + std::to_string(t));
        seq.joints[j](axis, t) = static_cast<double>(v);
      }
    }
  }
  return seq;
}

MotionSequence sequence_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("sequence JSON: ") + e.what());
  }
  if (!j.contains("positions")) throw FormatError("sequence JSON: missing \"positions\"");
  MotionSequence seq;
  seq.fps = j.value("fps", 25.0);
  for (const auto& joint : j.at("positions")) {
    Mat grid(3, joint.size());
    Eigen::Index t = 0;
    for (const auto& frame : joint) {
      if (frame.size() != 3) throw FormatError("sequence JSON: frame is not an [x, y, z] triple");
      for (int axis = 0; axis < 3; ++axis) grid(axis, t) = frame.at(static_cast<size_t>(axis)).get<double>();
      ++t;
    }
    seq.joints.push_back(std::move(grid));
  }
  check_sequence(seq);
  return seq;
}

std::string sequence_to_json(const MotionSequence& seq, const std::optional<std::vector<int>>& parent) {
  check_sequence(seq);
  nlohmann::json j;
  j["fps"] = seq.fps;
  if (parent) {
    auto& p = j["parent"] = nlohmann::json::array();
    for (int v : *parent) {
      if (v == -1) {
        p.push_back(nullptr);
      } else {
        p.push_back(v);
      }
    }
  }
  auto& positions = j["positions"] = nlohmann::json::array();
  for (const Mat& joint : seq.joints) {
    nlohmann::json frames = nlohmann::json::array();
    for (Eigen::Index t = 0; t < joint.cols(); ++t) {
      frames.push_back({joint(0, t), joint(1, t), joint(2, t)});
    }
    positions.push_back(std::move(frames));
  }
  return j.dump();
}

MotionSequence load_sequence(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open sequence: " + path);
  char magic[4] = {0, 0, 0, 0};
  in.read(magic, 4);
  in.close();
  if (std::memcmp(magic, kMagic, 4) == 0) return load_sequence_ggs1(path);
  std::ifstream text(path);
  std::stringstream ss;
  ss << text.rdbuf();
  return sequence_from_json(ss.str());
}

std::vector<Window> windows(const MotionSequence& seq, int t_h, int t_f, int stride) {
  if (t_h < 1 || t_f < 1 || stride < 1) {
    throw UsageError("windows: t_h, t_f and stride must be positive");
  }
  if (t_h + t_f > seq.n_frames()) {
    throw UsageError("windows: sequence has " + std::to_string(seq.n_frames()) +
                     " frames, need at least " + std::to_string(t_h + t_f));
  }
  const int count = (seq.n_frames() - t_h - t_f) / stride + 1;
  std::vector<Window> out;
  out.reserve(static_cast<size_t>(count));
  for (int w = 0; w < count; ++w) {
    Window win;
    win.past.reserve(seq.joints.size());
    win.future.reserve(seq.joints.size());
    const int start = w * stride;
    for (const Mat& joint : seq.joints) {
      win.past.push_back(joint.middleCols(start, t_h));
      win.future.push_back(joint.middleCols(start + t_h, t_f));
    }
    out.push_back(std::move(win));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic generator
// ---------------------------------------------------------------------------

void SynthConfig::validate() const {
  const size_t n = static_cast<size_t>(topo.n_joints);
  if (bone_lengths.size() != n || freq_hz.size() != n || amplitude.size() != n) {
    throw ConfigError("synth config: bone_lengths/freq_hz/amplitude must have one entry per joint");
  }
  for (size_t j = 0; j < n; ++j) {
    if (static_cast<int>(j) != topo.root && bone_lengths[j] <= 0.0) {
      throw ConfigError("synth config: bone length of joint " + std::to_string(j) +
                        " must be positive");
    }
    if (freq_hz[j] < 0.0) throw ConfigError("synth config: negative frequency");
  }
  if (frames < 1 || fps <= 0.0) throw ConfigError("synth config: frames/fps must be positive");
}

SynthConfig synth_config_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("synth config JSON: ") + e.what());
  }
  SynthConfig c;
  std::vector<int> parent;
  for (const auto& p : j.at("parent")) parent.push_back(p.is_null() ? -1 : p.get<int>());
  auto groups = j.at("groups").get<std::vector<std::vector<int>>>();
  c.topo = build_topology(std::move(parent), std::move(groups));
  c.bone_lengths = j.at("bone_lengths").get<std::vector<double>>();
  c.freq_hz = j.at("freq_hz").get<std::vector<double>>();
  c.amplitude = j.at("amplitude").get<std::vector<double>>();
  if (j.contains("drift")) {
    auto d = j.at("drift").get<std::vector<double>>();
    if (d.size() != 3) throw FormatError("synth config: drift must be [x, y, z]");
    c.drift = Vec3(d[0], d[1], d[2]);
  }
  c.frames = j.value("frames", c.frames);
  c.fps = j.value("fps", c.fps);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

std::string synth_config_to_json(const SynthConfig& c) {
  nlohmann::json j;
  auto& parents = j["parent"] = nlohmann::json::array();
  for (int p : c.topo.parent) {
    if (p == -1) {
      parents.push_back(nullptr);
    } else {
      parents.push_back(p);
    }
  }
  j["groups"] = c.topo.groups;
  j["bone_lengths"] = c.bone_lengths;
  j["freq_hz"] = c.freq_hz;
  j["amplitude"] = c.amplitude;
  j["drift"] = {c.drift.x(), c.drift.y(), c.drift.z()};
  j["frames"] = c.frames;
  j["fps"] = c.fps;
  j["seed"] = c.seed;
  return j.dump(2);
}

MotionSequence synth_generate(const SynthConfig& cfg) {
  cfg.validate();
  const auto& topo = cfg.topo;
  const int n = topo.n_joints;
  Rng rng(cfg.seed);

  std::vector<Vec3> axis(static_cast<size_t>(n)), offset(static_cast<size_t>(n));
  std::vector<double> phase(static_cast<size_t>(n));
  for (int j = 0; j < n; ++j) {
    Rng r = rng.split("joint." + std::to_string(j));
    Vec3 u(r.normal(), r.normal(), r.normal());
    if (u.norm() < 1e-9) u = Vec3(0, 0, 1);
    axis[static_cast<size_t>(j)] = u.normalized();
    Vec3 d(r.normal(), r.normal(), r.normal());
    if (d.norm() < 1e-9) d = Vec3(1, 0, 0);
    offset[static_cast<size_t>(j)] = d.normalized() * cfg.bone_lengths[static_cast<size_t>(j)];
    phase[static_cast<size_t>(j)] = r.uniform(0.0, 2.0 * M_PI);
  }

  // Parents before children.
  std::vector<int> bfs{topo.root};
  for (size_t q = 0; q < bfs.size(); ++q) {
    for (int nb : topo.neighbors[static_cast<size_t>(bfs[q])]) {
      if (nb != topo.parent[static_cast<size_t>(bfs[q])]) bfs.push_back(nb);
    }
  }

  MotionSequence seq;
  seq.fps = cfg.fps;
  seq.joints.assign(static_cast<size_t>(n), Mat(3, cfg.frames));
  for (int t = 0; t < cfg.frames; ++t) {
    const double time = static_cast<double>(t) / cfg.fps;
    for (int j : bfs) {
      const size_t js = static_cast<size_t>(j);
      if (topo.parent[js] == -1) {
        seq.joints[js].col(t) = cfg.drift * time;
      } else {
        double angle = cfg.amplitude[js] *
                       std::sin(2.0 * M_PI * cfg.freq_hz[js] * time + phase[js]);
        Vec3 parent_pos = seq.joints[static_cast<size_t>(topo.parent[js])].col(t);
        seq.joints[js].col(t) = parent_pos + rotation_axis_angle(axis[js], angle) * offset[js];
      }
    }
  }
  return seq;
}

}  // namespace ggmotion
