#pragma once

#include "ggmotion/topology.hpp"

#include <optional>
#include <string>
#include <vector>

namespace ggmotion {

/// Joint trajectories in millimeters: one 3 x T grid per joint.
struct MotionSequence {
  double fps = 25.0;
  std::vector<Mat> joints;

  int n_joints() const { return static_cast<int>(joints.size()); }
  int n_frames() const { return joints.empty() ? 0 : static_cast<int>(joints[0].cols()); }
};

/// One training sample: T_h past frames and T_f future frames per joint.
struct Window {
  std::vector<Mat> past;
  std::vector<Mat> future;
};

// "GGS1" binary: magic, u32 n_joints, u32 n_frames, f32 fps, then positions
// joint-major frame-minor as little-endian f32 triples.
void save_sequence(const MotionSequence& seq, const std::string& path);
MotionSequence load_sequence_ggs1(const std::string& path);

// JSON fixture: {"fps": hz, "parent": [...], "positions": [[[x,y,z], ...frames], ...joints]}.
// "parent" is optional metadata and not interpreted here.
MotionSequence sequence_from_json(const std::string& text);
std::string sequence_to_json(const MotionSequence& seq,
                             const std::optional<std::vector<int>>& parent = std::nullopt);

/// Loads either format, sniffing the GGS1 magic.
MotionSequence load_sequence(const std::string& path);

/// Sliding (past, future) pairs; count = floor((T - t_h - t_f) / stride) + 1.
std::vector<Window> windows(const MotionSequence& seq, int t_h, int t_f, int stride);

// ---------------------------------------------------------------------------
// Synthetic articulated sequences
// ---------------------------------------------------------------------------

/// Rigid forward-kinematics generator: every non-root joint sits at a fixed
/// bone-length offset from its parent, rotated by a sinusoidal angle around a
/// per-joint fixed axis, while the root drifts linearly. Child-parent
/// distances are exactly constant over time by construction.
struct SynthConfig {
  SkeletonTopology topo;
  std::vector<double> bone_lengths;  // per joint, mm; root entry ignored
  std::vector<double> freq_hz;       // per joint oscillation frequency
  std::vector<double> amplitude;     // per joint peak angle, radians
  Vec3 drift = Vec3::Zero();         // root velocity, mm/s
  int frames = 100;
  double fps = 25.0;
  uint64_t seed = 1;

  void validate() const;
};

SynthConfig synth_config_from_json(const std::string& text);
std::string synth_config_to_json(const SynthConfig& cfg);

MotionSequence synth_generate(const SynthConfig& cfg);

}  // namespace ggmotion
