#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gma/io.hpp"
#include "gma/track.hpp"

namespace gma {

/// Oscillation of limb keypoints around their rest pose for one class.
struct ClassMotion {
  double amplitude_px = 0.0;
  double frequency_hz = 0.0;
  /// Relative spread of per-subject amplitude and per-keypoint frequency.
  double variability = 0.0;
};

struct JumpInjection {
  std::size_t subject = 0;  // index into the generated records
  KeypointId keypoint = KeypointId::kNose;
  std::size_t frame = 0;
  double dx = 0.0;
  double dy = 0.0;
};

enum class AgeMix { kEarly, kLate, kAlternate };

struct SynthSpec {
  std::size_t n_subjects = 40;
  /// Fraction of subjects with label 1.
  double class_balance = 0.5;
  ClassMotion normal{24.0, 0.8, 0.25};
  ClassMotion impaired{6.0, 0.5, 0.1};
  double jitter_px = 0.4;
  /// Per-subject random displacement of the rest pose.
  double pose_jitter_px = 4.0;
  double occlusion_rate = 0.0;
  std::vector<double> fps_choices = {30.0, 60.0, 120.0};
  double min_duration_s = 8.0;
  double max_duration_s = 14.0;
  AgeMix age_mix = AgeMix::kEarly;
  int frame_width = 640;
  int frame_height = 480;
  std::vector<JumpInjection> jumps;
  std::uint64_t seed = 0;

  /// Throws PreconditionError on an invalid spec.
  void validate() const;
  std::string to_json() const;
  static SynthSpec from_json(const std::string& text);
};

/// Rest pose of the synthetic infant (pixels, 640x480 frame).
Point2 rest_pose(KeypointId id);

struct SynthDataset {
  DatasetManifest manifest;  // track paths "tracks/<video_id>.csv"
  std::vector<VideoRecord> records;
};

/// One record per subject; labels are assigned so that exactly
/// round(n * class_balance) subjects are impaired. Deterministic in spec.seed.
SynthDataset generate(const SynthSpec& spec);

/// Displaces `keypoint` by (dx, dy) from `frame` to the end of the record.
/// Throws PreconditionError when frame is out of range.
VideoRecord inject_jump(VideoRecord record, KeypointId keypoint, std::size_t frame, double dx,
                        double dy);

/// Writes manifest.csv, tracks/<video_id>.csv and synth_spec.json.
void write_dataset(const SynthDataset& dataset, const SynthSpec& spec,
                   const std::filesystem::path& out_dir);

}  // namespace gma
