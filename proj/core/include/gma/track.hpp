#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gma/keypoints.hpp"

namespace gma {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// One tracked observation. Image coordinates: origin top-left, y downward.
struct Sample {
  double x = 0.0;
  double y = 0.0;
  bool visible = false;

  friend bool operator==(const Sample&, const Sample&) = default;
};

struct KeypointTrack {
  KeypointId keypoint = KeypointId::kNose;
  std::vector<Sample> samples;

  std::size_t size() const { return samples.size(); }
  friend bool operator==(const KeypointTrack&, const KeypointTrack&) = default;
};

/// All 17 tracks of one video, indexed by KeypointId.
using TrackSet = std::array<KeypointTrack, kNumKeypoints>;

/// Builds a TrackSet of `frames` occluded samples with keypoint ids filled in.
TrackSet make_empty_tracks(std::size_t frames);

/// Common length of all tracks. Throws ValidationError if lengths differ.
std::size_t track_length(const TrackSet& tracks);

/// Checks equal lengths, keypoint ids in slot order, finite visible coordinates.
void validate_tracks(const TrackSet& tracks);

enum class AgeGroup { kEarly, kLate };

std::string_view to_string(AgeGroup group);
std::optional<AgeGroup> parse_age_group(std::string_view text);

/// Per-recording metadata shared by manifests, records and fragments.
struct VideoInfo {
  std::string video_id;
  std::string subject_id;
  AgeGroup age_group = AgeGroup::kEarly;
  int label = 0;  // 0 = normal, 1 = impaired
  double fps = 30.0;
  int frame_width = 0;
  int frame_height = 0;

  friend bool operator==(const VideoInfo&, const VideoInfo&) = default;
};

struct VideoRecord {
  VideoInfo info;
  TrackSet tracks;

  std::size_t frames() const { return tracks[0].size(); }
};

/// Throws ValidationError unless fps > 0, label binary, dims positive and tracks valid.
void validate_record(const VideoRecord& record);

}  // namespace gma
