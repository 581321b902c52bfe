#include "gma/track.hpp"

#include <cmath>
#include <string>

#include "gma/error.hpp"

namespace gma {

TrackSet make_empty_tracks(std::size_t frames) {
  TrackSet tracks;
  for (auto id : kAllKeypoints) {
    tracks[index_of(id)].keypoint = id;
    tracks[index_of(id)].samples.assign(frames, Sample{});
  }
  return tracks;
}

std::size_t track_length(const TrackSet& tracks) {
  const std::size_t n = tracks[0].size();
  for (const auto& track : tracks) {
    if (track.size() != n) {
      throw ValidationError("track '" + std::string(keypoint_name(track.keypoint)) + "' has " +
                            std::to_string(track.size()) + " samples, expected " +
                            std::to_string(n));
    }
  }
  return n;
}

void validate_tracks(const TrackSet& tracks) {
  track_length(tracks);
  for (std::size_t k = 0; k < kNumKeypoints; ++k) {
    const auto& track = tracks[k];
    if (track.keypoint != kAllKeypoints[k]) {
      throw ValidationError("track slot " + std::to_string(k) + " holds keypoint '" +
                            std::string(keypoint_name(track.keypoint)) + "'");
    }
    for (std::size_t t = 0; t < track.size(); ++t) {
      const auto& s = track.samples[t];
      if (s.visible && !(std::isfinite(s.x) && std::isfinite(s.y))) {
        throw ValidationError("non-finite visible sample for '" +
                              std::string(keypoint_name(track.keypoint)) + "' at frame " +
                              std::to_string(t));
      }
    }
  }
}

std::string_view to_string(AgeGroup group) {
  return group == AgeGroup::kEarly ? "early" : "late";
}

std::optional<AgeGroup> parse_age_group(std::string_view text) {
  if (text == "early") return AgeGroup::kEarly;
  if (text == "late") return AgeGroup::kLate;
  return std::nullopt;
}

void validate_record(const VideoRecord& record) {
  const auto& info = record.info;
  if (!(info.fps > 0.0) || !std::isfinite(info.fps)) {
    throw ValidationError("video '" + info.video_id + "': fps must be positive");
  }
  if (info.label != 0 && info.label != 1) {
    throw ValidationError("video '" + info.video_id + "': label must be 0 or 1");
  }
  if (info.frame_width <= 0 || info.frame_height <= 0) {
    throw ValidationError("video '" + info.video_id + "': frame dimensions must be positive");
  }
  validate_tracks(record.tracks);
}

}  // namespace gma
