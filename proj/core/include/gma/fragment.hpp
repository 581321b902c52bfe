#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gma/preprocess.hpp"
#include "gma/track.hpp"

namespace gma {

/// A record after resampling and cropping. `tracks` are crop-normalized,
/// `pixel_tracks` keep resampled pixel coordinates (used for angles).
struct PreparedRecord {
  VideoInfo info;
  CropBox crop;
  TrackSet tracks;
  TrackSet pixel_tracks;

  std::size_t frames() const { return tracks[0].size(); }
};

/// Resamples to `target_fps`, computes the crop from the extreme keypoints and
/// normalizes. Occluded samples end up zero-filled in both track sets.
PreparedRecord prepare_record(const VideoRecord& record, double target_fps = kTargetFps,
                              double margin = kCropMargin);

struct Fragment {
  VideoInfo info;
  std::size_t start_frame = 0;
  TrackSet tracks;
  TrackSet pixel_tracks;

  std::size_t length() const { return tracks[0].size(); }
};

struct FragmentSet {
  std::vector<Fragment> fragments;
  std::size_t length = 0;
};

/// Number of fragments `fragment_dataset` yields for these record lengths.
std::size_t fragment_count(std::span<const std::size_t> lengths);

/// Cuts every record into non-overlapping fragments of the shortest record's
/// length, starting at frame 0; tails shorter than that are dropped.
FragmentSet fragment_dataset(std::span<const PreparedRecord> records);

}  // namespace gma
