#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gma/track.hpp"

namespace gma {

inline constexpr double kTargetFps = 30.0;
inline constexpr double kCropMargin = 0.15;
inline constexpr double kOutlierSigmaMultiple = 15.0;

/// Number of samples a track of `source_frames` has after resampling.
std::size_t resampled_length(std::size_t source_frames, double source_fps, double target_fps);

/// Linear interpolation onto a `target_fps` timeline spanning the same
/// duration. An interpolated sample is visible only if both bracketing source
/// samples are; occluded interpolated outputs are zero-filled.
KeypointTrack resample_track(const KeypointTrack& track, double source_fps,
                             double target_fps = kTargetFps);
TrackSet resample_tracks(const TrackSet& tracks, double source_fps, double target_fps = kTargetFps);

struct CropBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  bool contains(double x, double y) const {
    return x >= x_min && x <= x_max && y >= y_min && y <= y_max;
  }
  friend bool operator==(const CropBox&, const CropBox&) = default;
};

/// Bounding box of every visible sample of the extreme keypoints among
/// `tracks` (non-extreme tracks are ignored), widened on each axis by
/// `margin` times that axis' span and clamped to the frame. A zero span is
/// widened by `margin` times the larger frame dimension instead.
/// Throws PreconditionError when no extreme sample is visible.
CropBox compute_crop(std::span<const KeypointTrack> tracks, int frame_width, int frame_height,
                     double margin = kCropMargin);

/// Maps visible samples into [0,1]^2 relative to `crop` (clipped); occluded
/// samples become (0, 0) and stay occluded.
KeypointTrack normalize_to_crop(const KeypointTrack& track, const CropBox& crop);
TrackSet normalize_to_crop(const TrackSet& tracks, const CropBox& crop);

/// Inverse of normalize_to_crop for visible samples.
KeypointTrack denormalize_from_crop(const KeypointTrack& track, const CropBox& crop);

struct OutlierFlag {
  KeypointId keypoint = KeypointId::kNose;
  std::size_t frame = 0;  // later frame of the jump
  double displacement = 0.0;
  double threshold = 0.0;

  friend bool operator==(const OutlierFlag&, const OutlierFlag&) = default;
};

struct OutlierScan {
  std::vector<OutlierFlag> flags;  // sorted by (keypoint, frame)
  /// Keypoints with fewer than two usable displacements.
  std::vector<KeypointId> skipped;
};

/// Population standard deviation (two-pass).
double population_stddev(std::span<const double> values);

/// Flags frame t+1 of keypoint k when |p[t+1] - p[t]| > k_sigma * sigma_k,
/// sigma_k being the standard deviation of all of k's displacement magnitudes
/// between adjacent frames that are both visible. A sigma_k that is zero, or
/// below 1e-9 times the largest coordinate magnitude (rounding noise of a
/// constant step), never flags.
OutlierScan detect_outliers(std::span<const KeypointTrack> tracks,
                            double k_sigma = kOutlierSigmaMultiple);

}  // namespace gma
