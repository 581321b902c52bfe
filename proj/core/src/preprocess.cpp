#include "gma/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "gma/error.hpp"

namespace gma {
namespace {

// Tolerance for deciding that a resampled instant falls exactly on a source frame.
constexpr double kGridTolerance = 1e-9;

void check_rates(double source_fps, double target_fps) {
  if (!(source_fps > 0.0) || !(target_fps > 0.0) || !std::isfinite(source_fps) ||
      !std::isfinite(target_fps)) {
    throw PreconditionError("resample: frame rates must be positive");
  }
}

}  // namespace

std::size_t resampled_length(std::size_t source_frames, double source_fps, double target_fps) {
  check_rates(source_fps, target_fps);
  if (source_frames == 0) return 0;
  const double span = static_cast<double>(source_frames - 1) * target_fps / source_fps;
  return static_cast<std::size_t>(std::floor(span + kGridTolerance)) + 1;
}

KeypointTrack resample_track(const KeypointTrack& track, double source_fps, double target_fps) {
  if (track.samples.empty()) throw PreconditionError("resample: empty track");
  const std::size_t n_out = resampled_length(track.size(), source_fps, target_fps);
  const auto& src = track.samples;
  KeypointTrack out{track.keypoint, {}};
  out.samples.reserve(n_out);
  for (std::size_t i = 0; i < n_out; ++i) {
    const double position = static_cast<double>(i) * source_fps / target_fps;
    auto lo = static_cast<std::size_t>(std::floor(position + kGridTolerance));
    double frac = position - static_cast<double>(lo);
    if (lo >= src.size() - 1) {
      lo = src.size() - 1;
      frac = 0.0;
    }
    if (std::abs(frac) < kGridTolerance) {
      out.samples.push_back(src[lo]);
      continue;
    }
    const Sample& a = src[lo];
    const Sample& b = src[lo + 1];
    Sample s;
    if (a.visible && b.visible) {
      s.x = a.x + frac * (b.x - a.x);
      s.y = a.y + frac * (b.y - a.y);
      s.visible = true;
    }
    out.samples.push_back(s);
  }
  return out;
}

TrackSet resample_tracks(const TrackSet& tracks, double source_fps, double target_fps) {
  TrackSet out;
  for (std::size_t k = 0; k < kNumKeypoints; ++k) {
    out[k] = resample_track(tracks[k], source_fps, target_fps);
  }
  return out;
}

CropBox compute_crop(std::span<const KeypointTrack> tracks, int frame_width, int frame_height,
                     double margin) {
  if (frame_width <= 0 || frame_height <= 0) {
    throw PreconditionError("compute_crop: frame dimensions must be positive");
  }
  if (!(margin >= 0.0)) throw PreconditionError("compute_crop: margin must be non-negative");
  double x_min = std::numeric_limits<double>::infinity();
  double y_min = x_min;
  double x_max = -x_min;
  double y_max = -x_min;
  bool any = false;
  for (const auto& track : tracks) {
    if (!is_extreme(track.keypoint)) continue;
    for (const auto& s : track.samples) {
      if (!s.visible) continue;
      any = true;
      x_min = std::min(x_min, s.x);
      x_max = std::max(x_max, s.x);
      y_min = std::min(y_min, s.y);
      y_max = std::max(y_max, s.y);
    }
  }
  if (!any) throw PreconditionError("compute_crop: no visible extreme keypoint sample");

  const double degenerate_pad = margin * std::max(frame_width, frame_height);
  const double pad_x = x_max > x_min ? margin * (x_max - x_min) : degenerate_pad;
  const double pad_y = y_max > y_min ? margin * (y_max - y_min) : degenerate_pad;
  const double w = frame_width;
  const double h = frame_height;
  CropBox box{std::clamp(x_min - pad_x, 0.0, w), std::clamp(y_min - pad_y, 0.0, h),
              std::clamp(x_max + pad_x, 0.0, w), std::clamp(y_max + pad_y, 0.0, h)};
  if (!(box.x_min < box.x_max) || !(box.y_min < box.y_max)) {
    throw PreconditionError("compute_crop: degenerate crop box");
  }
  return box;
}

KeypointTrack normalize_to_crop(const KeypointTrack& track, const CropBox& crop) {
  if (!(crop.x_min < crop.x_max) || !(crop.y_min < crop.y_max)) {
    throw PreconditionError("normalize_to_crop: degenerate crop box");
  }
  KeypointTrack out{track.keypoint, {}};
  out.samples.reserve(track.size());
  for (const auto& s : track.samples) {
    Sample n;
    if (s.visible) {
      n.x = std::clamp((s.x - crop.x_min) / crop.width(), 0.0, 1.0);
      n.y = std::clamp((s.y - crop.y_min) / crop.height(), 0.0, 1.0);
      n.visible = true;
    }
    out.samples.push_back(n);
  }
  return out;
}

TrackSet normalize_to_crop(const TrackSet& tracks, const CropBox& crop) {
  TrackSet out;
  for (std::size_t k = 0; k < kNumKeypoints; ++k) out[k] = normalize_to_crop(tracks[k], crop);
  return out;
}

KeypointTrack denormalize_from_crop(const KeypointTrack& track, const CropBox& crop) {
  KeypointTrack out{track.keypoint, {}};
  out.samples.reserve(track.size());
  for (const auto& s : track.samples) {
    Sample p;
    if (s.visible) {
      p.x = crop.x_min + s.x * crop.width();
      p.y = crop.y_min + s.y * crop.height();
      p.visible = true;
    }
    out.samples.push_back(p);
  }
  return out;
}

double population_stddev(std::span<const double> values) {
  if (values.empty()) return 0.0;
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  double squares = 0.0;
  for (double v : values) squares += (v - mean) * (v - mean);
  return std::sqrt(squares / static_cast<double>(values.size()));
}

namespace {
constexpr double kSigmaNoiseFloor = 1e-9;
}  // namespace

OutlierScan detect_outliers(std::span<const KeypointTrack> tracks, double k_sigma) {
  if (!(k_sigma > 0.0)) throw PreconditionError("detect_outliers: k must be positive");
  OutlierScan scan;
  std::vector<double> displacement;
  std::vector<std::size_t> frame;
  for (const auto& track : tracks) {
    if (track.size() < 3) {
      throw PreconditionError("detect_outliers: tracks need at least 3 samples");
    }
    displacement.clear();
    frame.clear();
    double scale = 1.0;
    for (std::size_t t = 0; t + 1 < track.size(); ++t) {
      const auto& a = track.samples[t];
      const auto& b = track.samples[t + 1];
      if (!a.visible || !b.visible) continue;
      scale = std::max({scale, std::abs(a.x), std::abs(a.y), std::abs(b.x), std::abs(b.y)});
      displacement.push_back(std::hypot(b.x - a.x, b.y - a.y));
      frame.push_back(t + 1);
    }
    if (displacement.size() < 2) {
      scan.skipped.push_back(track.keypoint);
      continue;
    }
    const double sigma = population_stddev(displacement);
    // Equal displacements can still differ in the last bits once coordinates
    // are large; such a spread is rounding noise, not motion.
    if (sigma <= kSigmaNoiseFloor * scale) continue;
    const double threshold = k_sigma * sigma;
    for (std::size_t i = 0; i < displacement.size(); ++i) {
      if (displacement[i] > threshold) {
        scan.flags.push_back({track.keypoint, frame[i], displacement[i], threshold});
      }
    }
  }
  std::sort(scan.flags.begin(), scan.flags.end(), [](const OutlierFlag& a, const OutlierFlag& b) {
    if (a.keypoint != b.keypoint) return index_of(a.keypoint) < index_of(b.keypoint);
    return a.frame < b.frame;
  });
  std::sort(scan.skipped.begin(), scan.skipped.end(),
            [](KeypointId a, KeypointId b) { return index_of(a) < index_of(b); });
  return scan;
}

}  // namespace gma
