#include "gma/fragment.hpp"

#include <algorithm>
#include <string>

#include "gma/error.hpp"

namespace gma {
namespace {

TrackSet zero_fill(TrackSet tracks) {
  for (auto& track : tracks) {
    for (auto& s : track.samples) {
      if (!s.visible) s = Sample{};
    }
  }
  return tracks;
}

TrackSet slice(const TrackSet& tracks, std::size_t start, std::size_t length) {
  TrackSet out;
  for (std::size_t k = 0; k < kNumKeypoints; ++k) {
    const auto first = tracks[k].samples.begin() + static_cast<std::ptrdiff_t>(start);
    out[k].keypoint = tracks[k].keypoint;
    out[k].samples.assign(first, first + static_cast<std::ptrdiff_t>(length));
  }
  return out;
}

}  // namespace

PreparedRecord prepare_record(const VideoRecord& record, double target_fps, double margin) {
  validate_record(record);
  PreparedRecord out;
  out.info = record.info;
  out.info.fps = target_fps;
  out.pixel_tracks = zero_fill(resample_tracks(record.tracks, record.info.fps, target_fps));
  out.crop = compute_crop(out.pixel_tracks, record.info.frame_width, record.info.frame_height,
                          margin);
  out.tracks = normalize_to_crop(out.pixel_tracks, out.crop);
  return out;
}

std::size_t fragment_count(std::span<const std::size_t> lengths) {
  if (lengths.empty()) return 0;
  const std::size_t shortest = *std::min_element(lengths.begin(), lengths.end());
  if (shortest == 0) return 0;
  std::size_t total = 0;
  for (auto len : lengths) total += len / shortest;
  return total;
}

FragmentSet fragment_dataset(std::span<const PreparedRecord> records) {
  if (records.empty()) throw PreconditionError("fragment_dataset: empty record set");
  const double fps = records.front().info.fps;
  std::size_t shortest = records.front().frames();
  for (const auto& r : records) {
    if (r.info.fps != fps) {
      throw PreconditionError("fragment_dataset: records have different frame rates");
    }
    shortest = std::min(shortest, r.frames());
  }
  if (shortest == 0) throw PreconditionError("fragment_dataset: empty record");

  FragmentSet set;
  set.length = shortest;
  for (const auto& r : records) {
    const std::size_t count = r.frames() / shortest;
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t start = i * shortest;
      set.fragments.push_back(
          {r.info, start, slice(r.tracks, start, shortest), slice(r.pixel_tracks, start, shortest)});
    }
  }
  return set;
}

}  // namespace gma
