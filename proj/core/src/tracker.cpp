#include "gma/tracker.hpp"

#include <string>

#include "gma/error.hpp"

namespace gma {
namespace {

void check_request(const TrackingRequest& request) {
  if (request.end <= request.begin) throw PreconditionError("tracker: empty frame range");
  for (const auto& seed : request.seeds) {
    if (seed.frame < request.begin || seed.frame >= request.end) {
      throw PreconditionError("tracker: seed frame " + std::to_string(seed.frame) +
                              " outside requested range");
    }
  }
}

}  // namespace

std::vector<KeypointTrack> HoldTracker::track(const TrackingRequest& request) {
  check_request(request);
  std::vector<KeypointTrack> out;
  for (const auto& seed : request.seeds) {
    out.push_back({seed.keypoint,
                   std::vector<Sample>(request.end - request.begin, Sample{seed.x, seed.y, true})});
  }
  return out;
}

std::vector<KeypointTrack> ReplayTracker::track(const TrackingRequest& request) {
  check_request(request);
  std::vector<KeypointTrack> out;
  for (const auto& seed : request.seeds) {
    const auto& ref = reference_[index_of(seed.keypoint)].samples;
    if (request.end > ref.size()) throw PreconditionError("tracker: range beyond reference");

    // Anchor on the visible reference sample closest to the seed frame.
    std::size_t anchor = ref.size();
    for (std::size_t d = 0; d < ref.size() && anchor == ref.size(); ++d) {
      if (seed.frame + d < ref.size() && ref[seed.frame + d].visible) {
        anchor = seed.frame + d;
      } else if (d <= seed.frame && ref[seed.frame - d].visible) {
        anchor = seed.frame - d;
      }
    }
    KeypointTrack track{seed.keypoint, {}};
    track.samples.reserve(request.end - request.begin);
    for (std::size_t t = request.begin; t < request.end; ++t) {
      if (t == seed.frame) {
        track.samples.push_back({seed.x, seed.y, true});
      } else if (anchor < ref.size() && ref[t].visible) {
        track.samples.push_back({ref[t].x + seed.x - ref[anchor].x,
                                 ref[t].y + seed.y - ref[anchor].y, true});
      } else {
        track.samples.push_back(Sample{});
      }
    }
    out.push_back(std::move(track));
  }
  return out;
}

}  // namespace gma
