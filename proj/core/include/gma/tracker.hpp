#pragma once

#include <cstddef>
#include <map>
#include <vector>

#include "gma/track.hpp"

namespace gma {

struct SeedPoint {
  KeypointId keypoint = KeypointId::kNose;
  std::size_t frame = 0;
  double x = 0.0;
  double y = 0.0;
};

/// Track `seeds` over frames [begin, end). Each seed frame must lie in range.
struct TrackingRequest {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::vector<SeedPoint> seeds;
};

/// Point-tracker boundary. Implementations return one track per seed, in seed
/// order, of length end - begin, reproducing each seed sample exactly.
class TrackerPort {
public:
  virtual ~TrackerPort() = default;
  virtual std::vector<KeypointTrack> track(const TrackingRequest& request) = 0;
};

/// Holds every seed point still for the whole range.
class HoldTracker final : public TrackerPort {
public:
  std::vector<KeypointTrack> track(const TrackingRequest& request) override;
};

/// Replays reference tracks translated so that they pass through each seed.
/// Visibility follows the reference except at the seed frame.
class ReplayTracker final : public TrackerPort {
public:
  explicit ReplayTracker(TrackSet reference) : reference_(std::move(reference)) {}
  std::vector<KeypointTrack> track(const TrackingRequest& request) override;

private:
  TrackSet reference_;
};

}  // namespace gma
