#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>

namespace gma {

/// The 17 tracked anatomical landmarks, in labelling-tool order.
enum class KeypointId : std::size_t {
  kNose = 0,
  kHeadBottom,
  kHeadTop,
  kLeftEar,
  kRightEar,
  kLeftShoulder,
  kRightShoulder,
  kLeftElbow,
  kRightElbow,
  kLeftWrist,
  kRightWrist,
  kLeftHip,
  kRightHip,
  kLeftKnee,
  kRightKnee,
  kLeftAnkle,
  kRightAnkle,
};

inline constexpr std::size_t kNumKeypoints = 17;
inline constexpr std::size_t kNumExtremeKeypoints = 9;

inline constexpr std::array<KeypointId, kNumKeypoints> kAllKeypoints = {
    KeypointId::kNose,          KeypointId::kHeadBottom,    KeypointId::kHeadTop,
    KeypointId::kLeftEar,       KeypointId::kRightEar,      KeypointId::kLeftShoulder,
    KeypointId::kRightShoulder, KeypointId::kLeftElbow,     KeypointId::kRightElbow,
    KeypointId::kLeftWrist,     KeypointId::kRightWrist,    KeypointId::kLeftHip,
    KeypointId::kRightHip,      KeypointId::kLeftKnee,      KeypointId::kRightKnee,
    KeypointId::kLeftAnkle,     KeypointId::kRightAnkle,
};

constexpr std::size_t index_of(KeypointId id) { return static_cast<std::size_t>(id); }

/// Canonical lower-case name, e.g. "left wrist".
std::string_view keypoint_name(KeypointId id);

/// Accepts the canonical name or its snake_case spelling ("left_wrist").
std::optional<KeypointId> parse_keypoint(std::string_view name);

/// Peripheral landmarks used to compute the crop box.
constexpr bool is_extreme(KeypointId id) {
  switch (id) {
    case KeypointId::kHeadTop:
    case KeypointId::kLeftElbow:
    case KeypointId::kRightElbow:
    case KeypointId::kLeftWrist:
    case KeypointId::kRightWrist:
    case KeypointId::kLeftKnee:
    case KeypointId::kRightKnee:
    case KeypointId::kLeftAnkle:
    case KeypointId::kRightAnkle:
      return true;
    default:
      return false;
  }
}

}  // namespace gma
