#include "gma/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "gma/error.hpp"
#include "gma/io.hpp"

namespace gma {

using K = KeypointId;

const std::array<AngleSpec, kNumAngles> kAngleSpecs = {{
    {K::kHeadTop, K::kNose, K::kHeadBottom, "head top to neck"},
    {K::kRightEar, K::kNose, K::kLeftEar, "right to left ear"},
    {K::kLeftElbow, K::kLeftShoulder, K::kHeadBottom, "head to left shoulder"},
    {K::kRightElbow, K::kRightShoulder, K::kHeadBottom, "head to right shoulder"},
    {K::kLeftWrist, K::kLeftElbow, K::kLeftShoulder, "left elbow"},
    {K::kRightWrist, K::kRightElbow, K::kRightShoulder, "right elbow"},
    {K::kLeftKnee, K::kLeftHip, K::kLeftShoulder, "left hip"},
    {K::kRightKnee, K::kRightHip, K::kRightShoulder, "right hip"},
    {K::kLeftHip, K::kLeftKnee, K::kLeftAnkle, "left knee"},
    {K::kRightHip, K::kRightKnee, K::kRightAnkle, "right knee"},
}};

std::optional<double> angle(Point2 p1, Point2 p2, Point2 p3) {
  const double ax = p1.x - p2.x;
  const double ay = p1.y - p2.y;
  const double bx = p3.x - p2.x;
  const double by = p3.y - p2.y;
  const double norms = std::hypot(ax, ay) * std::hypot(bx, by);
  if (!(norms > 0.0) || !std::isfinite(norms)) return std::nullopt;
  const double cosine = std::clamp((ax * bx + ay * by) / norms, -1.0, 1.0);
  return std::acos(cosine);
}

std::string_view to_string(FeatureSet set) {
  switch (set) {
    case FeatureSet::kCoords:
      return "coords";
    case FeatureSet::kAngles:
      return "angles";
    case FeatureSet::kBoth:
      return "both";
  }
  return "coords";
}

FeatureSet parse_feature_set(std::string_view text) {
  if (text == "coords") return FeatureSet::kCoords;
  if (text == "angles") return FeatureSet::kAngles;
  if (text == "both") return FeatureSet::kBoth;
  throw PreconditionError("unknown feature set '" + std::string(text) +
                          "' (expected coords, angles or both)");
}

std::size_t channel_count(FeatureSet set) {
  switch (set) {
    case FeatureSet::kCoords:
      return kNumCoordChannels;
    case FeatureSet::kAngles:
      return kNumAngles;
    case FeatureSet::kBoth:
      return kNumCoordChannels + kNumAngles;
  }
  return 0;
}

FeatureTensor::FeatureTensor(std::size_t channels, std::size_t length, FeatureSet set)
    : channels_(channels), length_(length), set_(set), values_(channels * length, 0.0),
      labels_(channels) {}

FeatureTensor coord_channels(const Fragment& fragment) {
  const std::size_t length = fragment.length();
  FeatureTensor tensor(kNumCoordChannels, length, FeatureSet::kCoords);
  for (std::size_t k = 0; k < kNumKeypoints; ++k) {
    const auto& track = fragment.tracks[k];
    const std::string name(keypoint_name(track.keypoint));
    tensor.labels()[2 * k] = name + ".x";
    tensor.labels()[2 * k + 1] = name + ".y";
    for (std::size_t t = 0; t < length; ++t) {
      const auto& s = track.samples[t];
      tensor.at(2 * k, t) = s.visible ? s.x : 0.0;
      tensor.at(2 * k + 1, t) = s.visible ? s.y : 0.0;
    }
  }
  return tensor;
}

FeatureTensor angle_channels(const Fragment& fragment, AngleSource source) {
  const auto& tracks = source == AngleSource::kPixels ? fragment.pixel_tracks : fragment.tracks;
  const std::size_t length = fragment.length();
  FeatureTensor tensor(kNumAngles, length, FeatureSet::kAngles);
  for (std::size_t a = 0; a < kNumAngles; ++a) {
    const auto& spec = kAngleSpecs[a];
    tensor.labels()[a] = "angle:" + std::string(keypoint_name(spec.first)) + "/" +
                         std::string(keypoint_name(spec.vertex)) + "/" +
                         std::string(keypoint_name(spec.second));
    const auto& s1 = tracks[index_of(spec.first)].samples;
    const auto& s2 = tracks[index_of(spec.vertex)].samples;
    const auto& s3 = tracks[index_of(spec.second)].samples;
    for (std::size_t t = 0; t < length; ++t) {
      if (!s1[t].visible || !s2[t].visible || !s3[t].visible) continue;
      const auto theta = angle({s1[t].x, s1[t].y}, {s2[t].x, s2[t].y}, {s3[t].x, s3[t].y});
      tensor.at(a, t) = theta.value_or(0.0);
    }
  }
  return tensor;
}

FeatureTensor build_features(const Fragment& fragment, FeatureSet set, AngleSource source) {
  switch (set) {
    case FeatureSet::kCoords:
      return coord_channels(fragment);
    case FeatureSet::kAngles:
      return angle_channels(fragment, source);
    case FeatureSet::kBoth:
      break;
  }
  const auto coords = coord_channels(fragment);
  const auto angles = angle_channels(fragment, source);
  FeatureTensor both(kNumCoordChannels + kNumAngles, fragment.length(), FeatureSet::kBoth);
  auto out = both.values();
  std::copy(coords.values().begin(), coords.values().end(), out.begin());
  std::copy(angles.values().begin(), angles.values().end(),
            out.begin() + static_cast<std::ptrdiff_t>(coords.values().size()));
  std::copy(coords.labels().begin(), coords.labels().end(), both.labels().begin());
  std::copy(angles.labels().begin(), angles.labels().end(),
            both.labels().begin() + static_cast<std::ptrdiff_t>(kNumCoordChannels));
  return both;
}

void write_feature_csv(const FeatureTensor& tensor, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << "channel";
  for (std::size_t t = 0; t < tensor.length(); ++t) out << ",t" << t;
  out << '\n';
  for (std::size_t c = 0; c < tensor.channels(); ++c) {
    out << tensor.labels()[c];
    for (double v : tensor.row(c)) out << ',' << format_double(v);
    out << '\n';
  }
  out.flush();
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace gma
