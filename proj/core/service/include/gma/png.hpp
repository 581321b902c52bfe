#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>

#include "gma/track.hpp"

namespace gma {

/// Encodes 8-bit RGB pixels (row-major, 3 bytes per pixel) as a PNG file.
std::string encode_png(int width, int height, std::span<const std::uint8_t> rgb);

/// Schematic frame: skeleton bones and keypoint markers of `frame` on a
/// light background. Occluded keypoints are left out.
std::string render_skeleton_png(const TrackSet& tracks, std::size_t frame, int width, int height);

}  // namespace gma
