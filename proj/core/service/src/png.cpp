#include "gma/png.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "gma/error.hpp"

namespace gma {
namespace {

void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v >> 24));
  out.push_back(static_cast<char>(v >> 16));
  out.push_back(static_cast<char>(v >> 8));
  out.push_back(static_cast<char>(v));
}

void put_chunk(std::string& out, const char* type, const std::string& data) {
  put_u32(out, static_cast<std::uint32_t>(data.size()));
  std::string body(type, 4);
  body += data;
  out += body;
  const auto crc = ::crc32(0L, reinterpret_cast<const Bytef*>(body.data()),
                           static_cast<uInt>(body.size()));
  put_u32(out, static_cast<std::uint32_t>(crc));
}

struct Canvas {
  int width;
  int height;
  std::vector<std::uint8_t> rgb;

  void set(int x, int y, std::array<std::uint8_t, 3> c) {
    if (x < 0 || y < 0 || x >= width || y >= height) return;
    const auto i = (static_cast<std::size_t>(y) * width + x) * 3;
    rgb[i] = c[0];
    rgb[i + 1] = c[1];
    rgb[i + 2] = c[2];
  }

  void line(double x0, double y0, double x1, double y1, std::array<std::uint8_t, 3> c) {
    const double steps = std::max({std::abs(x1 - x0), std::abs(y1 - y0), 1.0});
    for (int s = 0; s <= static_cast<int>(steps); ++s) {
      const double t = s / steps;
      const int x = static_cast<int>(std::lround(x0 + t * (x1 - x0)));
      const int y = static_cast<int>(std::lround(y0 + t * (y1 - y0)));
      set(x, y, c);
      set(x + 1, y, c);
      set(x, y + 1, c);
    }
  }

  void dot(double cx, double cy, int radius, std::array<std::uint8_t, 3> c) {
    const int x0 = static_cast<int>(std::lround(cx));
    const int y0 = static_cast<int>(std::lround(cy));
    for (int dy = -radius; dy <= radius; ++dy) {
      for (int dx = -radius; dx <= radius; ++dx) {
        if (dx * dx + dy * dy <= radius * radius) set(x0 + dx, y0 + dy, c);
      }
    }
  }
};

using K = KeypointId;
constexpr std::array<std::pair<K, K>, 14> kBones = {{
    {K::kHeadTop, K::kNose},
    {K::kNose, K::kHeadBottom},
    {K::kLeftShoulder, K::kRightShoulder},
    {K::kLeftShoulder, K::kLeftElbow},
    {K::kLeftElbow, K::kLeftWrist},
    {K::kRightShoulder, K::kRightElbow},
    {K::kRightElbow, K::kRightWrist},
    {K::kLeftShoulder, K::kLeftHip},
    {K::kRightShoulder, K::kRightHip},
    {K::kLeftHip, K::kRightHip},
    {K::kLeftHip, K::kLeftKnee},
    {K::kLeftKnee, K::kLeftAnkle},
    {K::kRightHip, K::kRightKnee},
    {K::kRightKnee, K::kRightAnkle},
}};

}  // namespace

std::string encode_png(int width, int height, std::span<const std::uint8_t> rgb) {
  if (width <= 0 || height <= 0) throw PreconditionError("encode_png: empty image");
  const auto row = static_cast<std::size_t>(width) * 3;
  if (rgb.size() != row * static_cast<std::size_t>(height)) {
    throw PreconditionError("encode_png: pixel buffer size mismatch");
  }
  std::vector<Bytef> raw;
  raw.reserve((row + 1) * height);
  for (int y = 0; y < height; ++y) {
    raw.push_back(0);  // filter: none
    raw.insert(raw.end(), rgb.begin() + y * row, rgb.begin() + (y + 1) * row);
  }
  uLongf packed_size = compressBound(static_cast<uLong>(raw.size()));
  std::string packed(packed_size, '\0');
  if (compress2(reinterpret_cast<Bytef*>(packed.data()), &packed_size, raw.data(),
                static_cast<uLong>(raw.size()), Z_BEST_SPEED) != Z_OK) {
    throw IoError("encode_png: zlib compression failed");
  }
  packed.resize(packed_size);

  std::string header;
  put_u32(header, static_cast<std::uint32_t>(width));
  put_u32(header, static_cast<std::uint32_t>(height));
  header += std::string{8, 2, 0, 0, 0};  // 8-bit depth, RGB, deflate, adaptive, no interlace

  std::string out = "\x89PNG\r\n\x1a\n";
  put_chunk(out, "IHDR", header);
  put_chunk(out, "IDAT", packed);
  put_chunk(out, "IEND", "");
  return out;
}

std::string render_skeleton_png(const TrackSet& tracks, std::size_t frame, int width, int height) {
  Canvas canvas{width, height,
                std::vector<std::uint8_t>(static_cast<std::size_t>(width) * height * 3, 235)};
  auto sample = [&](K id) -> const Sample& { return tracks[index_of(id)].samples.at(frame); };
  for (const auto& [a, b] : kBones) {
    const auto& p = sample(a);
    const auto& q = sample(b);
    if (p.visible && q.visible) canvas.line(p.x, p.y, q.x, q.y, {90, 90, 90});
  }
  for (auto id : kAllKeypoints) {
    const auto& s = sample(id);
    if (!s.visible) continue;
    const std::array<std::uint8_t, 3> colour =
        is_extreme(id) ? std::array<std::uint8_t, 3>{200, 40, 40} : std::array<std::uint8_t, 3>{40, 90, 200};
    canvas.dot(s.x, s.y, 4, colour);
  }
  return encode_png(width, height, canvas.rgb);
}

}  // namespace gma
