#include "fixtures.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unistd.h>

namespace gma::test {

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          ("gma_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

TrackSet random_tracks(SplitMix64& rng, std::size_t frames, double width, double height,
                       double occlusion) {
  TrackSet tracks = make_empty_tracks(frames);
  for (auto& track : tracks) {
    double x = rng.uniform(0.2, 0.8) * width;
    double y = rng.uniform(0.2, 0.8) * height;
    for (auto& s : track.samples) {
      x = std::clamp(x + rng.normal(0.0, 3.0), 0.0, width);
      y = std::clamp(y + rng.normal(0.0, 3.0), 0.0, height);
      if (occlusion > 0.0 && rng.uniform() < occlusion) {
        s = Sample{};
      } else {
        s = {x, y, true};
      }
    }
  }
  return tracks;
}

KeypointTrack track_from_steps(KeypointId id, const std::vector<double>& steps, double x0,
                               double y0) {
  KeypointTrack track{id, {}};
  double x = x0;
  track.samples.push_back({x, y0, true});
  for (double step : steps) {
    x += step;
    track.samples.push_back({x, y0, true});
  }
  return track;
}

double oracle_stddev(const std::vector<double>& values) {
  long double sum = 0;
  for (double v : values) sum += v;
  const long double mean = sum / values.size();
  long double sq = 0;
  for (double v : values) sq += (v - mean) * (v - mean);
  return static_cast<double>(std::sqrt(sq / values.size()));
}

}  // namespace gma::test
