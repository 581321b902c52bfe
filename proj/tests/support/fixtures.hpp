#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gma/random.hpp"
#include "gma/track.hpp"

namespace gma::test {

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
  std::filesystem::path path_;
};

void write_file(const std::filesystem::path& path, const std::string& text);
std::string read_file(const std::filesystem::path& path);

/// Visible random-walk tracks inside a width x height frame.
TrackSet random_tracks(SplitMix64& rng, std::size_t frames, double width = 640.0,
                       double height = 480.0, double occlusion = 0.0);

/// Straight-line track along x with the given per-frame steps, starting at (x0, y0).
KeypointTrack track_from_steps(KeypointId id, const std::vector<double>& steps, double x0 = 100.0,
                               double y0 = 100.0);

/// Population standard deviation computed independently of the library.
double oracle_stddev(const std::vector<double>& values);

}  // namespace gma::test
