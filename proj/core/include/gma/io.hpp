#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gma/track.hpp"

namespace gma {

struct ManifestEntry {
  VideoInfo info;
  /// Absolute, or relative to the manifest's directory.
  std::filesystem::path track_path;
};

struct DatasetManifest {
  std::filesystem::path base_dir;
  std::vector<ManifestEntry> entries;

  std::size_t size() const { return entries.size(); }
  std::filesystem::path resolve(const ManifestEntry& entry) const;
};

/// Reads `video_id,subject_id,age_group,label,fps,width,height,track_path`.
/// Rows keep file order. Throws ParseError / ValidationError with row context.
DatasetManifest load_manifest(const std::filesystem::path& path);

/// Writes the manifest with track paths as given (relative paths stay relative).
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

/// Reads a `keypoint,frame,x,y,visible` track file. Frames not listed become
/// occluded (0, 0). When `expected_frames` is empty the length is max frame + 1.
TrackSet read_tracks(const std::filesystem::path& path,
                     std::optional<std::size_t> expected_frames = std::nullopt);

/// Writes every sample, coordinates in shortest round-trip decimal form.
void write_tracks(const TrackSet& tracks, const std::filesystem::path& path);
void write_tracks(const std::vector<KeypointTrack>& tracks, const std::filesystem::path& path);

/// Loads the manifest's tracks into records.
std::vector<VideoRecord> load_records(const DatasetManifest& manifest);

struct ReportRow {
  std::string model;
  std::string feature_set;
  std::string age_group;
  std::string metric;
  double mean = 0.0;
  double std = 0.0;
  int n_seeds = 0;

  friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

struct EvalReport {
  std::vector<ReportRow> rows;
};

/// Emits `model,feature_set,age_group,metric,mean,std,n_seeds` sorted by the
/// first four columns.
void write_report(const EvalReport& report, const std::filesystem::path& path);
EvalReport read_report(const std::filesystem::path& path);

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double value);

}  // namespace gma
