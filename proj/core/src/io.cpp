#include "gma/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <tuple>

#include "csv.hpp"
#include "gma/error.hpp"

namespace gma {
namespace {

const std::vector<std::string> kManifestHeader = {"video_id", "subject_id", "age_group", "label",
                                                  "fps",      "width",      "height",
                                                  "track_path"};
const std::vector<std::string> kTrackHeader = {"keypoint", "frame", "x", "y", "visible"};
const std::vector<std::string> kReportHeader = {"model", "feature_set", "age_group", "metric",
                                                "mean",  "std",         "n_seeds"};

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace

std::string format_double(double value) {
  char buffer[64];
  auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  if (ec != std::errc{}) throw Error("cannot format double");
  return std::string(buffer, ptr);
}

std::filesystem::path DatasetManifest::resolve(const ManifestEntry& entry) const {
  if (entry.track_path.is_absolute()) return entry.track_path;
  return base_dir / entry.track_path;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  const auto table = csv::read(path, kManifestHeader);
  DatasetManifest manifest;
  manifest.base_dir = path.parent_path();
  std::set<std::string> seen;
  for (const auto& row : table.rows) {
    const auto& f = row.fields;
    const auto where = csv::context(path, row.line);
    ManifestEntry entry;
    entry.info.video_id = f[0];
    entry.info.subject_id = f[1];
    if (entry.info.video_id.empty()) throw ValidationError(where + ": empty video_id");
    if (entry.info.subject_id.empty()) throw ValidationError(where + ": empty subject_id");
    if (!seen.insert(entry.info.video_id).second) {
      throw ValidationError(where + ": duplicate video_id '" + entry.info.video_id + "'");
    }
    auto group = parse_age_group(f[2]);
    if (!group) throw ValidationError(where + ": unknown age_group '" + f[2] + "'");
    entry.info.age_group = *group;
    const auto label = csv::parse_int(f[3], path, row.line);
    if (label != 0 && label != 1) throw ValidationError(where + ": label must be 0 or 1");
    entry.info.label = static_cast<int>(label);
    entry.info.fps = csv::parse_double(f[4], path, row.line);
    if (!(entry.info.fps > 0.0) || !std::isfinite(entry.info.fps)) {
      throw ValidationError(where + ": fps must be positive");
    }
    const auto width = csv::parse_int(f[5], path, row.line);
    const auto height = csv::parse_int(f[6], path, row.line);
    if (width <= 0 || height <= 0) throw ValidationError(where + ": frame dimensions must be positive");
    entry.info.frame_width = static_cast<int>(width);
    entry.info.frame_height = static_cast<int>(height);
    entry.track_path = f[7];
    if (entry.track_path.empty()) throw ValidationError(where + ": empty track_path");
    if (!std::filesystem::exists(manifest.resolve(entry))) {
      throw ValidationError(where + ": track file '" + manifest.resolve(entry).string() +
                            "' does not exist");
    }
    manifest.entries.push_back(std::move(entry));
  }
  return manifest;
}

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  auto out = open_for_write(path);
  out << "video_id,subject_id,age_group,label,fps,width,height,track_path\n";
  for (const auto& e : manifest.entries) {
    out << e.info.video_id << ',' << e.info.subject_id << ',' << to_string(e.info.age_group) << ','
        << e.info.label << ',' << format_double(e.info.fps) << ',' << e.info.frame_width << ','
        << e.info.frame_height << ',' << e.track_path.generic_string() << '\n';
  }
  finish(out, path);
}

TrackSet read_tracks(const std::filesystem::path& path, std::optional<std::size_t> expected_frames) {
  const auto table = csv::read(path, kTrackHeader);

  struct Parsed {
    KeypointId keypoint;
    std::size_t frame;
    Sample sample;
  };
  std::vector<Parsed> parsed;
  parsed.reserve(table.rows.size());
  std::size_t max_frame_plus_one = 0;
  for (const auto& row : table.rows) {
    const auto& f = row.fields;
    const auto where = csv::context(path, row.line);
    auto id = parse_keypoint(f[0]);
    if (!id) throw ValidationError(where + ": unknown keypoint '" + f[0] + "'");
    const auto frame = csv::parse_int(f[1], path, row.line);
    if (frame < 0) throw ValidationError(where + ": negative frame index");
    if (expected_frames && static_cast<std::size_t>(frame) >= *expected_frames) {
      throw ValidationError(where + ": frame " + std::to_string(frame) + " outside 0.." +
                            std::to_string(*expected_frames - 1));
    }
    Sample s;
    s.x = csv::parse_double(f[2], path, row.line);
    s.y = csv::parse_double(f[3], path, row.line);
    if (f[4] == "1") {
      s.visible = true;
    } else if (f[4] != "0") {
      throw ValidationError(where + ": visible must be 0 or 1");
    }
    if (s.visible && !(std::isfinite(s.x) && std::isfinite(s.y))) {
      throw ValidationError(where + ": non-finite coordinate on a visible sample");
    }
    max_frame_plus_one = std::max(max_frame_plus_one, static_cast<std::size_t>(frame) + 1);
    parsed.push_back({*id, static_cast<std::size_t>(frame), s});
  }

  const std::size_t frames = expected_frames.value_or(max_frame_plus_one);
  TrackSet tracks = make_empty_tracks(frames);
  std::vector<std::vector<bool>> filled(kNumKeypoints, std::vector<bool>(frames, false));
  std::array<bool, kNumKeypoints> present{};
  for (std::size_t i = 0; i < parsed.size(); ++i) {
    const auto& p = parsed[i];
    const auto k = index_of(p.keypoint);
    if (filled[k][p.frame]) {
      throw ValidationError(csv::context(path, table.rows[i].line) + ": duplicate row for '" +
                            std::string(keypoint_name(p.keypoint)) + "' frame " +
                            std::to_string(p.frame));
    }
    filled[k][p.frame] = true;
    present[k] = true;
    tracks[k].samples[p.frame] = p.sample;
  }
  for (auto id : kAllKeypoints) {
    if (!present[index_of(id)]) {
      throw ValidationError(path.string() + ": missing keypoint '" +
                            std::string(keypoint_name(id)) + "'");
    }
  }
  return tracks;
}

void write_tracks(const std::vector<KeypointTrack>& tracks, const std::filesystem::path& path) {
  if (tracks.empty()) throw PreconditionError("write_tracks: empty track list");
  const std::size_t n = tracks.front().size();
  for (const auto& t : tracks) {
    if (t.size() != n) throw PreconditionError("write_tracks: tracks differ in length");
    for (const auto& s : t.samples) {
      if (s.visible && !(std::isfinite(s.x) && std::isfinite(s.y))) {
        throw PreconditionError("write_tracks: non-finite visible coordinate");
      }
    }
  }
  auto out = open_for_write(path);
  out << "keypoint,frame,x,y,visible\n";
  for (const auto& t : tracks) {
    const auto name = keypoint_name(t.keypoint);
    for (std::size_t frame = 0; frame < t.size(); ++frame) {
      const auto& s = t.samples[frame];
      out << name << ',' << frame << ',' << format_double(s.x) << ',' << format_double(s.y) << ','
          << (s.visible ? '1' : '0') << '\n';
    }
  }
  finish(out, path);
}

void write_tracks(const TrackSet& tracks, const std::filesystem::path& path) {
  write_tracks(std::vector<KeypointTrack>(tracks.begin(), tracks.end()), path);
}

std::vector<VideoRecord> load_records(const DatasetManifest& manifest) {
  std::vector<VideoRecord> records;
  records.reserve(manifest.size());
  for (const auto& entry : manifest.entries) {
    VideoRecord record{entry.info, read_tracks(manifest.resolve(entry))};
    validate_record(record);
    records.push_back(std::move(record));
  }
  return records;
}

void write_report(const EvalReport& report, const std::filesystem::path& path) {
  for (const auto& row : report.rows) {
    if (!(row.std >= 0.0) || !std::isfinite(row.std)) {
      throw ValidationError("report row " + row.model + "/" + row.metric +
                            ": std must be finite and non-negative");
    }
    if (row.n_seeds < 1) {
      throw ValidationError("report row " + row.model + "/" + row.metric + ": n_seeds must be >= 1");
    }
  }
  auto rows = report.rows;
  std::stable_sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
    return std::tie(a.model, a.feature_set, a.age_group, a.metric) <
           std::tie(b.model, b.feature_set, b.age_group, b.metric);
  });
  auto out = open_for_write(path);
  out << "model,feature_set,age_group,metric,mean,std,n_seeds\n";
  for (const auto& r : rows) {
    out << r.model << ',' << r.feature_set << ',' << r.age_group << ',' << r.metric << ','
        << format_double(r.mean) << ',' << format_double(r.std) << ',' << r.n_seeds << '\n';
  }
  finish(out, path);
}

EvalReport read_report(const std::filesystem::path& path) {
  const auto table = csv::read(path, kReportHeader);
  EvalReport report;
  for (const auto& row : table.rows) {
    const auto& f = row.fields;
    report.rows.push_back(ReportRow{f[0], f[1], f[2], f[3], csv::parse_double(f[4], path, row.line),
                                    csv::parse_double(f[5], path, row.line),
                                    static_cast<int>(csv::parse_int(f[6], path, row.line))});
  }
  return report;
}

}  // namespace gma
