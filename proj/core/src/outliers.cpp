#include "gma/outliers.hpp"

#include <fstream>
#include <json.hpp>
#include <string>

#include "csv.hpp"
#include "gma/error.hpp"
#include "gma/io.hpp"

namespace gma {
namespace {

const std::vector<std::string> kLogHeader = {"video_id", "round", "keypoint", "frame", "x", "y"};

std::string describe(const OutlierFlag& flag) {
  return "'" + std::string(keypoint_name(flag.keypoint)) + "' frame " + std::to_string(flag.frame);
}

}  // namespace

TrackSet retrack_from_correction(const TrackSet& tracks, const Correction& correction,
                                 TrackerPort& tracker) {
  const std::size_t n = track_length(tracks);
  if (correction.frame >= n) {
    throw PreconditionError("retrack: frame " + std::to_string(correction.frame) +
                            " out of range (" + std::to_string(n) + " frames)");
  }
  TrackingRequest request{correction.frame, n,
                          {SeedPoint{correction.keypoint, correction.frame, correction.x,
                                     correction.y}}};
  auto result = tracker.track(request);
  if (result.size() != 1 || result[0].size() != n - correction.frame) {
    throw Error("retrack: tracker returned a track of the wrong length");
  }
  TrackSet out = tracks;
  auto& samples = out[index_of(correction.keypoint)].samples;
  std::copy(result[0].samples.begin(), result[0].samples.end(),
            samples.begin() + static_cast<std::ptrdiff_t>(correction.frame));
  return out;
}

std::vector<CorrectionLogEntry> read_corrections_log(const std::filesystem::path& path) {
  const auto table = csv::read(path, kLogHeader);
  std::vector<CorrectionLogEntry> log;
  for (const auto& row : table.rows) {
    const auto& f = row.fields;
    auto id = parse_keypoint(f[2]);
    if (!id) {
      throw ValidationError(csv::context(path, row.line) + ": unknown keypoint '" + f[2] + "'");
    }
    const auto round = csv::parse_int(f[1], path, row.line);
    const auto frame = csv::parse_int(f[3], path, row.line);
    if (round < 1 || frame < 0) {
      throw ValidationError(csv::context(path, row.line) + ": round must be >= 1, frame >= 0");
    }
    log.push_back({f[0], static_cast<std::size_t>(round),
                   Correction{*id, static_cast<std::size_t>(frame),
                              csv::parse_double(f[4], path, row.line),
                              csv::parse_double(f[5], path, row.line)}});
  }
  return log;
}

void append_corrections_log(const std::filesystem::path& path,
                            std::span<const CorrectionLogEntry> entries) {
  const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw IoError("cannot append to '" + path.string() + "'");
  if (fresh) out << "video_id,round,keypoint,frame,x,y\n";
  for (const auto& e : entries) {
    out << e.video_id << ',' << e.round << ',' << keypoint_name(e.correction.keypoint) << ','
        << e.correction.frame << ',' << format_double(e.correction.x) << ','
        << format_double(e.correction.y) << '\n';
  }
  out.flush();
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

LoggedCorrections::LoggedCorrections(std::string video_id, std::span<const CorrectionLogEntry> log)
    : video_id_(std::move(video_id)) {
  for (const auto& e : log) {
    if (e.video_id != video_id_) continue;
    // Later lines win, so a log can be amended by appending.
    table_[{e.round, index_of(e.correction.keypoint), e.correction.frame}] = e.correction;
  }
}

std::vector<Correction> LoggedCorrections::corrections(std::size_t round,
                                                       std::span<const OutlierFlag> flags,
                                                       const TrackSet&) {
  std::vector<Correction> out;
  out.reserve(flags.size());
  for (const auto& flag : flags) {
    auto it = table_.find({round, index_of(flag.keypoint), flag.frame});
    if (it == table_.end()) {
      throw ValidationError("video '" + video_id_ + "' round " + std::to_string(round) +
                            ": no correction logged for " + describe(flag));
    }
    out.push_back(it->second);
  }
  return out;
}

OutlierLoopResult outlier_loop(const TrackSet& tracks, TrackerPort& tracker,
                               CorrectionsSource& source, const OutlierLoopOptions& options) {
  OutlierLoopResult result{tracks, {}, {}};
  for (std::size_t round = 1;; ++round) {
    auto scan = detect_outliers(result.tracks, options.k_sigma);
    if (scan.flags.empty() || round > options.max_rounds) {
      result.remaining = std::move(scan.flags);
      break;
    }
    auto fixes = source.corrections(round, scan.flags, result.tracks);
    if (fixes.size() != scan.flags.size()) {
      throw ValidationError("round " + std::to_string(round) + ": " +
                            std::to_string(scan.flags.size()) + " flags but " +
                            std::to_string(fixes.size()) + " corrections");
    }
    for (const auto& fix : fixes) {
      result.tracks = retrack_from_correction(result.tracks, fix, tracker);
    }
    result.rounds.push_back({round, std::move(scan.flags)});
  }
  return result;
}

std::string rounds_report_json(std::span<const OutlierRound> rounds) {
  auto doc = nlohmann::json::array();
  for (const auto& r : rounds) {
    auto flags = nlohmann::json::array();
    for (const auto& f : r.flags) {
      flags.push_back({{"keypoint", keypoint_name(f.keypoint)},
                       {"frame", f.frame},
                       {"displacement", f.displacement},
                       {"threshold", f.threshold}});
    }
    doc.push_back({{"round", r.round}, {"flags", std::move(flags)}});
  }
  return doc.dump(2);
}

}  // namespace gma
