#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "gma/preprocess.hpp"
#include "gma/tracker.hpp"

namespace gma {

struct Correction {
  KeypointId keypoint = KeypointId::kNose;
  std::size_t frame = 0;
  double x = 0.0;
  double y = 0.0;
};

/// Replaces `correction.keypoint` from the corrected frame to the end with the
/// tracker's output seeded at the correction. Earlier frames are untouched.
TrackSet retrack_from_correction(const TrackSet& tracks, const Correction& correction,
                                 TrackerPort& tracker);

/// Supplies a correction for each flag of a round (a human reviewer or a
/// scripted log). Throws if it cannot answer a flag.
class CorrectionsSource {
public:
  virtual ~CorrectionsSource() = default;
  virtual std::vector<Correction> corrections(std::size_t round,
                                              std::span<const OutlierFlag> flags,
                                              const TrackSet& tracks) = 0;
};

/// One line of the corrections log `video_id,round,keypoint,frame,x,y`.
struct CorrectionLogEntry {
  std::string video_id;
  std::size_t round = 0;
  Correction correction;
};

std::vector<CorrectionLogEntry> read_corrections_log(const std::filesystem::path& path);
void append_corrections_log(const std::filesystem::path& path,
                            std::span<const CorrectionLogEntry> entries);

/// Answers flags of one video from a corrections log keyed by
/// (round, keypoint, frame). Rounds are 1-based.
class LoggedCorrections final : public CorrectionsSource {
public:
  LoggedCorrections(std::string video_id, std::span<const CorrectionLogEntry> log);
  std::vector<Correction> corrections(std::size_t round, std::span<const OutlierFlag> flags,
                                      const TrackSet& tracks) override;

private:
  std::string video_id_;
  std::map<std::tuple<std::size_t, std::size_t, std::size_t>, Correction> table_;
};

struct OutlierRound {
  std::size_t round = 0;
  std::vector<OutlierFlag> flags;
};

struct OutlierLoopResult {
  TrackSet tracks;
  /// One entry per round in which flags were found and corrected.
  std::vector<OutlierRound> rounds;
  /// Flags left after the last round (empty when the loop converged).
  std::vector<OutlierFlag> remaining;
};

struct OutlierLoopOptions {
  std::size_t max_rounds = 3;
  double k_sigma = kOutlierSigmaMultiple;
};

/// detect -> correct -> retrack, until a detection pass is clean or
/// `max_rounds` correction rounds have run.
OutlierLoopResult outlier_loop(const TrackSet& tracks, TrackerPort& tracker,
                               CorrectionsSource& source, const OutlierLoopOptions& options = {});

/// `[{round, flags:[{keypoint, frame, displacement, threshold}]}]`
std::string rounds_report_json(std::span<const OutlierRound> rounds);

}  // namespace gma
