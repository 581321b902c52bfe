#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "gma/io.hpp"
#include "gma/preprocess.hpp"
#include "gma/tracker.hpp"

namespace httplib {
class Server;
}

namespace gma {

struct ServiceOptions {
  std::filesystem::path manifest_path;
  /// Optional pre-extracted frames `<video_id>/<frame>.png`; missing frames
  /// are rendered as skeleton schematics.
  std::filesystem::path frames_dir;
  /// Working tracks, annotation files and the corrections log live here.
  std::filesystem::path state_dir;
  double k_sigma = kOutlierSigmaMultiple;
};

struct ApiResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

enum class LabellingMode { kExtreme, kAll };

/// Request handling for the annotation UI, independent of the transport.
/// Every method returns a JSON body; errors carry `{"error": code, "message"}`.
class AnnotationService {
public:
  using TrackerFactory = std::function<std::unique_ptr<TrackerPort>(const VideoRecord&)>;

  /// Loads the manifest and its tracks. The default tracker replays each
  /// video's original tracks.
  explicit AnnotationService(ServiceOptions options, TrackerFactory tracker_factory = {});
  ~AnnotationService();

  ApiResponse list_videos() const;
  ApiResponse frame(const std::string& video_id, const std::string& frame_text) const;
  ApiResponse annotations(const std::string& video_id) const;
  ApiResponse add_annotation(const std::string& video_id, const std::string& body);
  ApiResponse set_session(const std::string& video_id, const std::string& body);
  ApiResponse finish_labelling(const std::string& video_id);
  ApiResponse outliers(const std::string& video_id) const;
  ApiResponse correct(const std::string& video_id, const std::string& index_text,
                      const std::string& body);
  ApiResponse retrack(const std::string& video_id);

  /// Current working tracks, if labelling has finished.
  std::optional<TrackSet> working_tracks(const std::string& video_id) const;
  std::filesystem::path corrections_log_path() const;
  std::filesystem::path working_tracks_path(const std::string& video_id) const;

private:
  struct VideoState;
  VideoState* find(const std::string& video_id) const;

  ServiceOptions options_;
  TrackerFactory tracker_factory_;
  std::vector<std::string> order_;
  std::map<std::string, std::unique_ptr<VideoState>> videos_;
  mutable std::mutex log_mutex_;
};

/// Routes the HTTP API onto `service`.
void mount(httplib::Server& server, AnnotationService& service);

/// Binds and serves until the process is stopped. Throws IoError when the
/// port cannot be bound.
void serve(AnnotationService& service, const std::string& host, int port);

}  // namespace gma
