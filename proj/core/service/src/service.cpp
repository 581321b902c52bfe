#include "gma/service.hpp"

#include <httplib.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "gma/error.hpp"
#include "gma/outliers.hpp"
#include "gma/png.hpp"

namespace gma {
namespace {

using nlohmann::json;

ApiResponse json_response(int status, const json& body) { return {status, body.dump(), "application/json"}; }

ApiResponse error_response(int status, std::string code, std::string message) {
  return json_response(status, {{"error", std::move(code)}, {"message", std::move(message)}});
}

std::optional<std::size_t> parse_index(const std::string& text) {
  std::size_t value = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end || text.empty()) return std::nullopt;
  return value;
}

std::string_view mode_name(LabellingMode mode) { return mode == LabellingMode::kAll ? "all" : "extreme"; }

json flag_json(const OutlierFlag& flag, std::size_t index, bool corrected, const TrackSet& tracks) {
  const auto& samples = tracks[index_of(flag.keypoint)].samples;
  const auto& after = samples[flag.frame];
  const std::size_t prev = flag.frame - 1;  // flags are never raised at frame 0
  const auto& before = samples[prev];
  return {{"index", index},
          {"keypoint", std::string(keypoint_name(flag.keypoint))},
          {"frame", flag.frame},
          {"displacement", flag.displacement},
          {"threshold", flag.threshold},
          {"corrected", corrected},
          {"before", {{"frame", prev}, {"x", before.x}, {"y", before.y}}},
          {"after", {{"x", after.x}, {"y", after.y}}}};
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace

struct AnnotationService::VideoState {
  VideoRecord record;
  mutable std::shared_mutex mutex;
  LabellingMode mode = LabellingMode::kExtreme;
  std::vector<SeedPoint> annotations;
  std::optional<TrackSet> working;
  std::size_t round = 0;
  std::vector<OutlierFlag> flags;
  std::vector<std::optional<Correction>> corrections;  // parallel to flags
};

AnnotationService::AnnotationService(ServiceOptions options, TrackerFactory tracker_factory)
    : options_(std::move(options)), tracker_factory_(std::move(tracker_factory)) {
  if (!tracker_factory_) {
    tracker_factory_ = [](const VideoRecord& record) -> std::unique_ptr<TrackerPort> {
      return std::make_unique<ReplayTracker>(record.tracks);
    };
  }
  if (options_.state_dir.empty()) {
    options_.state_dir = options_.manifest_path.parent_path() / "annotation_state";
  }
  const auto manifest = load_manifest(options_.manifest_path);
  auto records = load_records(manifest);
  for (auto& record : records) {
    auto state = std::make_unique<VideoState>();
    const auto id = record.info.video_id;
    state->record = std::move(record);
    order_.push_back(id);

    // Annotations of an earlier session are replayed from their append-only file.
    const auto saved = options_.state_dir / id / "annotations.csv";
    if (std::filesystem::exists(saved)) {
      std::ifstream in(saved);
      std::string line;
      std::getline(in, line);
      while (std::getline(in, line)) {
        std::vector<std::string> f;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
        if (f.size() != 4) continue;
        const auto kp = parse_keypoint(f[0]);
        if (!kp) continue;
        state->annotations.push_back({*kp, std::stoul(f[1]), std::stod(f[2]), std::stod(f[3])});
      }
    }
    videos_.emplace(id, std::move(state));
  }
}

AnnotationService::~AnnotationService() = default;

AnnotationService::VideoState* AnnotationService::find(const std::string& video_id) const {
  const auto it = videos_.find(video_id);
  return it == videos_.end() ? nullptr : it->second.get();
}

std::filesystem::path AnnotationService::corrections_log_path() const {
  return options_.state_dir / "corrections.csv";
}

std::filesystem::path AnnotationService::working_tracks_path(const std::string& video_id) const {
  return options_.state_dir / video_id / "tracks.csv";
}

ApiResponse AnnotationService::list_videos() const {
  json videos = json::array();
  for (const auto& id : order_) {
    const auto& v = *videos_.at(id);
    const auto& info = v.record.info;
    videos.push_back({{"video_id", info.video_id},
                      {"subject_id", info.subject_id},
                      {"age_group", std::string(to_string(info.age_group))},
                      {"label", info.label},
                      {"fps", info.fps},
                      {"frames", v.record.frames()},
                      {"frame_width", info.frame_width},
                      {"frame_height", info.frame_height}});
  }
  return json_response(200, {{"videos", videos}});
}

ApiResponse AnnotationService::frame(const std::string& video_id, const std::string& frame_text) const {
  const auto* v = find(video_id);
  if (!v) return error_response(404, "unknown_video", "no video '" + video_id + "'");
  const auto n = parse_index(frame_text);
  if (!n || *n >= v->record.frames()) {
    return error_response(404, "frame_out_of_range", "frame '" + frame_text + "' does not exist");
  }
  if (!options_.frames_dir.empty()) {
    const auto file = options_.frames_dir / video_id / (std::to_string(*n) + ".png");
    if (std::filesystem::is_regular_file(file)) return {200, read_file(file), "image/png"};
  }
  std::shared_lock lock(v->mutex);
  const TrackSet& tracks = v->working ? *v->working : v->record.tracks;
  return {200,
          render_skeleton_png(tracks, *n, v->record.info.frame_width, v->record.info.frame_height),
          "image/png"};
}

ApiResponse AnnotationService::annotations(const std::string& video_id) const {
  const auto* v = find(video_id);
  if (!v) return error_response(404, "unknown_video", "no video '" + video_id + "'");
  std::shared_lock lock(v->mutex);
  json items = json::array();
  std::array<bool, kNumKeypoints> placed{};
  for (const auto& a : v->annotations) {
    items.push_back({{"keypoint", std::string(keypoint_name(a.keypoint))},
                     {"frame", a.frame},
                     {"x", a.x},
                     {"y", a.y}});
    placed[index_of(a.keypoint)] = true;
  }
  json pending = json::array();
  for (auto id : kAllKeypoints) {
    if (v->mode == LabellingMode::kExtreme && !is_extreme(id)) continue;
    if (!placed[index_of(id)]) pending.push_back(std::string(keypoint_name(id)));
  }
  return json_response(200, {{"video_id", video_id},
                             {"mode", std::string(mode_name(v->mode))},
                             {"pending", pending},
                             {"annotations", items},
                             {"labelling_finished", v->working.has_value()}});
}

ApiResponse AnnotationService::add_annotation(const std::string& video_id, const std::string& body) {
  auto* v = find(video_id);
  if (!v) return error_response(404, "unknown_video", "no video '" + video_id + "'");
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception&) {
    return error_response(400, "malformed_body", "body is not valid JSON");
  }
  if (!j.is_object() || !j.contains("keypoint") || !j["keypoint"].is_string() ||
      !j.contains("frame") || !j["frame"].is_number_integer() || !j.contains("x") ||
      !j["x"].is_number() || !j.contains("y") || !j["y"].is_number()) {
    return error_response(400, "malformed_body",
                          "expected {keypoint: string, frame: integer, x: number, y: number}");
  }
  const auto name = j["keypoint"].get<std::string>();
  const auto keypoint = parse_keypoint(name);
  if (!keypoint) return error_response(422, "unknown_keypoint", "unknown keypoint '" + name + "'");
  const auto frame = j["frame"].get<long long>();
  if (frame < 0 || static_cast<std::size_t>(frame) >= v->record.frames()) {
    return error_response(422, "frame_out_of_range", "frame " + std::to_string(frame) + " out of range");
  }
  const double x = j["x"].get<double>();
  const double y = j["y"].get<double>();
  const auto& info = v->record.info;
  if (!(x >= 0.0 && x <= info.frame_width && y >= 0.0 && y <= info.frame_height)) {
    return error_response(422, "out_of_bounds", "point lies outside the frame");
  }

  std::unique_lock lock(v->mutex);
  const SeedPoint point{*keypoint, static_cast<std::size_t>(frame), x, y};
  const auto dir = options_.state_dir / video_id;
  std::filesystem::create_directories(dir);
  const auto path = dir / "annotations.csv";
  const bool fresh = !std::filesystem::exists(path);
  std::ofstream out(path, std::ios::app | std::ios::binary);
  if (fresh) out << "keypoint,frame,x,y\n";
  out << keypoint_name(point.keypoint) << ',' << point.frame << ',' << format_double(x) << ','
      << format_double(y) << '\n';
  if (!out) return error_response(500, "io_error", "cannot persist annotation");
  v->annotations.push_back(point);
  return json_response(201, {{"keypoint", std::string(keypoint_name(point.keypoint))},
                             {"frame", point.frame},
                             {"x", x},
                             {"y", y}});
}

ApiResponse AnnotationService::set_session(const std::string& video_id, const std::string& body) {
  auto* v = find(video_id);
  if (!v) return error_response(404, "unknown_video", "no video '" + video_id + "'");
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception&) {
    return error_response(400, "malformed_body", "body is not valid JSON");
  }
  if (!j.is_object() || !j.contains("mode") || !j["mode"].is_string()) {
    return error_response(400, "malformed_body", "expected {mode: \"extreme\" | \"all\"}");
  }
  const auto mode = j["mode"].get<std::string>();
  if (mode != "extreme" && mode != "all") {
    return error_response(422, "unknown_mode", "mode must be 'extreme' or 'all'");
  }
  {
    std::unique_lock lock(v->mutex);
    v->mode = mode == "all" ? LabellingMode::kAll : LabellingMode::kExtreme;
  }
  return annotations(video_id);
}

ApiResponse AnnotationService::finish_labelling(const std::string& video_id) {
  auto* v = find(video_id);
  if (!v) return error_response(404, "unknown_video", "no video '" + video_id + "'");
  std::unique_lock lock(v->mutex);
  if (v->annotations.empty()) {
    return error_response(409, "no_annotations", "label at least one keypoint first");
  }
  // The latest annotation of each keypoint seeds the tracker.
  std::array<std::optional<SeedPoint>, kNumKeypoints> latest;
  for (const auto& a : v->annotations) latest[index_of(a.keypoint)] = a;
  TrackingRequest request{0, v->record.frames(), {}};
  for (const auto& seed : latest) {
    if (seed) request.seeds.push_back(*seed);
  }
  TrackSet tracks = v->record.tracks;
  try {
    auto tracker = tracker_factory_(v->record);
    auto result = tracker->track(request);
    for (std::size_t i = 0; i < result.size(); ++i) {
      tracks[index_of(request.seeds[i].keypoint)].samples = std::move(result[i].samples);
    }
    validate_tracks(tracks);
    std::filesystem::create_directories(options_.state_dir / video_id);
    write_tracks(tracks, working_tracks_path(video_id));
  } catch (const Error& e) {
    return error_response(500, "tracking_failed", e.what());
  }
  v->working = std::move(tracks);
  v->round = 1;
  v->flags = detect_outliers(*v->working, options_.k_sigma).flags;
  v->corrections.assign(v->flags.size(), std::nullopt);
  lock.unlock();
  return outliers(video_id);
}

ApiResponse AnnotationService::outliers(const std::string& video_id) const {
  const auto* v = find(video_id);
  if (!v) return error_response(404, "unknown_video", "no video '" + video_id + "'");
  std::shared_lock lock(v->mutex);
  if (!v->working) {
    return error_response(409, "labelling_not_finished", "finish labelling before reviewing outliers");
  }
  json flags = json::array();
  for (std::size_t i = 0; i < v->flags.size(); ++i) {
    flags.push_back(flag_json(v->flags[i], i, v->corrections[i].has_value(), *v->working));
  }
  return json_response(200, {{"video_id", video_id}, {"round", v->round}, {"flags", flags}});
}

ApiResponse AnnotationService::correct(const std::string& video_id, const std::string& index_text,
                                       const std::string& body) {
  auto* v = find(video_id);
  if (!v) return error_response(404, "unknown_video", "no video '" + video_id + "'");
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception&) {
    return error_response(400, "malformed_body", "body is not valid JSON");
  }
  if (!j.is_object() || !j.contains("x") || !j["x"].is_number() || !j.contains("y") ||
      !j["y"].is_number() || (j.contains("frame") && !j["frame"].is_number_integer()) ||
      (j.contains("round") && !j["round"].is_number_integer())) {
    return error_response(400, "malformed_body",
                          "expected {x: number, y: number, frame?: integer, round?: integer}");
  }

  std::unique_lock lock(v->mutex);
  if (!v->working) {
    return error_response(409, "labelling_not_finished", "finish labelling before correcting");
  }
  const auto index = parse_index(index_text);
  if (!index || *index >= v->flags.size()) {
    return error_response(404, "unknown_flag", "no flag '" + index_text + "' in this round");
  }
  if (j.contains("round") && j["round"].get<long long>() != static_cast<long long>(v->round)) {
    return error_response(409, "stale_flag", "flag belongs to an earlier round");
  }
  if (v->corrections[*index]) {
    return error_response(409, "stale_flag", "flag has already been corrected");
  }
  const auto& flag = v->flags[*index];
  const auto frame = j.contains("frame") ? j["frame"].get<long long>() : static_cast<long long>(flag.frame);
  if (frame < 0 || static_cast<std::size_t>(frame) >= v->record.frames()) {
    return error_response(422, "frame_out_of_range", "frame " + std::to_string(frame) + " out of range");
  }
  const double x = j["x"].get<double>();
  const double y = j["y"].get<double>();
  const auto& info = v->record.info;
  if (!(x >= 0.0 && x <= info.frame_width && y >= 0.0 && y <= info.frame_height)) {
    return error_response(422, "out_of_bounds", "point lies outside the frame");
  }
  const Correction fix{flag.keypoint, static_cast<std::size_t>(frame), x, y};
  try {
    std::lock_guard log_lock(log_mutex_);
    std::filesystem::create_directories(options_.state_dir);
    const CorrectionLogEntry entry{video_id, v->round, fix};
    append_corrections_log(corrections_log_path(), std::span(&entry, 1));
  } catch (const Error& e) {
    return error_response(500, "io_error", e.what());
  }
  v->corrections[*index] = fix;
  return json_response(200, flag_json(flag, *index, true, *v->working));
}

ApiResponse AnnotationService::retrack(const std::string& video_id) {
  auto* v = find(video_id);
  if (!v) return error_response(404, "unknown_video", "no video '" + video_id + "'");
  std::unique_lock lock(v->mutex);
  if (!v->working) {
    return error_response(409, "labelling_not_finished", "finish labelling before retracking");
  }
  TrackSet tracks = *v->working;
  try {
    auto tracker = tracker_factory_(v->record);
    for (const auto& fix : v->corrections) {
      if (fix) tracks = retrack_from_correction(tracks, *fix, *tracker);
    }
    write_tracks(tracks, working_tracks_path(video_id));
  } catch (const Error& e) {
    return error_response(500, "tracking_failed", e.what());
  }
  v->working = std::move(tracks);
  ++v->round;
  v->flags = detect_outliers(*v->working, options_.k_sigma).flags;
  v->corrections.assign(v->flags.size(), std::nullopt);
  lock.unlock();
  return outliers(video_id);
}

std::optional<TrackSet> AnnotationService::working_tracks(const std::string& video_id) const {
  const auto* v = find(video_id);
  if (!v) return std::nullopt;
  std::shared_lock lock(v->mutex);
  return v->working;
}

void mount(httplib::Server& server, AnnotationService& service) {
  auto reply = [](httplib::Response& res, const ApiResponse& r) {
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  server.Get("/videos", [&service, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, service.list_videos());
  });
  server.Get(R"(/videos/([^/]+)/frames/([^/]+))",
             [&service, reply](const httplib::Request& req, httplib::Response& res) {
               reply(res, service.frame(req.matches[1], req.matches[2]));
             });
  server.Get(R"(/videos/([^/]+)/annotations)",
             [&service, reply](const httplib::Request& req, httplib::Response& res) {
               reply(res, service.annotations(req.matches[1]));
             });
  server.Post(R"(/videos/([^/]+)/annotations)",
              [&service, reply](const httplib::Request& req, httplib::Response& res) {
                reply(res, service.add_annotation(req.matches[1], req.body));
              });
  server.Put(R"(/videos/([^/]+)/session)",
             [&service, reply](const httplib::Request& req, httplib::Response& res) {
               reply(res, service.set_session(req.matches[1], req.body));
             });
  server.Post(R"(/videos/([^/]+)/finish-labelling)",
              [&service, reply](const httplib::Request& req, httplib::Response& res) {
                reply(res, service.finish_labelling(req.matches[1]));
              });
  server.Get(R"(/videos/([^/]+)/outliers)",
             [&service, reply](const httplib::Request& req, httplib::Response& res) {
               reply(res, service.outliers(req.matches[1]));
             });
  server.Post(R"(/videos/([^/]+)/outliers/([^/]+)/correction)",
              [&service, reply](const httplib::Request& req, httplib::Response& res) {
                reply(res, service.correct(req.matches[1], req.matches[2], req.body));
              });
  server.Post(R"(/videos/([^/]+)/retrack)",
              [&service, reply](const httplib::Request& req, httplib::Response& res) {
                reply(res, service.retrack(req.matches[1]));
              });
  server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) {
      res.set_content(json{{"error", "not_found"}, {"message", "no such endpoint"}}.dump(),
                      "application/json");
    }
  });
  server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string message = "internal error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      message = e.what();
    } catch (...) {
    }
    res.status = 500;
    res.set_content(json{{"error", "internal"}, {"message", message}}.dump(), "application/json");
  });
}

void serve(AnnotationService& service, const std::string& host, int port) {
  httplib::Server server;
  mount(server, service);
  if (!server.bind_to_port(host, port)) {
    throw IoError("cannot bind " + host + ":" + std::to_string(port));
  }
  server.listen_after_bind();
}

}  // namespace gma
