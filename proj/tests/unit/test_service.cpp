#include <doctest.h>

#include <httplib.h>

#include <json.hpp>
#include <thread>

#include "fixtures.hpp"
#include "gma/error.hpp"
#include "gma/io.hpp"
#include "gma/outliers.hpp"
#include "gma/preprocess.hpp"
#include "gma/service.hpp"
#include "gma/synth.hpp"

using namespace gma;
using nlohmann::json;

namespace {

constexpr std::size_t kJumpFrame = 300;

// One synthetic video whose nose jumps by 80 px at kJumpFrame.
struct Workspace {
  test::TempDir dir{"service"};
  VideoRecord clean;
  VideoRecord jumped;

  Workspace() {
    SynthSpec spec;
    spec.n_subjects = 1;
    spec.fps_choices = {30.0};
    spec.min_duration_s = 20.0;
    spec.max_duration_s = 21.0;
    spec.seed = 5;
    auto ds = generate(spec);
    clean = ds.records[0];
    jumped = inject_jump(clean, KeypointId::kNose, kJumpFrame, 80.0, 0.0);
    ds.records[0] = jumped;
    write_dataset(ds, spec, dir.path());
  }

  ServiceOptions options() const { return {dir / "manifest.csv", {}, dir / "state", 15.0}; }
  std::string id() const { return clean.info.video_id; }
  std::string track_file() const { return test::read_file(dir / ("tracks/" + id() + ".csv")); }
};

json body(const ApiResponse& r) { return json::parse(r.body); }

std::string point(const char* keypoint, std::size_t frame, double x, double y) {
  return json{{"keypoint", keypoint}, {"frame", frame}, {"x", x}, {"y", y}}.dump();
}

// Annotates every extreme keypoint at frame 0 where the record has it.
void annotate_extremes(AnnotationService& svc, const Workspace& ws) {
  for (auto id : kAllKeypoints) {
    if (!is_extreme(id)) continue;
    const auto& s = ws.jumped.tracks[index_of(id)].samples[0];
    const auto r = svc.add_annotation(
        ws.id(), point(std::string(keypoint_name(id)).c_str(), 0, s.x, s.y));
    REQUIRE(r.status == 201);
  }
}

}  // namespace

TEST_CASE("the clean workspace record has no flags") {
  Workspace ws;
  CHECK(detect_outliers(ws.clean.tracks).flags.empty());
  const auto flags = detect_outliers(ws.jumped.tracks).flags;
  REQUIRE(flags.size() == 1);
  CHECK(flags[0].keypoint == KeypointId::kNose);
  CHECK(flags[0].frame == kJumpFrame);
}

TEST_CASE("annotation endpoints") {
  Workspace ws;
  AnnotationService svc(ws.options());
  const auto list = body(svc.list_videos());
  REQUIRE(list["videos"].size() == 1);
  CHECK(list["videos"][0]["video_id"] == ws.id());
  CHECK(list["videos"][0]["frames"] == ws.clean.frames());

  CHECK(svc.add_annotation(ws.id(), point("left wing", 0, 1, 1)).status == 422);
  CHECK(body(svc.add_annotation(ws.id(), point("left wing", 0, 1, 1)))["error"] == "unknown_keypoint");
  CHECK(svc.add_annotation(ws.id(), "{").status == 400);
  CHECK(svc.add_annotation(ws.id(), R"({"keypoint":"nose"})").status == 400);
  CHECK(body(svc.add_annotation(ws.id(), point("nose", 100000, 1, 1)))["error"] ==
        "frame_out_of_range");
  CHECK(body(svc.add_annotation(ws.id(), point("nose", 0, 700, 1)))["error"] == "out_of_bounds");
  CHECK(body(svc.add_annotation("nope", point("nose", 0, 1, 1)))["error"] == "unknown_video");

  auto before = body(svc.annotations(ws.id()));
  CHECK(before["mode"] == "extreme");
  CHECK(before["pending"].size() == 9);
  CHECK(before["labelling_finished"] == false);

  const auto added = svc.add_annotation(ws.id(), point("left wrist", 3, 10.5, 20.25));
  CHECK(added.status == 201);
  auto after = body(svc.annotations(ws.id()));
  REQUIRE(after["annotations"].size() == 1);
  CHECK(after["annotations"][0]["keypoint"] == "left wrist");
  CHECK(after["annotations"][0]["frame"] == 3);
  CHECK(after["annotations"][0]["x"] == 10.5);
  CHECK(after["pending"].size() == 8);

  CHECK(body(svc.set_session(ws.id(), R"({"mode":"everything"})"))["error"] == "unknown_mode");
  CHECK(body(svc.set_session(ws.id(), R"({"mode":"all"})"))["pending"].size() == 16);

  // A restarted service reloads what was saved.
  AnnotationService again(ws.options());
  CHECK(body(again.annotations(ws.id()))["annotations"] == after["annotations"]);

  CHECK(body(svc.outliers(ws.id()))["error"] == "labelling_not_finished");
  CHECK(svc.frame(ws.id(), "0").content_type == "image/png");
  CHECK(svc.frame(ws.id(), "0").body.substr(1, 3) == "PNG");
  CHECK(svc.frame(ws.id(), "999999").status == 404);
}

TEST_CASE("finish labelling with no annotations is a conflict") {
  Workspace ws;
  AnnotationService svc(ws.options());
  const auto r = svc.finish_labelling(ws.id());
  CHECK(r.status == 409);
  CHECK(body(r)["error"] == "no_annotations");
}

TEST_CASE("jump, flag, correct, retrack over HTTP") {
  Workspace ws;
  const auto original = ws.track_file();
  AnnotationService svc(ws.options());
  annotate_extremes(svc, ws);

  httplib::Server server;
  mount(server, svc);
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  httplib::Client client("127.0.0.1", port);
  const std::string base = "/videos/" + ws.id();

  auto bad = client.Post(base + "/annotations", point("left wing", 0, 1, 1), "application/json");
  REQUIRE(bad);
  CHECK(bad->status == 422);

  auto finished = client.Post(base + "/finish-labelling", "", "application/json");
  REQUIRE(finished);
  CHECK(finished->status == 200);

  auto flags = client.Get(base + "/outliers");
  REQUIRE(flags);
  REQUIRE(flags->status == 200);
  const auto listed = json::parse(flags->body);
  CHECK(listed["round"] == 1);
  REQUIRE(listed["flags"].size() == 1);
  const auto& flag = listed["flags"][0];
  CHECK(flag["keypoint"] == "nose");
  CHECK(flag["frame"] == kJumpFrame);
  CHECK(flag["before"]["frame"] == kJumpFrame - 1);
  CHECK(flag["after"]["x"].get<double>() ==
        doctest::Approx(ws.jumped.tracks[0].samples[kJumpFrame].x));

  const auto& truth = ws.clean.tracks[0].samples[kJumpFrame];
  const auto fix = json{{"x", truth.x}, {"y", truth.y}, {"round", 1}}.dump();
  auto unknown = client.Post(base + "/outliers/7/correction", fix, "application/json");
  REQUIRE(unknown);
  CHECK(unknown->status == 404);
  auto fixed = client.Post(base + "/outliers/0/correction", fix, "application/json");
  REQUIRE(fixed);
  CHECK(fixed->status == 200);
  CHECK(json::parse(fixed->body)["corrected"] == true);
  auto twice = client.Post(base + "/outliers/0/correction", fix, "application/json");
  REQUIRE(twice);
  CHECK(twice->status == 409);

  auto retracked = client.Post(base + "/retrack", "", "application/json");
  REQUIRE(retracked);
  CHECK(retracked->status == 200);
  const auto round2 = json::parse(retracked->body);
  CHECK(round2["round"] == 2);
  CHECK(round2["flags"].empty());

  auto stale = client.Post(base + "/outliers/0/correction", fix, "application/json");
  REQUIRE(stale);
  CHECK(stale->status == 404);
  auto missing = client.Get("/videos/nope/outliers");
  REQUIRE(missing);
  CHECK(missing->status == 404);
  auto png = client.Get(base + "/frames/10");
  REQUIRE(png);
  CHECK(png->get_header_value("Content-Type") == "image/png");

  server.stop();
  thread.join();

  const auto working = svc.working_tracks(ws.id());
  REQUIRE(working);
  for (std::size_t k = 0; k < kNumKeypoints; ++k) {
    for (std::size_t t = 0; t < ws.clean.frames(); ++t) {
      const auto& w = (*working)[k].samples[t];
      const auto& c = ws.clean.tracks[k].samples[t];
      REQUIRE(w.x == doctest::Approx(c.x).epsilon(1e-12));
      REQUIRE(w.y == doctest::Approx(c.y).epsilon(1e-12));
    }
  }
  CHECK(read_tracks(svc.working_tracks_path(ws.id())) == *working);
  const auto log = read_corrections_log(svc.corrections_log_path());
  REQUIRE(log.size() == 1);
  CHECK(log[0].video_id == ws.id());
  CHECK(log[0].round == 1);
  CHECK(log[0].correction.frame == kJumpFrame);
  CHECK(ws.track_file() == original);
}

TEST_CASE("a correction for an earlier round is stale") {
  Workspace ws;
  AnnotationService svc(ws.options());
  annotate_extremes(svc, ws);
  REQUIRE(svc.finish_labelling(ws.id()).status == 200);
  const auto r = svc.correct(ws.id(), "0", R"({"x": 10, "y": 10, "round": 0})");
  CHECK(r.status == 409);
  CHECK(body(r)["error"] == "stale_flag");
  CHECK(svc.correct(ws.id(), "0", R"({"x": "a"})").status == 400);
  CHECK(svc.correct(ws.id(), "0", R"({"x": -5, "y": 10})").status == 422);
}

TEST_CASE("serve reports an address it cannot bind") {
  Workspace ws;
  AnnotationService svc(ws.options());
  CHECK_THROWS_AS(serve(svc, "203.0.113.250", 0), IoError);
}
