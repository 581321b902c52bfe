#include "gma/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include <json.hpp>

#include "gma/error.hpp"
#include "gma/random.hpp"

namespace gma {
namespace {

using nlohmann::json;

constexpr std::array<Point2, kNumKeypoints> kRestPose = {{
    {320.0, 95.0},   // nose
    {320.0, 130.0},  // head bottom
    {320.0, 50.0},   // head top
    {360.0, 100.0},  // left ear
    {280.0, 100.0},  // right ear
    {370.0, 150.0},  // left shoulder
    {270.0, 150.0},  // right shoulder
    {405.0, 210.0},  // left elbow
    {235.0, 210.0},  // right elbow
    {420.0, 265.0},  // left wrist
    {220.0, 265.0},  // right wrist
    {355.0, 280.0},  // left hip
    {285.0, 280.0},  // right hip
    {372.0, 350.0},  // left knee
    {268.0, 350.0},  // right knee
    {378.0, 415.0},  // left ankle
    {262.0, 415.0},  // right ankle
}};

// Fraction of the class amplitude each keypoint moves with. Distal joints
// swing the most, the trunk and head stay put.
double amplitude_share(KeypointId id) {
  switch (id) {
    case KeypointId::kLeftWrist:
    case KeypointId::kRightWrist:
    case KeypointId::kLeftAnkle:
    case KeypointId::kRightAnkle:
      return 1.0;
    case KeypointId::kLeftElbow:
    case KeypointId::kRightElbow:
    case KeypointId::kLeftKnee:
    case KeypointId::kRightKnee:
      return 0.45;
    default:
      return 0.0;
  }
}

std::string_view age_mix_name(AgeMix mix) {
  switch (mix) {
    case AgeMix::kEarly: return "early";
    case AgeMix::kLate: return "late";
    case AgeMix::kAlternate: return "alternate";
  }
  return "early";
}

AgeMix parse_age_mix(const std::string& text) {
  if (text == "early") return AgeMix::kEarly;
  if (text == "late") return AgeMix::kLate;
  if (text == "alternate") return AgeMix::kAlternate;
  throw ParseError("synth spec: unknown age_mix '" + text + "'");
}

json motion_json(const ClassMotion& m) {
  return {{"amplitude_px", m.amplitude_px},
          {"frequency_hz", m.frequency_hz},
          {"variability", m.variability}};
}

ClassMotion motion_from(const json& j) {
  return {j.at("amplitude_px").get<double>(), j.at("frequency_hz").get<double>(),
          j.at("variability").get<double>()};
}

std::string zero_pad(std::size_t value, int width) {
  std::string digits = std::to_string(value);
  if (static_cast<int>(digits.size()) < width) digits.insert(0, width - digits.size(), '0');
  return digits;
}

VideoRecord generate_subject(const SynthSpec& spec, std::size_t index, int label) {
  SplitMix64 rng(derive_seed(spec.seed, index, 1));
  const ClassMotion& motion = label == 1 ? spec.impaired : spec.normal;

  VideoRecord record;
  record.info.video_id = "synth_" + zero_pad(index, 3);
  record.info.subject_id = "subject_" + zero_pad(index, 3);
  record.info.label = label;
  record.info.frame_width = spec.frame_width;
  record.info.frame_height = spec.frame_height;
  switch (spec.age_mix) {
    case AgeMix::kEarly: record.info.age_group = AgeGroup::kEarly; break;
    case AgeMix::kLate: record.info.age_group = AgeGroup::kLate; break;
    case AgeMix::kAlternate:
      record.info.age_group = index % 2 == 0 ? AgeGroup::kEarly : AgeGroup::kLate;
      break;
  }
  record.info.fps = spec.fps_choices[rng.below(spec.fps_choices.size())];
  const double duration = rng.uniform(spec.min_duration_s, spec.max_duration_s);
  const auto frames =
      std::max<std::size_t>(2, static_cast<std::size_t>(std::floor(duration * record.info.fps)));

  // The skeleton is laid out for 640x480; other frame sizes scale it.
  const double sx = spec.frame_width / 640.0;
  const double sy = spec.frame_height / 480.0;
  const double shift_x = rng.uniform(-15.0, 15.0);
  const double shift_y = rng.uniform(-10.0, 10.0);
  const double amplitude = motion.amplitude_px * (1.0 + motion.variability * rng.uniform(-1.0, 1.0));

  struct Oscillator {
    Point2 centre;
    double radius = 0.0;
    double flattening = 1.0;
    double omega = 0.0;
    double phase = 0.0;
  };
  std::array<Oscillator, kNumKeypoints> osc{};
  for (auto id : kAllKeypoints) {
    auto& o = osc[index_of(id)];
    const Point2 rest = kRestPose[index_of(id)];
    o.centre = {(rest.x + shift_x + rng.uniform(-spec.pose_jitter_px, spec.pose_jitter_px)) * sx,
                (rest.y + shift_y + rng.uniform(-spec.pose_jitter_px, spec.pose_jitter_px)) * sy};
    o.radius = amplitude * amplitude_share(id);
    o.flattening = rng.uniform(0.5, 1.0);
    const double f = motion.frequency_hz * (1.0 + motion.variability * rng.uniform(-1.0, 1.0));
    o.omega = 2.0 * std::numbers::pi * f;
    o.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  }

  record.tracks = make_empty_tracks(frames);
  const double max_x = spec.frame_width - 1.0;
  const double max_y = spec.frame_height - 1.0;
  for (std::size_t t = 0; t < frames; ++t) {
    const double time = static_cast<double>(t) / record.info.fps;
    for (auto id : kAllKeypoints) {
      const auto& o = osc[index_of(id)];
      const double angle = o.omega * time + o.phase;
      const double x = o.centre.x + o.radius * std::cos(angle) + spec.jitter_px * rng.normal();
      const double y =
          o.centre.y + o.radius * o.flattening * std::sin(angle) + spec.jitter_px * rng.normal();
      const bool occluded = spec.occlusion_rate > 0.0 && rng.uniform() < spec.occlusion_rate;
      auto& sample = record.tracks[index_of(id)].samples[t];
      if (occluded) {
        sample = {0.0, 0.0, false};
      } else {
        sample = {std::clamp(x, 0.0, max_x), std::clamp(y, 0.0, max_y), true};
      }
    }
  }
  return record;
}

}  // namespace

void SynthSpec::validate() const {
  if (n_subjects == 0) throw PreconditionError("synth spec: n_subjects must be positive");
  if (!(class_balance >= 0.0 && class_balance <= 1.0)) {
    throw PreconditionError("synth spec: class_balance must lie in [0, 1]");
  }
  for (const ClassMotion* m : {&normal, &impaired}) {
    if (!(m->amplitude_px >= 0.0) || !(m->frequency_hz >= 0.0) || !(m->variability >= 0.0) ||
        m->variability >= 1.0) {
      throw PreconditionError(
          "synth spec: amplitudes and frequencies must be >= 0, variability in [0, 1)");
    }
  }
  if (!(jitter_px >= 0.0) || !(pose_jitter_px >= 0.0)) {
    throw PreconditionError("synth spec: jitter must be >= 0");
  }
  if (!(occlusion_rate >= 0.0 && occlusion_rate < 1.0)) {
    throw PreconditionError("synth spec: occlusion_rate must lie in [0, 1)");
  }
  if (fps_choices.empty()) throw PreconditionError("synth spec: fps_choices is empty");
  for (double fps : fps_choices) {
    if (!(fps > 0.0) || !std::isfinite(fps)) throw PreconditionError("synth spec: fps must be positive");
  }
  if (!(min_duration_s > 0.0) || !(max_duration_s >= min_duration_s) || !std::isfinite(max_duration_s)) {
    throw PreconditionError("synth spec: durations must be positive with min <= max");
  }
  if (frame_width <= 0 || frame_height <= 0) {
    throw PreconditionError("synth spec: frame size must be positive");
  }
  for (const auto& jump : jumps) {
    if (jump.subject >= n_subjects) throw PreconditionError("synth spec: jump subject out of range");
    if (!std::isfinite(jump.dx) || !std::isfinite(jump.dy)) {
      throw PreconditionError("synth spec: jump offset must be finite");
    }
  }
}

std::string SynthSpec::to_json() const {
  json jumps_json = json::array();
  for (const auto& j : jumps) {
    jumps_json.push_back({{"subject", j.subject},
                          {"keypoint", std::string(keypoint_name(j.keypoint))},
                          {"frame", j.frame},
                          {"dx", j.dx},
                          {"dy", j.dy}});
  }
  const json out = {{"n_subjects", n_subjects},
                    {"class_balance", class_balance},
                    {"normal", motion_json(normal)},
                    {"impaired", motion_json(impaired)},
                    {"jitter_px", jitter_px},
                    {"pose_jitter_px", pose_jitter_px},
                    {"occlusion_rate", occlusion_rate},
                    {"fps_choices", fps_choices},
                    {"min_duration_s", min_duration_s},
                    {"max_duration_s", max_duration_s},
                    {"age_mix", std::string(age_mix_name(age_mix))},
                    {"frame_width", frame_width},
                    {"frame_height", frame_height},
                    {"jumps", jumps_json},
                    {"seed", seed}};
  return out.dump(2) + "\n";
}

SynthSpec SynthSpec::from_json(const std::string& text) {
  SynthSpec spec;
  try {
    const json j = json::parse(text);
    spec.n_subjects = j.value("n_subjects", spec.n_subjects);
    spec.class_balance = j.value("class_balance", spec.class_balance);
    if (j.contains("normal")) spec.normal = motion_from(j.at("normal"));
    if (j.contains("impaired")) spec.impaired = motion_from(j.at("impaired"));
    spec.jitter_px = j.value("jitter_px", spec.jitter_px);
    spec.pose_jitter_px = j.value("pose_jitter_px", spec.pose_jitter_px);
    spec.occlusion_rate = j.value("occlusion_rate", spec.occlusion_rate);
    if (j.contains("fps_choices")) spec.fps_choices = j.at("fps_choices").get<std::vector<double>>();
    spec.min_duration_s = j.value("min_duration_s", spec.min_duration_s);
    spec.max_duration_s = j.value("max_duration_s", spec.max_duration_s);
    if (j.contains("age_mix")) spec.age_mix = parse_age_mix(j.at("age_mix").get<std::string>());
    spec.frame_width = j.value("frame_width", spec.frame_width);
    spec.frame_height = j.value("frame_height", spec.frame_height);
    spec.seed = j.value("seed", spec.seed);
    if (j.contains("jumps")) {
      for (const auto& item : j.at("jumps")) {
        const auto name = item.at("keypoint").get<std::string>();
        const auto id = parse_keypoint(name);
        if (!id) throw ParseError("synth spec: unknown keypoint '" + name + "'");
        spec.jumps.push_back({item.at("subject").get<std::size_t>(), *id,
                              item.at("frame").get<std::size_t>(), item.at("dx").get<double>(),
                              item.at("dy").get<double>()});
      }
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("synth spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

Point2 rest_pose(KeypointId id) { return kRestPose[index_of(id)]; }

SynthDataset generate(const SynthSpec& spec) {
  spec.validate();
  const auto n = spec.n_subjects;
  const auto n_impaired = static_cast<std::size_t>(
      std::lround(static_cast<double>(n) * spec.class_balance));
  std::vector<int> labels(n, 0);
  std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n_impaired), 1);
  SplitMix64 label_rng(derive_seed(spec.seed, 0x1abe1));
  shuffle(std::span(labels), label_rng);

  SynthDataset out;
  out.records.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.records.push_back(generate_subject(spec, i, labels[i]));
  for (const auto& jump : spec.jumps) {
    auto& record = out.records[jump.subject];
    record = inject_jump(std::move(record), jump.keypoint, jump.frame, jump.dx, jump.dy);
  }
  for (const auto& record : out.records) {
    out.manifest.entries.push_back(
        {record.info, std::filesystem::path("tracks") / (record.info.video_id + ".csv")});
  }
  return out;
}

VideoRecord inject_jump(VideoRecord record, KeypointId keypoint, std::size_t frame, double dx,
                        double dy) {
  auto& samples = record.tracks[index_of(keypoint)].samples;
  if (frame >= samples.size()) {
    throw PreconditionError("inject_jump: frame " + std::to_string(frame) + " outside record of " +
                            std::to_string(samples.size()) + " frames");
  }
  for (std::size_t t = frame; t < samples.size(); ++t) {
    if (!samples[t].visible) continue;
    samples[t].x += dx;
    samples[t].y += dy;
  }
  return record;
}

void write_dataset(const SynthDataset& dataset, const SynthSpec& spec,
                   const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "tracks", ec);
  if (ec) throw IoError("cannot create '" + (out_dir / "tracks").string() + "': " + ec.message());
  for (std::size_t i = 0; i < dataset.records.size(); ++i) {
    write_tracks(dataset.records[i].tracks, out_dir / dataset.manifest.entries[i].track_path);
  }
  write_manifest(dataset.manifest, out_dir / "manifest.csv");
  std::ofstream json_out(out_dir / "synth_spec.json", std::ios::binary | std::ios::trunc);
  if (!json_out) throw IoError("cannot write '" + (out_dir / "synth_spec.json").string() + "'");
  json_out << spec.to_json();
}

}  // namespace gma
