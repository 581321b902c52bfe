// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "gma/eval.hpp"
#include "gma/features.hpp"
#include "gma/fragment.hpp"
#include "gma/learn/network.hpp"
#include "gma/preprocess.hpp"
#include "gma/synth.hpp"

using namespace gma;

namespace {

// Pinned tolerances and limits.
constexpr double kAngleTolerance = 1e-9;
constexpr double kGeometryLimitS = 5.0;
constexpr double kGradientTolerance = 1e-4;
constexpr double kCnnStep = 1e-5;
constexpr double kLstmStep = 1e-3;
constexpr int kGradientInputs = 5;
constexpr int kGradientParams = 100;
constexpr double kGradientLimitS = 60.0;
constexpr double kMetricTolerance = 1e-12;
constexpr double kOutlierJumpSigma = 20.0;
constexpr double kOutlierLimitS = 30.0;
constexpr double kCropTolerance = 1e-9;
constexpr double kRfAurocFloor = 0.90;
constexpr double kCnnAurocFloor = 0.80;
constexpr double kLearnabilityLimitS = 600.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  std::string name;
  double limit_s;  // 0 means no runtime limit
  std::function<Outcome()> run;
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream out;
  out.precision(digits);
  out << v;
  return out.str();
}

double oracle_angle(Point2 p1, Point2 p2, Point2 p3) {
  const double a = std::atan2(p1.y - p2.y, p1.x - p2.x);
  const double b = std::atan2(p3.y - p2.y, p3.x - p2.x);
  const double d = std::fmod(std::abs(a - b), 2.0 * std::numbers::pi);
  return d > std::numbers::pi ? 2.0 * std::numbers::pi - d : d;
}

Outcome geometry() {
  SplitMix64 rng(101);
  double worst = 0.0, worst_rigid = 0.0;
  int missing_wrong = 0;
  for (int i = 0; i < 10000; ++i) {
    const Point2 p1{rng.uniform(-1000, 1000), rng.uniform(-1000, 1000)};
    const Point2 p2{rng.uniform(-1000, 1000), rng.uniform(-1000, 1000)};
    const Point2 p3{rng.uniform(-1000, 1000), rng.uniform(-1000, 1000)};
    const auto a = angle(p1, p2, p3);
    if (!a) return {false, "non-degenerate triple returned missing"};
    worst = std::max(worst, std::abs(*a - oracle_angle(p1, p2, p3)));
    const double theta = rng.uniform(0, 2 * std::numbers::pi);
    const double c = std::cos(theta), s = std::sin(theta);
    const double tx = rng.uniform(-500, 500), ty = rng.uniform(-500, 500);
    auto move = [&](Point2 p) { return Point2{c * p.x - s * p.y + tx, s * p.x + c * p.y + ty}; };
    const auto moved = angle(move(p1), move(p2), move(p3));
    if (!moved) return {false, "rigidly moved triple returned missing"};
    worst_rigid = std::max(worst_rigid, std::abs(*moved - *a));
    // Degenerate: an arm of zero length.
    missing_wrong += angle(p2, p2, p3).has_value();
    missing_wrong += angle(p1, p2, p2).has_value();
  }
  const bool pass = worst <= kAngleTolerance && worst_rigid <= kAngleTolerance && missing_wrong == 0;
  return {pass, "max oracle error " + fmt(worst) + ", max rigid error " + fmt(worst_rigid) +
                    " (tol " + fmt(kAngleTolerance) + "), degenerate not missing " +
                    std::to_string(missing_wrong)};
}

double max_gradient_error(NeuralNet& net, const FeatureTensor& input, int label, double eps,
                          SplitMix64& rng) {
  std::vector<double> analytic(net.parameters().size(), 0.0);
  net.accumulate_gradient(input, label, analytic);
  auto params = net.parameters();
  double worst = 0.0;
  for (int n = 0; n < kGradientParams; ++n) {
    const auto i = static_cast<std::size_t>(rng.below(params.size()));
    const double orig = params[i];
    params[i] = orig + eps;
    const double up = net.loss(input, label);
    params[i] = orig - eps;
    const double down = net.loss(input, label);
    params[i] = orig;
    const double numeric = (up - down) / (2 * eps);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

Outcome gradients() {
  SplitMix64 rng(202);
  double worst_cnn = 0.0, worst_lstm = 0.0;
  for (int i = 0; i < kGradientInputs; ++i) {
    FeatureTensor input(44, 50, FeatureSet::kBoth);
    for (auto& v : input.values()) v = rng.uniform(0.0, 1.0);
    const int label = i % 2;
    Cnn1d cnn(CnnShape{44}, derive_seed(202, i, 1));
    Lstm lstm(LstmShape{44}, derive_seed(202, i, 2));
    worst_cnn = std::max(worst_cnn, max_gradient_error(cnn, input, label, kCnnStep, rng));
    worst_lstm = std::max(worst_lstm, max_gradient_error(lstm, input, label, kLstmStep, rng));
  }
  const bool pass = worst_cnn < kGradientTolerance && worst_lstm < kGradientTolerance;
  return {pass, std::to_string(kGradientInputs) + " inputs 44x50, " +
                    std::to_string(kGradientParams) + " params each; cnn " + fmt(worst_cnn) +
                    " (step " + fmt(kCnnStep) + "), lstm " + fmt(worst_lstm) + " (step " +
                    fmt(kLstmStep) + "), tol " + fmt(kGradientTolerance)};
}

Outcome metrics() {
  SplitMix64 rng(303);
  double worst = 0.0, worst_monotone = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng.below(19);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng.below(8)) / 7.0;
      y[i] = static_cast<int>(rng.below(2));
    }
    y[rng.below(n)] = 1;
    std::size_t z = rng.below(n);
    while (y[z] == 1 && std::count(y.begin(), y.end(), 1) == static_cast<long>(n)) y[z] = 0;
    if (std::count(y.begin(), y.end(), 0) == 0) continue;

    double wins = 0, pairs = 0, correct = 0;
    for (std::size_t i = 0; i < n; ++i) {
      correct += (s[i] > 0.5) == (y[i] == 1);
      for (std::size_t j = 0; j < n; ++j) {
        if (y[i] != 1 || y[j] != 0) continue;
        pairs += 1;
        wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
      }
    }
    std::set<double, std::greater<>> thresholds(s.begin(), s.end());
    const double positives = std::count(y.begin(), y.end(), 1);
    double ap = 0, prev = 0;
    for (double t : thresholds) {
      double tp = 0, fp = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (s[i] >= t) (y[i] ? tp : fp) += 1;
      }
      ap += (tp / positives - prev) * tp / (tp + fp);
      prev = tp / positives;
    }
    worst = std::max({worst, std::abs(auroc(s, y) - wins / pairs), std::abs(auprc(s, y) - ap),
                      std::abs(accuracy(s, y) - correct / n)});
    std::vector<double> t(n);
    std::transform(s.begin(), s.end(), t.begin(), [](double v) { return std::tanh(4 * v - 1) * 9; });
    worst_monotone = std::max(worst_monotone, std::abs(auroc(t, y) - auroc(s, y)));
  }
  const bool pass = worst <= kMetricTolerance && worst_monotone <= kMetricTolerance;
  return {pass, "max brute-force gap " + fmt(worst) + ", max monotone gap " + fmt(worst_monotone) +
                    " (tol " + fmt(kMetricTolerance) + ")"};
}

struct Displacements {
  std::vector<double> values;
  std::size_t jump_index = 0;
};

// Consecutive-visible displacements of one keypoint, computed here rather
// than by the library.
Displacements displacements_of(const KeypointTrack& track, std::size_t jump_frame) {
  Displacements d;
  for (std::size_t t = 1; t < track.size(); ++t) {
    const auto& a = track.samples[t - 1];
    const auto& b = track.samples[t];
    if (!a.visible || !b.visible) continue;
    if (t == jump_frame) d.jump_index = d.values.size();
    d.values.push_back(std::hypot(b.x - a.x, b.y - a.y));
  }
  return d;
}

Outcome outlier_detector() {
  std::size_t records = 0, recalled = 0, false_flags = 0, ratio_misses = 0;
  for (std::uint64_t batch = 0; batch < 20; ++batch) {
    SynthSpec spec;
    spec.n_subjects = 10;
    spec.seed = 4000 + batch;
    spec.min_duration_s = 30.0;
    spec.max_duration_s = 40.0;
    spec.occlusion_rate = 0.02;
    const auto ds = generate(spec);
    for (const auto& record : ds.records) {
      SplitMix64 rng(derive_seed(404, records));
      ++records;
      const auto k = static_cast<std::size_t>(rng.below(kNumKeypoints));
      const auto& samples = record.tracks[k].samples;
      const std::size_t n = samples.size();
      std::size_t frame = 0;
      do {
        frame = n / 4 + static_cast<std::size_t>(rng.below(n / 2));
      } while (!samples[frame].visible || !samples[frame - 1].visible);
      const double theta = rng.uniform(0, 2 * std::numbers::pi);
      const double ux = std::cos(theta), uy = std::sin(theta);
      const double sx = samples[frame].x - samples[frame - 1].x;
      const double sy = samples[frame].y - samples[frame - 1].y;

      // Jump size D such that the jump displacement is 20 sigma of the
      // displacement series it ends up in.
      auto base = displacements_of(record.tracks[k], frame);
      auto ratio = [&](double size) {
        auto v = base.values;
        v[base.jump_index] = std::hypot(sx + size * ux, sy + size * uy);
        return v[base.jump_index] / test::oracle_stddev(v);
      };
      double lo = 0.0, hi = 1e6;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (ratio(mid) > kOutlierJumpSigma ? hi : lo) = mid;
      }
      const auto jumped = inject_jump(record, kAllKeypoints[k], frame, hi * ux, hi * uy);
      const auto check = displacements_of(jumped.tracks[k], frame);
      const double achieved =
          check.values[check.jump_index] / test::oracle_stddev(check.values);
      ratio_misses += std::abs(achieved - kOutlierJumpSigma) > 1e-6;

      const auto scan = detect_outliers(jumped.tracks);
      bool found = false;
      for (const auto& f : scan.flags) {
        if (index_of(f.keypoint) == k) {
          found = found || f.frame == frame;
        } else {
          ++false_flags;
        }
      }
      recalled += found;
    }
  }

  // 510 zero steps, one of 15 and one of 17: sigma is exactly 1.
  std::vector<double> steps(512, 0.0);
  steps[100] = 15.0;
  steps[300] = 17.0;
  const auto exact = test::track_from_steps(KeypointId::kRightWrist, steps);
  const auto exact_scan = detect_outliers(std::span(&exact, 1));
  const bool exact_ok = test::oracle_stddev(steps) == 1.0 && exact_scan.flags.size() == 1 &&
                        exact_scan.flags[0].frame == 301;

  const double recall = static_cast<double>(recalled) / records;
  const bool pass = records == 200 && recall == 1.0 && false_flags == 0 && ratio_misses == 0 &&
                    exact_ok;
  return {pass, std::to_string(records) + " records, recall " + fmt(recall) +
                    ", false flags on other keypoints " + std::to_string(false_flags) +
                    ", jumps off 20 sigma " + std::to_string(ratio_misses) +
                    ", exact 15 sigma " + (exact_ok ? "not flagged" : "FLAGGED")};
}

Outcome crop() {
  SplitMix64 rng(505);
  double worst_box = 0.0, worst_round_trip = 0.0;
  std::size_t outside = 0;
  for (int r = 0; r < 100; ++r) {
    const int w = 320 + static_cast<int>(rng.below(1600));
    const int h = 240 + static_cast<int>(rng.below(900));
    const auto tracks = test::random_tracks(rng, 20 + rng.below(200), w, h, 0.1);
    const auto box = compute_crop(tracks, w, h);

    double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    for (const auto& t : tracks) {
      if (!is_extreme(t.keypoint)) continue;
      for (const auto& s : t.samples) {
        if (!s.visible) continue;
        x0 = std::min(x0, s.x);
        x1 = std::max(x1, s.x);
        y0 = std::min(y0, s.y);
        y1 = std::max(y1, s.y);
        outside += s.x < box.x_min || s.x > box.x_max || s.y < box.y_min || s.y > box.y_max;
      }
    }
    const double px = 0.15 * (x1 - x0), py = 0.15 * (y1 - y0);
    worst_box = std::max({worst_box, std::abs(box.x_min - std::max(0.0, x0 - px)),
                          std::abs(box.x_max - std::min<double>(w, x1 + px)),
                          std::abs(box.y_min - std::max(0.0, y0 - py)),
                          std::abs(box.y_max - std::min<double>(h, y1 + py))});

    for (const auto& t : tracks) {
      if (!is_extreme(t.keypoint)) continue;
      const auto back = denormalize_from_crop(normalize_to_crop(t, box), box);
      for (std::size_t i = 0; i < t.size(); ++i) {
        if (!t.samples[i].visible) continue;
        worst_round_trip = std::max({worst_round_trip, std::abs(back.samples[i].x - t.samples[i].x),
                                     std::abs(back.samples[i].y - t.samples[i].y)});
      }
    }
  }
  const bool pass = outside == 0 && worst_box <= kCropTolerance && worst_round_trip <= kCropTolerance;
  return {pass, "100 records, samples outside box " + std::to_string(outside) +
                    ", max box error " + fmt(worst_box) + ", max round-trip error " +
                    fmt(worst_round_trip) + " (tol " + fmt(kCropTolerance) + ")"};
}

Outcome leakage() {
  SplitMix64 rng(606);
  std::size_t overlaps = 0, unbalanced = 0, lost = 0;
  for (int p = 0; p < 1000; ++p) {
    std::vector<SubjectInfo> subjects;
    const std::size_t n = 2 + rng.below(60);
    for (std::size_t i = 0; i < n; ++i) {
      subjects.push_back({"s" + std::to_string(rng()), static_cast<int>(rng.below(2))});
    }
    const auto plan = make_split(subjects, rng.uniform(0.0, 0.5), 1 + rng.below(8), rng());
    std::multiset<std::string> seen(plan.test.begin(), plan.test.end());
    std::size_t lo = SIZE_MAX, hi = 0;
    for (const auto& f : plan.folds) {
      seen.insert(f.begin(), f.end());
      lo = std::min(lo, f.size());
      hi = std::max(hi, f.size());
    }
    for (const auto& s : subjects) {
      const auto c = seen.count(s.subject_id);
      overlaps += c > 1;
      lost += c == 0;
    }
    unbalanced += hi - lo > 1;
  }
  const bool pass = overlaps == 0 && unbalanced == 0 && lost == 0;
  return {pass, "1000 plans, subjects in two partitions " + std::to_string(overlaps) +
                    ", unassigned " + std::to_string(lost) + ", folds off by more than 1 " +
                    std::to_string(unbalanced)};
}

Outcome fragmenting() {
  SplitMix64 rng(707);
  std::size_t count_errors = 0, length_errors = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<PreparedRecord> records;
    const std::size_t n = 1 + rng.below(8);
    std::size_t shortest = SIZE_MAX;
    for (std::size_t i = 0; i < n; ++i) {
      PreparedRecord r;
      const std::size_t len = 1 + rng.below(400);
      shortest = std::min(shortest, len);
      r.info.video_id = std::to_string(i);
      r.tracks = make_empty_tracks(len);
      r.pixel_tracks = r.tracks;
      records.push_back(std::move(r));
    }
    std::size_t expected = 0;
    for (const auto& r : records) expected += r.frames() / shortest;
    const auto set = fragment_dataset(records);
    count_errors += set.fragments.size() != expected;
    for (const auto& f : set.fragments) length_errors += f.length() != shortest;
    length_errors += set.length != shortest;
  }
  const bool pass = count_errors == 0 && length_errors == 0;
  return {pass, "1000 multisets, count mismatches " + std::to_string(count_errors) +
                    ", wrong lengths " + std::to_string(length_errors)};
}

Outcome learnability() {
  SynthSpec spec;
  spec.n_subjects = 40;
  spec.class_balance = 0.5;
  spec.seed = 0;
  const auto ds = generate(spec);
  const auto data = make_labeled_dataset(ds.records, FeatureSet::kAngles);

  auto mean_auroc = [&](ModelKind kind) {
    ExperimentConfig config;
    config.model = kind;
    config.feature_set = FeatureSet::kAngles;
    config.grid = {default_hyperparameters(kind)};
    config.n_seeds = 5;
    config.base_seed = 1;
    const auto result = run_experiment(config, data);
    for (const auto& row : result.report.rows) {
      if (row.metric == "auroc" && row.n_seeds == 5) return row.mean;
    }
    return -1.0;  // a skipped seed counts as failure
  };
  const double rf = mean_auroc(ModelKind::kRandomForest);
  const double cnn = mean_auroc(ModelKind::kCnn);
  const bool pass = rf >= kRfAurocFloor && cnn >= kCnnAurocFloor;
  return {pass, std::to_string(data.size()) + " fragments of length " +
                    std::to_string(data.front().features.length()) + "; rf(170) mean AUROC " +
                    fmt(rf) + " (floor " + fmt(kRfAurocFloor) + "), cnn mean AUROC " + fmt(cnn) +
                    " (floor " + fmt(kCnnAurocFloor) + ")"};
}

int run_command(const std::string& command) {
  const int status = std::system((command + " > /dev/null 2>&1").c_str());
  return status;
}

Outcome determinism(const std::string& binary) {
  if (binary.empty()) return {false, "no --gma-binary given"};
  test::TempDir dir("acceptance_determinism");
  const auto q = [](const std::filesystem::path& p) { return "'" + p.string() + "'"; };
  const auto data = dir / "data";
  if (run_command(q(binary) + " synth --subjects 20 --seed 9 --out " + q(data)) != 0) {
    return {false, "gma synth failed"};
  }
  std::string outputs[2];
  for (int run = 0; run < 2; ++run) {
    const auto out = dir / ("run" + std::to_string(run));
    const auto command = q(binary) + " evaluate --manifest " + q(data / "manifest.csv") +
                         " --model rf --features angles --seeds 5 --seed 3 --trees 20,60 --out " +
                         q(out);
    if (run_command(command) != 0) return {false, "gma evaluate failed"};
    outputs[run] = test::read_file(out / "raw_results.csv");
  }
  const bool pass = !outputs[0].empty() && outputs[0] == outputs[1];
  return {pass, "two evaluate runs, raw_results.csv " + std::to_string(outputs[0].size()) +
                    " bytes, " + (pass ? "byte-identical" : "DIFFER")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::string binary;
  std::string only;
  app.add_option("--gma-binary", binary, "Path of the gma executable");
  app.add_option("--only", only, "Run only the criterion with this name");
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria = {
      {"geometry", kGeometryLimitS, geometry},
      {"gradients", kGradientLimitS, gradients},
      {"metrics", 0, metrics},
      {"outlier-detector", kOutlierLimitS, outlier_detector},
      {"crop-normalize", 0, crop},
      {"leakage", 0, leakage},
      {"fragmenting", 0, fragmenting},
      {"learnability", kLearnabilityLimitS, learnability},
      {"determinism", 0, [&] { return determinism(binary); }},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && c.name != only) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = c.limit_s == 0 || seconds < c.limit_s;
    const bool pass = outcome.pass && in_time;
    failures += !pass;
    std::cout << (pass ? "PASS " : "FAIL ") << c.name << ": " << outcome.detail << "; "
              << fmt(seconds, 3) << " s";
    if (c.limit_s > 0) std::cout << " (limit " << fmt(c.limit_s, 3) << " s)";
    std::cout << std::endl;
  }
  return failures;
}
