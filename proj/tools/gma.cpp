#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "gma/error.hpp"
#include "gma/eval.hpp"
#include "gma/features.hpp"
#include "gma/fragment.hpp"
#include "gma/io.hpp"
#include "gma/learn/model.hpp"
#include "gma/outliers.hpp"
#include "gma/preprocess.hpp"
#include "gma/service.hpp"
#include "gma/synth.hpp"
#include "gma/tracker.hpp"

namespace fs = std::filesystem;

constexpr int kUsageErrorExit = 2;
using namespace gma;

namespace {

fs::path data_root() {
  const char* env = std::getenv("GMA_DATA_DIR");
  return env && *env ? fs::path(env) : fs::path(".");
}

// --manifest falls back to $GMA_DATA_DIR/manifest.csv.
fs::path manifest_or_default(const std::string& given) {
  return given.empty() ? data_root() / "manifest.csv" : fs::path(given);
}

std::vector<VideoRecord> records_of_group(const DatasetManifest& manifest,
                                          std::optional<AgeGroup> group) {
  auto records = load_records(manifest);
  if (group) {
    std::erase_if(records, [&](const VideoRecord& r) { return r.info.age_group != *group; });
  }
  if (records.empty()) throw PreconditionError("no recordings match the requested age group");
  return records;
}

CLI::IsMember one_of(std::vector<std::string> names) { return CLI::IsMember(std::move(names)); }

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Keypoint-based general movement assessment toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "gma 0.1.0");

  // resample
  auto* resample_cmd = app.add_subcommand("resample", "Resample a track file to a new frame rate");
  std::string resample_in, resample_out;
  double source_fps = 0.0, target_fps = kTargetFps;
  resample_cmd->add_option("--in", resample_in, "Input track CSV")->required()->check(CLI::ExistingFile);
  resample_cmd->add_option("--fps", source_fps, "Frame rate of the input")->required()->check(CLI::PositiveNumber);
  resample_cmd->add_option("--target-fps", target_fps, "Output frame rate")->check(CLI::PositiveNumber);
  resample_cmd->add_option("--out", resample_out, "Output track CSV")->required();

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset");
  SynthSpec synth_spec;
  std::string synth_out, synth_spec_file;
  std::string age_mix = "early";
  synth_cmd->add_option("--subjects", synth_spec.n_subjects, "Number of subjects")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--seed", synth_spec.seed, "Random seed");
  synth_cmd->add_option("--balance", synth_spec.class_balance, "Fraction of impaired subjects")
      ->check(CLI::Range(0.0, 1.0));
  synth_cmd->add_option("--occlusion", synth_spec.occlusion_rate, "Per-sample occlusion probability");
  synth_cmd->add_option("--min-duration", synth_spec.min_duration_s, "Shortest recording (s)");
  synth_cmd->add_option("--max-duration", synth_spec.max_duration_s, "Longest recording (s)");
  synth_cmd->add_option("--age-mix", age_mix, "Age group assignment")
      ->check(CLI::IsMember({"early", "late", "alternate"}));
  synth_cmd->add_option("--spec", synth_spec_file, "JSON spec (overrides the other flags)")
      ->check(CLI::ExistingFile);
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();

  // crop
  auto* crop_cmd = app.add_subcommand("crop", "Crop and normalize every recording of a manifest");
  std::string crop_manifest, crop_out;
  double crop_margin = kCropMargin;
  crop_cmd->add_option("--manifest", crop_manifest, "Manifest CSV (default $GMA_DATA_DIR/manifest.csv)");
  crop_cmd->add_option("--margin", crop_margin, "Margin as a fraction of the span")->check(CLI::NonNegativeNumber);
  crop_cmd->add_option("--out", crop_out, "Output directory")->required();

  // outliers
  auto* outliers_cmd = app.add_subcommand("outliers", "Detect and correct tracking outliers");
  std::string outliers_manifest, outliers_out, corrections_file, outliers_video;
  OutlierLoopOptions loop_options;
  outliers_cmd->add_option("--manifest", outliers_manifest, "Manifest CSV (default $GMA_DATA_DIR/manifest.csv)");
  outliers_cmd->add_option("--video", outliers_video, "Only process this video");
  outliers_cmd->add_option("--k", loop_options.k_sigma, "Threshold in standard deviations")
      ->check(CLI::PositiveNumber);
  outliers_cmd->add_option("--max-rounds", loop_options.max_rounds, "Correction rounds");
  outliers_cmd->add_option("--corrections", corrections_file, "Corrections log CSV");
  outliers_cmd->add_option("--out", outliers_out, "Output directory")->required();

  // features
  auto* features_cmd = app.add_subcommand("features", "Fragment recordings and write feature tensors");
  std::string features_manifest, features_out;
  std::string feature_set = "angles", angle_source = "pixels", features_group;
  features_cmd->add_option("--manifest", features_manifest, "Manifest CSV (default $GMA_DATA_DIR/manifest.csv)");
  features_cmd->add_option("--features", feature_set, "Feature set")->check(one_of({"coords", "angles", "both"}));
  features_cmd->add_option("--angle-source", angle_source, "Coordinates used for angles")
      ->check(one_of({"pixels", "normalized"}));
  features_cmd->add_option("--age-group", features_group, "Restrict to one age group")
      ->check(one_of({"early", "late"}));
  features_cmd->add_option("--out", features_out, "Output directory")->required();

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a model on every fragment of a manifest");
  std::string train_manifest, train_out;
  std::string train_model, train_features = "angles", train_group;
  std::uint64_t train_seed = 0;
  std::optional<std::size_t> trees, batch, epochs;
  std::optional<double> learning_rate;
  train_cmd->add_option("--manifest", train_manifest, "Manifest CSV (default $GMA_DATA_DIR/manifest.csv)");
  train_cmd->add_option("--model", train_model, "Model")->required()->check(one_of({"rf", "cnn", "lstm"}));
  train_cmd->add_option("--features", train_features, "Feature set")->check(one_of({"coords", "angles", "both"}));
  train_cmd->add_option("--age-group", train_group, "Restrict to one age group")->check(one_of({"early", "late"}));
  train_cmd->add_option("--seed", train_seed, "Random seed");
  train_cmd->add_option("--trees", trees, "Forest size")->check(CLI::PositiveNumber);
  train_cmd->add_option("--lr", learning_rate, "Learning rate")->check(CLI::PositiveNumber);
  train_cmd->add_option("--batch", batch, "Batch size")->check(CLI::PositiveNumber);
  train_cmd->add_option("--epochs", epochs, "Epochs")->check(CLI::PositiveNumber);
  train_cmd->add_option("--out", train_out, "Checkpoint file")->required();

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "Repeated held-out evaluation with grid search");
  std::string eval_manifest, eval_out;
  ExperimentConfig eval_config;
  std::vector<double> grid_lr;
  std::vector<std::size_t> grid_trees, grid_epochs, grid_batch;
  std::string eval_group = "early", eval_model, eval_features;
  eval_cmd->add_option("--manifest", eval_manifest, "Manifest CSV (default $GMA_DATA_DIR/manifest.csv)");
  eval_cmd->add_option("--model", eval_model, "Model")->required()->check(one_of({"rf", "cnn", "lstm"}));
  eval_cmd->add_option("--features", eval_features, "Feature set")
      ->required()
      ->check(one_of({"coords", "angles", "both"}));
  eval_cmd->add_option("--age-group", eval_group, "Age group")->check(CLI::IsMember({"early", "late"}));
  eval_cmd->add_option("--seeds", eval_config.n_seeds, "Number of repeated splits")->check(CLI::PositiveNumber);
  eval_cmd->add_option("--seed", eval_config.base_seed, "Base random seed");
  eval_cmd->add_option("--folds", eval_config.folds, "Cross-validation folds")->check(CLI::PositiveNumber);
  eval_cmd->add_option("--test-fraction", eval_config.test_fraction, "Held-out subject fraction")
      ->check(CLI::Range(0.0, 0.99));
  eval_cmd->add_option("--per-video", eval_config.per_video, "Average fragment scores per video");
  eval_cmd->add_option("--trees", grid_trees, "Forest sizes to search")->delimiter(',');
  eval_cmd->add_option("--lr", grid_lr, "Learning rates to search")->delimiter(',');
  eval_cmd->add_option("--batch", grid_batch, "Batch sizes to search")->delimiter(',');
  eval_cmd->add_option("--epochs", grid_epochs, "Epoch counts to search")->delimiter(',');
  eval_cmd->add_option("--out", eval_out, "Output directory (default $GMA_DATA_DIR/results)");

  // report
  auto* report_cmd = app.add_subcommand("report", "Aggregate per-seed results into a report");
  std::vector<std::string> report_inputs;
  std::string report_out;
  report_cmd->add_option("--raw", report_inputs, "Per-seed results CSV files")->required()->check(CLI::ExistingFile);
  report_cmd->add_option("--out", report_out, "Report CSV");

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "Run the annotation HTTP service");
  ServiceOptions serve_options;
  std::string serve_manifest, serve_host = "127.0.0.1";
  int serve_port = 8080;
  serve_cmd->add_option("--manifest", serve_manifest, "Manifest CSV (default $GMA_DATA_DIR/manifest.csv)");
  serve_cmd->add_option("--frames-dir", serve_options.frames_dir, "Pre-extracted frames directory");
  serve_cmd->add_option("--state-dir", serve_options.state_dir, "Working directory for annotations");
  serve_cmd->add_option("--k", serve_options.k_sigma, "Outlier threshold in standard deviations");
  serve_cmd->add_option("--host", serve_host, "Bind address");
  serve_cmd->add_option("--port", serve_port, "Port")->check(CLI::Range(0, 65535));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Usage errors share one exit code; --help and --version still exit 0.
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageErrorExit;
  }

  try {
    if (*resample_cmd) {
      const auto tracks = read_tracks(resample_in);
      write_tracks(resample_tracks(tracks, source_fps, target_fps), resample_out);
    } else if (*synth_cmd) {
      if (!synth_spec_file.empty()) {
        std::ifstream in(synth_spec_file);
        synth_spec = SynthSpec::from_json(std::string(std::istreambuf_iterator<char>(in), {}));
      } else {
        synth_spec.age_mix = age_mix == "late"        ? AgeMix::kLate
                             : age_mix == "alternate" ? AgeMix::kAlternate
                                                      : AgeMix::kEarly;
      }
      const auto dataset = generate(synth_spec);
      write_dataset(dataset, synth_spec, synth_out);
      std::cout << "wrote " << dataset.records.size() << " recordings to " << synth_out << "\n";
    } else if (*crop_cmd) {
      const auto manifest = load_manifest(manifest_or_default(crop_manifest));
      const auto records = load_records(manifest);
      fs::create_directories(fs::path(crop_out) / "tracks");
      std::string crops = "video_id,x_min,y_min,x_max,y_max\n";
      for (const auto& record : records) {
        const auto box = compute_crop(record.tracks, record.info.frame_width,
                                      record.info.frame_height, crop_margin);
        write_tracks(normalize_to_crop(record.tracks, box),
                     fs::path(crop_out) / "tracks" / (record.info.video_id + ".csv"));
        crops += record.info.video_id + "," + format_double(box.x_min) + "," +
                 format_double(box.y_min) + "," + format_double(box.x_max) + "," +
                 format_double(box.y_max) + "\n";
      }
      write_text(fs::path(crop_out) / "crops.csv", crops);
    } else if (*outliers_cmd) {
      const auto manifest = load_manifest(manifest_or_default(outliers_manifest));
      const auto records = load_records(manifest);
      std::vector<CorrectionLogEntry> log;
      if (!corrections_file.empty()) log = read_corrections_log(corrections_file);
      const fs::path out_dir(outliers_out);
      fs::create_directories(out_dir / "tracks");
      DatasetManifest corrected;
      std::string report = "{\n";
      std::size_t total_flags = 0;
      bool first = true;
      for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& record = records[i];
        if (!outliers_video.empty() && record.info.video_id != outliers_video) continue;
        ReplayTracker tracker(record.tracks);
        LoggedCorrections source(record.info.video_id, log);
        const auto result = outlier_loop(record.tracks, tracker, source, loop_options);
        const fs::path rel = fs::path("tracks") / (record.info.video_id + ".csv");
        write_tracks(result.tracks, out_dir / rel);
        corrected.entries.push_back({record.info, rel});
        for (const auto& round : result.rounds) total_flags += round.flags.size();
        const OutlierRound remaining{result.rounds.size() + 1, result.remaining};
        report += std::string(first ? "" : ",\n") + "\"" + record.info.video_id +
                  "\": {\"rounds\": " + rounds_report_json(result.rounds) +
                  ", \"remaining\": " + rounds_report_json(std::span(&remaining, 1)) + "}";
        first = false;
      }
      report += "\n}\n";
      write_manifest(corrected, out_dir / "manifest.csv");
      write_text(out_dir / "outliers_report.json", report);
      std::cout << total_flags << " flags corrected\n";
    } else if (*features_cmd) {
      const auto manifest = load_manifest(manifest_or_default(features_manifest));
      const auto records = records_of_group(manifest, parse_age_group(features_group));
      std::vector<PreparedRecord> prepared;
      for (const auto& r : records) prepared.push_back(prepare_record(r));
      const auto fragments = fragment_dataset(prepared);
      const fs::path out_dir(features_out);
      fs::create_directories(out_dir);
      std::string index = "file,video_id,subject_id,age_group,label,start_frame,length\n";
      for (const auto& f : fragments.fragments) {
        const auto name = f.info.video_id + "_" + std::to_string(f.start_frame) + ".csv";
        write_feature_csv(build_features(f, parse_feature_set(feature_set),
                                         angle_source == "normalized" ? AngleSource::kNormalized
                                                                      : AngleSource::kPixels),
                          out_dir / name);
        index += name + "," + f.info.video_id + "," + f.info.subject_id + "," +
                 std::string(to_string(f.info.age_group)) + "," + std::to_string(f.info.label) +
                 "," + std::to_string(f.start_frame) + "," + std::to_string(f.length()) + "\n";
      }
      write_text(out_dir / "fragments.csv", index);
    } else if (*train_cmd) {
      const auto manifest = load_manifest(manifest_or_default(train_manifest));
      const auto records = records_of_group(manifest, parse_age_group(train_group));
      const auto data = make_labeled_dataset(records, parse_feature_set(train_features));
      const auto kind = parse_model_kind(train_model);
      auto hyper = default_hyperparameters(kind);
      if (trees) hyper.n_trees = *trees;
      if (learning_rate) hyper.learning_rate = *learning_rate;
      if (batch) hyper.batch_size = *batch;
      if (epochs) hyper.epochs = *epochs;
      const auto model = fit_model(kind, hyper, data, train_seed);
      save_checkpoint(model, train_out);
    } else if (*eval_cmd) {
      const auto manifest = load_manifest(manifest_or_default(eval_manifest));
      eval_config.age_group = *parse_age_group(eval_group);
      eval_config.model = parse_model_kind(eval_model);
      eval_config.feature_set = parse_feature_set(eval_features);
      const auto records = records_of_group(manifest, eval_config.age_group);
      const auto data = make_labeled_dataset(records, eval_config.feature_set);

      // Cartesian product of the searched values; unset axes keep the default.
      const auto defaults = default_hyperparameters(eval_config.model);
      auto axis = [](auto values, auto fallback) {
        return values.empty() ? decltype(values){fallback} : values;
      };
      for (auto t : axis(grid_trees, defaults.n_trees)) {
        for (auto lr : axis(grid_lr, defaults.learning_rate)) {
          for (auto b : axis(grid_batch, defaults.batch_size)) {
            for (auto e : axis(grid_epochs, defaults.epochs)) {
              eval_config.grid.push_back({t, lr, b, e});
            }
          }
        }
      }
      const auto result = run_experiment(eval_config, data);
      const fs::path out_dir = eval_out.empty() ? data_root() / "results" : fs::path(eval_out);
      fs::create_directories(out_dir);
      write_raw_results(result.raw, out_dir / "raw_results.csv");
      write_report(result.report, out_dir / "report.csv");
      for (const auto& note : result.notes) std::cerr << "note: " << note << "\n";
      for (const auto& row : result.report.rows) {
        std::cout << row.metric << ": " << format_double(row.mean) << " +/- "
                  << format_double(row.std) << " (" << row.n_seeds << " seeds)\n";
      }
    } else if (*report_cmd) {
      std::vector<RawResult> raw;
      for (const auto& path : report_inputs) {
        const auto part = read_raw_results(path);
        raw.insert(raw.end(), part.begin(), part.end());
      }
      const auto report = summarize(raw);
      if (!report_out.empty()) write_report(report, report_out);
      std::cout << "model,feature_set,age_group,metric,mean,std,n_seeds\n";
      for (const auto& r : report.rows) {
        std::cout << r.model << ',' << r.feature_set << ',' << r.age_group << ',' << r.metric << ','
                  << format_double(r.mean) << ',' << format_double(r.std) << ',' << r.n_seeds << "\n";
      }
    } else if (*serve_cmd) {
      serve_options.manifest_path = manifest_or_default(serve_manifest);
      AnnotationService service(serve_options);
      std::cout << "serving on http://" << serve_host << ":" << serve_port << std::endl;
      serve(service, serve_host, serve_port);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
