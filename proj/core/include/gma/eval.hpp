#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gma/features.hpp"
#include "gma/fragment.hpp"
#include "gma/io.hpp"
#include "gma/learn/dataset.hpp"
#include "gma/learn/model.hpp"

namespace gma {

struct SubjectInfo {
  std::string subject_id;
  int label = 0;
};

/// Subject-level partition: a held-out test set plus k CV folds over the rest.
struct SplitPlan {
  std::uint64_t seed = 0;
  std::vector<std::string> test;
  std::vector<std::vector<std::string>> folds;
  std::vector<std::string> warnings;

  /// Union of all folds.
  std::vector<std::string> development() const;
};

/// One entry per distinct subject (first-seen order). Throws ValidationError
/// if a subject carries two labels.
std::vector<SubjectInfo> subjects_of(const DatasetManifest& manifest);
std::vector<SubjectInfo> subjects_of(std::span<const LabeledTensor> data);

/// Stratifies subjects by label: round(test_fraction * n) go to the test set
/// (per-class counts by largest remainder), the rest are dealt round-robin
/// into k folds. Throws PreconditionError with fewer than two subjects.
SplitPlan make_split(std::span<const SubjectInfo> subjects, double test_fraction = 0.2,
                     std::size_t k = 5, std::uint64_t seed = 0);
SplitPlan make_split(const DatasetManifest& manifest, double test_fraction = 0.2,
                     std::size_t k = 5, std::uint64_t seed = 0);

/// Mann-Whitney AUROC, ties count one half. Throws PreconditionError unless
/// both classes are present.
double auroc(std::span<const double> scores, std::span<const int> labels);

/// Step-wise average precision over distinct score thresholds. Throws
/// PreconditionError without positives.
double auprc(std::span<const double> scores, std::span<const int> labels);

/// Fraction with (score > threshold) == label. Throws on empty input.
double accuracy(std::span<const double> scores, std::span<const int> labels,
                double threshold = 0.5);

/// resample -> crop -> fragment -> features over `records`, which must all be
/// of one age group when they are to be compared in one experiment.
std::vector<LabeledTensor> make_labeled_dataset(std::span<const VideoRecord> records,
                                                FeatureSet feature_set,
                                                AngleSource source = AngleSource::kPixels);

struct ExperimentConfig {
  AgeGroup age_group = AgeGroup::kEarly;
  FeatureSet feature_set = FeatureSet::kAngles;
  ModelKind model = ModelKind::kRandomForest;
  std::vector<Hyperparameters> grid;
  std::size_t n_seeds = 30;
  std::uint64_t base_seed = 0;
  double test_fraction = 0.2;
  std::size_t folds = 5;
  /// Average fragment scores per video before computing metrics.
  bool per_video = false;

  void validate() const;
};

struct RawResult {
  std::size_t seed = 0;
  std::string fold;  // CV fold index, or "test"
  std::string model;
  std::string feature_set;
  std::string age_group;
  std::string metric;
  double value = 0.0;

  friend bool operator==(const RawResult&, const RawResult&) = default;
};

struct ExperimentResult {
  EvalReport report;
  std::vector<RawResult> raw;
  std::vector<std::size_t> selected_grid_index;  // per retained seed
  std::size_t skipped_seeds = 0;
  std::vector<std::string> notes;
};

/// Per seed: split subjects, pick the grid point with the best mean CV AUROC
/// (skipped for a one-point grid), retrain on all non-test subjects, score
/// the held-out fragments. Seeds whose test set lacks a class are skipped and
/// counted.
ExperimentResult run_experiment(const ExperimentConfig& config,
                                std::span<const LabeledTensor> dataset);

/// Aggregates the "test" rows into mean and population std per metric.
EvalReport summarize(std::span<const RawResult> raw);

/// `seed,fold,model,feature_set,age_group,metric,value`
void write_raw_results(std::span<const RawResult> raw, const std::filesystem::path& path);
std::vector<RawResult> read_raw_results(const std::filesystem::path& path);

}  // namespace gma
