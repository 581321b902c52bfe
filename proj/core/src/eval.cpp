#include "gma/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <tuple>

#include "csv.hpp"
#include "gma/error.hpp"
#include "gma/random.hpp"

namespace gma {
namespace {

const std::vector<std::string> kRawHeader = {"seed",      "fold",   "model", "feature_set",
                                             "age_group", "metric", "value"};

void check_scores(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw PreconditionError("metric: scores/labels size mismatch");
  for (int y : labels) {
    if (y != 0 && y != 1) throw PreconditionError("metric: labels must be 0 or 1");
  }
}

template <class Collection>
std::vector<SubjectInfo> collect_subjects(const Collection& items) {
  std::vector<SubjectInfo> subjects;
  std::map<std::string, int> seen;
  for (const auto& item : items) {
    const VideoInfo& info = item;
    auto [it, inserted] = seen.emplace(info.subject_id, info.label);
    if (inserted) {
      subjects.push_back({info.subject_id, info.label});
    } else if (it->second != info.label) {
      throw ValidationError("subject '" + info.subject_id + "' has recordings with both labels");
    }
  }
  return subjects;
}

struct InfoView {
  const VideoInfo& info;
  operator const VideoInfo&() const { return info; }
};

bool has_both_classes(std::span<const int> labels) {
  bool zero = false;
  bool one = false;
  for (int y : labels) (y == 1 ? one : zero) = true;
  return zero && one;
}

}  // namespace

std::vector<std::string> SplitPlan::development() const {
  std::vector<std::string> out;
  for (const auto& fold : folds) out.insert(out.end(), fold.begin(), fold.end());
  return out;
}

std::vector<SubjectInfo> subjects_of(const DatasetManifest& manifest) {
  std::vector<InfoView> views;
  for (const auto& e : manifest.entries) views.push_back({e.info});
  return collect_subjects(views);
}

std::vector<SubjectInfo> subjects_of(std::span<const LabeledTensor> data) {
  std::vector<InfoView> views;
  for (const auto& d : data) views.push_back({d.info});
  return collect_subjects(views);
}

SplitPlan make_split(std::span<const SubjectInfo> subjects, double test_fraction, std::size_t k,
                     std::uint64_t seed) {
  if (k == 0) throw PreconditionError("make_split: k must be >= 1");
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) {
    throw PreconditionError("make_split: test fraction must lie in [0, 1)");
  }
  std::set<std::string> unique;
  for (const auto& s : subjects) {
    if (!unique.insert(s.subject_id).second) {
      throw PreconditionError("make_split: duplicate subject '" + s.subject_id + "'");
    }
  }
  if (subjects.size() < 2) throw PreconditionError("make_split: need at least two subjects");

  SplitPlan plan;
  plan.seed = seed;
  SplitMix64 rng(seed);
  std::array<std::vector<std::string>, 2> by_class;
  for (const auto& s : subjects) by_class[s.label == 1 ? 1 : 0].push_back(s.subject_id);
  for (auto& ids : by_class) {
    std::sort(ids.begin(), ids.end());
    shuffle(std::span(ids), rng);
  }

  const std::size_t n = subjects.size();
  auto n_test = static_cast<std::size_t>(std::lround(test_fraction * static_cast<double>(n)));
  n_test = std::min(n_test, n - 1);

  // Largest-remainder apportionment of the test set across classes.
  std::array<std::size_t, 2> take{};
  std::array<double, 2> remainder{};
  std::size_t assigned = 0;
  for (int c = 0; c < 2; ++c) {
    const double quota = static_cast<double>(n_test) * static_cast<double>(by_class[c].size()) /
                         static_cast<double>(n);
    take[c] = static_cast<std::size_t>(std::floor(quota));
    remainder[c] = quota - static_cast<double>(take[c]);
    assigned += take[c];
  }
  while (assigned < n_test) {
    int c = remainder[1] > remainder[0] ? 1 : 0;
    if (take[c] >= by_class[c].size()) c = 1 - c;
    ++take[c];
    remainder[c] = -1.0;
    ++assigned;
  }

  plan.folds.assign(k, {});
  std::size_t deal = 0;
  for (int c = 0; c < 2; ++c) {
    const auto& ids = by_class[c];
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (i < take[c]) {
        plan.test.push_back(ids[i]);
      } else {
        plan.folds[deal++ % k].push_back(ids[i]);
      }
    }
    if (ids.size() < k + 1) {
      plan.warnings.push_back("class " + std::to_string(c) + " has " + std::to_string(ids.size()) +
                              " subjects, fewer than k + 1 = " + std::to_string(k + 1));
    }
  }
  if (plan.test.empty()) plan.warnings.push_back("test set is empty");
  return plan;
}

SplitPlan make_split(const DatasetManifest& manifest, double test_fraction, std::size_t k,
                     std::uint64_t seed) {
  const auto subjects = subjects_of(manifest);
  return make_split(subjects, test_fraction, k, seed);
}

double auroc(std::span<const double> scores, std::span<const int> labels) {
  check_scores(scores, labels);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double n_pos = 0.0;
  double rank_sum = 0.0;  // 1-based average ranks of positives
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double average_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t m = i; m < j; ++m) {
      if (labels[order[m]] == 1) {
        rank_sum += average_rank;
        n_pos += 1.0;
      }
    }
    i = j;
  }
  const double n_neg = static_cast<double>(scores.size()) - n_pos;
  if (n_pos == 0.0 || n_neg == 0.0) throw PreconditionError("auroc: both classes must be present");
  return (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

double auprc(std::span<const double> scores, std::span<const int> labels) {
  check_scores(scores, labels);
  const auto n_pos = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
  if (n_pos == 0.0) throw PreconditionError("auprc: no positive labels");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double tp = 0.0;
  double fp = 0.0;
  double recall_prev = 0.0;
  double ap = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] == 1 ? tp : fp) += 1.0;
      ++j;
    }
    const double recall = tp / n_pos;
    ap += (recall - recall_prev) * (tp / (tp + fp));
    recall_prev = recall;
    i = j;
  }
  return ap;
}

double accuracy(std::span<const double> scores, std::span<const int> labels, double threshold) {
  check_scores(scores, labels);
  if (scores.empty()) throw PreconditionError("accuracy: empty input");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    correct += (scores[i] > threshold ? 1 : 0) == labels[i];
  }
  return static_cast<double>(correct) / static_cast<double>(scores.size());
}

std::vector<LabeledTensor> make_labeled_dataset(std::span<const VideoRecord> records,
                                                FeatureSet feature_set, AngleSource source) {
  std::vector<PreparedRecord> prepared;
  prepared.reserve(records.size());
  for (const auto& record : records) prepared.push_back(prepare_record(record));
  const auto fragments = fragment_dataset(prepared);
  std::vector<LabeledTensor> out;
  out.reserve(fragments.fragments.size());
  for (const auto& fragment : fragments.fragments) {
    out.push_back({build_features(fragment, feature_set, source), fragment.info});
  }
  return out;
}

void ExperimentConfig::validate() const {
  if (grid.empty()) throw PreconditionError("experiment: hyperparameter grid is empty");
  if (n_seeds < 1) throw PreconditionError("experiment: n_seeds must be >= 1");
  if (folds < 1) throw PreconditionError("experiment: folds must be >= 1");
}

namespace {

struct Scored {
  std::vector<double> scores;
  std::vector<int> labels;
};

Scored score(const TrainedModel& model, std::span<const LabeledTensor> data,
             std::span<const std::size_t> indices, bool per_video) {
  Scored out;
  if (!per_video) {
    for (auto i : indices) {
      out.scores.push_back(predict(model, data[i].features));
      out.labels.push_back(data[i].label());
    }
    return out;
  }
  std::map<std::string, std::pair<double, std::size_t>> sums;
  std::map<std::string, int> label_of;
  std::vector<std::string> order;
  for (auto i : indices) {
    const auto& id = data[i].info.video_id;
    if (!sums.count(id)) order.push_back(id);
    auto& [sum, count] = sums[id];
    sum += predict(model, data[i].features);
    ++count;
    label_of[id] = data[i].label();
  }
  for (const auto& id : order) {
    out.scores.push_back(sums[id].first / static_cast<double>(sums[id].second));
    out.labels.push_back(label_of[id]);
  }
  return out;
}

std::vector<LabeledTensor> gather(std::span<const LabeledTensor> data,
                                  std::span<const std::size_t> indices) {
  std::vector<LabeledTensor> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(data[i]);
  return out;
}

std::vector<int> labels_at(std::span<const LabeledTensor> data, std::span<const std::size_t> indices) {
  std::vector<int> out;
  for (auto i : indices) out.push_back(data[i].label());
  return out;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config,
                                std::span<const LabeledTensor> dataset) {
  config.validate();
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (dataset[i].info.age_group == config.age_group) pool.push_back(i);
  }
  if (pool.empty()) {
    throw PreconditionError("experiment: no fragments for age group '" +
                            std::string(to_string(config.age_group)) + "'");
  }
  std::vector<LabeledTensor> group = gather(dataset, pool);
  const auto subjects = subjects_of(group);

  const std::string model_name(to_string(config.model));
  const std::string feature_name(to_string(config.feature_set));
  const std::string age_name(to_string(config.age_group));
  ExperimentResult result;

  for (std::size_t s = 0; s < config.n_seeds; ++s) {
    const auto plan = make_split(subjects, config.test_fraction, config.folds,
                                 derive_seed(config.base_seed, s));
    std::map<std::string, std::size_t> fold_of;  // test subjects map to folds.size()
    for (std::size_t f = 0; f < plan.folds.size(); ++f) {
      for (const auto& id : plan.folds[f]) fold_of[id] = f;
    }
    for (const auto& id : plan.test) fold_of[id] = plan.folds.size();

    std::vector<std::size_t> test_idx;
    std::vector<std::size_t> dev_idx;
    for (std::size_t i = 0; i < group.size(); ++i) {
      (fold_of.at(group[i].info.subject_id) == plan.folds.size() ? test_idx : dev_idx).push_back(i);
    }
    if (!has_both_classes(labels_at(group, test_idx)) || !has_both_classes(labels_at(group, dev_idx))) {
      ++result.skipped_seeds;
      result.notes.push_back("seed " + std::to_string(s) +
                             ": skipped, test or training partition lacks a class");
      continue;
    }

    std::size_t best = 0;
    std::vector<double> best_fold_auroc;
    std::vector<std::string> best_fold_name;
    if (config.grid.size() > 1) {
      double best_mean = -1.0;
      for (std::size_t g = 0; g < config.grid.size(); ++g) {
        std::vector<double> fold_auroc;
        std::vector<std::string> fold_name;
        for (std::size_t f = 0; f < plan.folds.size(); ++f) {
          std::vector<std::size_t> train_idx;
          std::vector<std::size_t> val_idx;
          for (auto i : dev_idx) {
            (fold_of.at(group[i].info.subject_id) == f ? val_idx : train_idx).push_back(i);
          }
          if (!has_both_classes(labels_at(group, train_idx)) ||
              !has_both_classes(labels_at(group, val_idx))) {
            continue;
          }
          const auto train_set = gather(group, train_idx);
          const auto model = fit_model(config.model, config.grid[g], train_set,
                                       derive_seed(config.base_seed, s, f + 1, g));
          const auto scored = score(model, group, val_idx, config.per_video);
          if (!has_both_classes(scored.labels)) continue;
          fold_auroc.push_back(auroc(scored.scores, scored.labels));
          fold_name.push_back(std::to_string(f));
        }
        if (fold_auroc.empty()) continue;
        const double mean = std::accumulate(fold_auroc.begin(), fold_auroc.end(), 0.0) /
                            static_cast<double>(fold_auroc.size());
        if (mean > best_mean) {
          best_mean = mean;
          best = g;
          best_fold_auroc = std::move(fold_auroc);
          best_fold_name = std::move(fold_name);
        }
      }
      if (best_mean < 0.0) {
        result.notes.push_back("seed " + std::to_string(s) +
                               ": no CV fold had both classes, using the first grid point");
      }
    }

    const auto train_set = gather(group, dev_idx);
    const auto model = fit_model(config.model, config.grid[best], train_set,
                                 derive_seed(config.base_seed, s, 0, best));
    const auto scored = score(model, group, test_idx, config.per_video);
    for (std::size_t f = 0; f < best_fold_auroc.size(); ++f) {
      result.raw.push_back({s, best_fold_name[f], model_name, feature_name, age_name, "cv_auroc",
                            best_fold_auroc[f]});
    }
    result.raw.push_back({s, "test", model_name, feature_name, age_name, "auroc",
                          auroc(scored.scores, scored.labels)});
    result.raw.push_back({s, "test", model_name, feature_name, age_name, "auprc",
                          auprc(scored.scores, scored.labels)});
    result.raw.push_back({s, "test", model_name, feature_name, age_name, "accuracy",
                          accuracy(scored.scores, scored.labels)});
    result.selected_grid_index.push_back(best);
  }
  if (result.skipped_seeds > 0) {
    result.notes.push_back(std::to_string(result.skipped_seeds) + " of " +
                           std::to_string(config.n_seeds) + " seeds skipped");
  }
  result.report = summarize(result.raw);
  return result;
}

EvalReport summarize(std::span<const RawResult> raw) {
  std::map<std::tuple<std::string, std::string, std::string, std::string>, std::vector<double>> cells;
  for (const auto& r : raw) {
    if (r.fold != "test") continue;
    cells[{r.model, r.feature_set, r.age_group, r.metric}].push_back(r.value);
  }
  EvalReport report;
  for (const auto& [key, values] : cells) {
    const double n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double squares = 0.0;
    for (double v : values) squares += (v - mean) * (v - mean);
    report.rows.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), std::get<3>(key),
                           mean, std::sqrt(squares / n), static_cast<int>(values.size())});
  }
  return report;
}

void write_raw_results(std::span<const RawResult> raw, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << "seed,fold,model,feature_set,age_group,metric,value\n";
  for (const auto& r : raw) {
    out << r.seed << ',' << r.fold << ',' << r.model << ',' << r.feature_set << ',' << r.age_group
        << ',' << r.metric << ',' << format_double(r.value) << '\n';
  }
  out.flush();
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::vector<RawResult> read_raw_results(const std::filesystem::path& path) {
  const auto table = csv::read(path, kRawHeader);
  std::vector<RawResult> raw;
  for (const auto& row : table.rows) {
    const auto& f = row.fields;
    const auto seed = csv::parse_int(f[0], path, row.line);
    if (seed < 0) throw ValidationError(csv::context(path, row.line) + ": negative seed");
    raw.push_back({static_cast<std::size_t>(seed), f[1], f[2], f[3], f[4], f[5],
                   csv::parse_double(f[6], path, row.line)});
  }
  return raw;
}

}  // namespace gma
