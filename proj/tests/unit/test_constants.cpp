#include <doctest.h>

#include "gma/eval.hpp"
#include "gma/learn/model.hpp"
#include "gma/preprocess.hpp"

using namespace gma;

TEST_CASE("published preprocessing constants") {
  CHECK(kTargetFps == 30.0);
  CHECK(kCropMargin == 0.15);
  CHECK(kOutlierSigmaMultiple == 15.0);
  CHECK(kNumKeypoints == 17);
  CHECK(kNumAngles == 10);
}

TEST_CASE("published model hyperparameters") {
  CHECK(kDefaultTrees == 170);
  CHECK(default_hyperparameters(ModelKind::kRandomForest).n_trees == 170);

  const auto cnn = default_hyperparameters(ModelKind::kCnn);
  CHECK(cnn.learning_rate == 1e-5);
  CHECK(cnn.batch_size == 6);
  CHECK(cnn.epochs == 150);
  CHECK(CnnShape{}.bottleneck == 150);

  const auto lstm = default_hyperparameters(ModelKind::kLstm);
  CHECK(lstm.learning_rate == 1e-3);
  CHECK(lstm.batch_size == 6);
  CHECK(lstm.epochs == 200);
  CHECK(LstmShape{}.layers == 3);
  CHECK(LstmShape{}.hidden == 64);
}

TEST_CASE("published evaluation protocol") {
  const ExperimentConfig config;
  CHECK(config.n_seeds == 30);
  CHECK(config.test_fraction == 0.2);
  CHECK(config.folds == 5);
}
