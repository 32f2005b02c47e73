#include <catch2/catch_amalgamated.hpp>

#include "feederlab/models/model.hpp"
#include "support/sampleset_gen.hpp"

using namespace feederlab;

namespace {

std::vector<std::vector<double>> dense_rows(const std::vector<std::vector<double>>& rows) {
  return rows;
}

}  // namespace

TEST_CASE("pure-constant residuals give a single-leaf tree") {
  std::vector<std::vector<double>> X = {{1, 0}, {2, 1}, {3, 0}, {4, 1}};
  std::vector<double> residuals(4, 5.0);
  GbtRoundConfig cfg;
  cfg.max_depth = 3;
  Tree t = gbt_fit_round(dense_rows(X), residuals, cfg);
  CHECK(t.split_feature[0] == -1);
  CHECK(t.value[0] == 5.0);
  CHECK(t.predict([&](int c) { return X[0][static_cast<std::size_t>(c)]; }) == 5.0);
}

TEST_CASE("a binary feature that separates residuals yields an exact depth-1 fit") {
  // 4-row hand example: feature 1 separates {-2,-2} from {4,4}
  std::vector<std::vector<double>> X = {{7, 0}, {3, 0}, {9, 1}, {1, 1}};
  std::vector<double> residuals = {-2, -2, 4, 4};
  GbtRoundConfig cfg;
  cfg.max_depth = 1;
  Tree t = gbt_fit_round(X, residuals, cfg);

  REQUIRE(t.split_feature[0] == 1);
  CHECK(t.threshold[0] == Catch::Approx(0.5));
  for (std::size_t r = 0; r < X.size(); ++r)
    CHECK(t.predict([&](int c) { return X[r][static_cast<std::size_t>(c)]; }) == residuals[r]);
}

TEST_CASE("level-wise column sampling can exclude the best feature") {
  // feature 0 splits perfectly; feature 1 only partially
  std::vector<std::vector<double>> X = {{0, 0}, {0, 0}, {1, 0}, {1, 1}};
  std::vector<double> residuals = {-3, -3, 3, 3};
  GbtRoundConfig cfg;
  cfg.max_depth = 1;
  cfg.colsample_bylevel = 0.5;  // one of the two features per level

  bool saw_f0 = false, saw_f1 = false;
  for (std::uint64_t seed = 0; seed < 32 && !(saw_f0 && saw_f1); ++seed) {
    cfg.seed = seed;
    Tree t = gbt_fit_round(X, residuals, cfg);
    REQUIRE(t.split_feature[0] >= 0);
    if (t.split_feature[0] == 0) {
      saw_f0 = true;  // best feature available: exact fit
      for (std::size_t r = 0; r < X.size(); ++r)
        CHECK(t.predict([&](int c) { return X[r][static_cast<std::size_t>(c)]; }) == residuals[r]);
    } else {
      saw_f1 = true;  // best feature excluded: next-best split chosen
      CHECK(t.split_feature[0] == 1);
      CHECK(t.predict([&](int c) { return X[3][static_cast<std::size_t>(c)]; }) == 3.0);
      CHECK(t.predict([&](int c) { return X[0][static_cast<std::size_t>(c)]; }) ==
            Catch::Approx(-1.0));  // mean of {-3,-3,3}
    }
  }
  CHECK(saw_f0);
  CHECK(saw_f1);
}

TEST_CASE("row subsampling fits the sampled rows only") {
  std::vector<std::vector<double>> X;
  std::vector<double> residuals;
  Rng rng(5);
  for (int i = 0; i < 64; ++i) {
    X.push_back({rng.uniform(0, 1), rng.uniform(0, 1)});
    residuals.push_back(rng.uniform(-1, 1));
  }
  GbtRoundConfig cfg;
  cfg.max_depth = 2;
  cfg.subsample = 0.5;
  cfg.seed = 4;
  Tree a = gbt_fit_round(X, residuals, cfg);
  Tree b = gbt_fit_round(X, residuals, cfg);
  CHECK(a.split_feature == b.split_feature);  // deterministic per seed
  CHECK(a.value == b.value);
  cfg.seed = 5;
  Tree c = gbt_fit_round(X, residuals, cfg);
  bool differs = a.split_feature != c.split_feature || a.threshold != c.threshold ||
                 a.value != c.value;
  CHECK(differs);
}

TEST_CASE("depth-0 single-round ensemble is the learning-rate-scaled mean") {
  Rng rng(6);
  auto samples = testgen::make_samples(
      rng, 4, 40, [](const FeatureRow& x) { return x[0] + 2.0; }, 0.3);
  GbtConfig cfg;
  cfg.max_depth = 0;
  cfg.n_estimators = 1;
  cfg.subsample = 1.0;
  auto model = train_gbt(samples, testgen::all_rows(samples), cfg, 0.125, 9);
  REQUIRE(model.trees.size() == 1);

  auto split = detail_models::split_validation_feeders(samples, testgen::all_rows(samples),
                                                       0.125, 9);
  double mean = 0;
  for (std::size_t r : split.fit_rows) mean += samples.target(r);
  mean /= double(split.fit_rows.size());

  FeatureRow x;
  samples.fill_row(0, x);
  CHECK(model.predict_one(x) == Catch::Approx(cfg.learning_rate * mean).margin(1e-12));
}

TEST_CASE("full-set training loss is monotone non-increasing with subsample 1") {
  Rng rng(7);
  auto samples = testgen::make_samples(
      rng, 6, 60,
      [](const FeatureRow& x) { return x[0] * 0.4 + (x[22] > 0 ? 5.0 : -5.0); }, 0.4);
  GbtConfig cfg;
  cfg.n_estimators = 60;
  cfg.subsample = 1.0;
  cfg.colsample_bylevel = 0.5;
  cfg.max_depth = 3;
  cfg.early_stopping_rounds = 60;
  auto model = train_gbt(samples, testgen::all_rows(samples), cfg, 0.125, 2);
  for (std::size_t r = 1; r < model.log.fit_loss.size(); ++r)
    REQUIRE(model.log.fit_loss[r] <= model.log.fit_loss[r - 1] + 1e-9);
}

TEST_CASE("each round improves the squared loss on its own subsample") {
  Rng rng(8);
  auto samples = testgen::make_samples(
      rng, 6, 60, [](const FeatureRow& x) { return x[1] - 0.5 * x[25]; }, 0.3);
  GbtConfig cfg;
  cfg.n_estimators = 40;
  cfg.subsample = 0.7;
  cfg.max_depth = 4;
  auto model = train_gbt(samples, testgen::all_rows(samples), cfg, 0.125, 3);
  REQUIRE(model.log.sub_loss_before.size() == model.log.sub_loss_after.size());
  for (std::size_t r = 0; r < model.log.sub_loss_before.size(); ++r)
    REQUIRE(model.log.sub_loss_after[r] <= model.log.sub_loss_before[r] + 1e-9);
}

TEST_CASE("early stopping keeps the best-round ensemble") {
  Rng rng(9);
  // mostly noise so validation loss plateaus quickly
  auto samples = testgen::make_samples(
      rng, 8, 50, [](const FeatureRow& x) { return 0.05 * x[0]; }, 2.0);
  GbtConfig cfg;
  cfg.n_estimators = 400;
  cfg.early_stopping_rounds = 15;
  cfg.max_depth = 3;
  auto model = train_gbt(samples, testgen::all_rows(samples), cfg, 0.125, 4);

  auto rounds_run = static_cast<int>(model.log.val_loss.size());
  CHECK(rounds_run < cfg.n_estimators);
  // the last executed round lies within early_stopping_rounds of the best one
  CHECK((rounds_run - 1) - model.log.best_round <= cfg.early_stopping_rounds);
  CHECK(static_cast<int>(model.trees.size()) == model.log.best_round + 1);

  double best = *std::min_element(model.log.val_loss.begin(), model.log.val_loss.end());
  CHECK(best == model.log.val_loss[static_cast<std::size_t>(model.log.best_round)]);
  CHECK(best <= model.log.val_loss.back());
}

TEST_CASE("gbt training and prediction are deterministic") {
  Rng rng(10);
  auto samples = testgen::make_samples(
      rng, 5, 40, [](const FeatureRow& x) { return x[0] > 15 ? 8.0 : -2.0; }, 0.2);
  GbtConfig cfg;
  cfg.n_estimators = 30;
  cfg.max_depth = 3;
  auto a = train_gbt(samples, testgen::all_rows(samples), cfg, 0.125, 5);
  auto b = train_gbt(samples, testgen::all_rows(samples), cfg, 0.125, 5);
  REQUIRE(a.trees.size() == b.trees.size());
  FeatureRow x;
  for (std::size_t r = 0; r < samples.size(); r += 3) {
    samples.fill_row(r, x);
    CHECK(a.predict_one(x) == b.predict_one(x));
  }
}

TEST_CASE("permuting prediction rows permutes outputs identically") {
  Rng rng(11);
  auto samples = testgen::make_samples(
      rng, 5, 30, [](const FeatureRow& x) { return x[0]; }, 0.1);
  TrainConfig tc;
  tc.kind = ModelKind::kBoostedTrees;
  tc.trees.n_estimators = 20;
  tc.seed = 6;
  auto model = train(samples, testgen::all_rows(samples), tc);

  std::vector<FeatureRow> rows;
  for (std::size_t r = 0; r < 20; ++r) rows.push_back(samples.feature_row(r));
  auto forward = model.predict(rows);
  std::reverse(rows.begin(), rows.end());
  auto reversed = model.predict(rows);
  for (std::size_t i = 0; i < rows.size(); ++i)
    CHECK(forward[i] == reversed[rows.size() - 1 - i]);
}

TEST_CASE("boosted-tree model survives a save/load round trip") {
  Rng rng(12);
  auto samples = testgen::make_samples(
      rng, 4, 30, [](const FeatureRow& x) { return x[3]; }, 0.1);
  TrainConfig tc;
  tc.kind = ModelKind::kBoostedTrees;
  tc.trees.n_estimators = 10;
  tc.seed = 7;
  auto model = train(samples, testgen::all_rows(samples), tc);
  auto path = std::filesystem::temp_directory_path() / "feederlab_tests" / "gbt.bin";
  save_model(path, model);
  auto back = load_model(path);
  FeatureRow x;
  samples.fill_row(11, x);
  CHECK(back.predict_one(x) == model.predict_one(x));
  CHECK(std::get<GbtModel>(back.payload).trees.size() ==
        std::get<GbtModel>(model.payload).trees.size());
}
