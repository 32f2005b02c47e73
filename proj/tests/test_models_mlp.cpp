#include <catch2/catch_amalgamated.hpp>

#include "feederlab/models/model.hpp"
#include "support/sampleset_gen.hpp"

using namespace feederlab;

namespace {

Eigen::MatrixXd random_batch(Rng& rng, int n, int d) {
  Eigen::MatrixXd X(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) X(i, j) = rng.uniform(0.0, 1.0);
  return X;
}

double loss_of(const MlpParams& p, const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  return mlp_forward_backward(p, X, y).loss;
}

}  // namespace

TEST_CASE("zero network predicts zero with zero hidden-layer gradients") {
  MlpParams p = MlpParams::zeros(kFeatureDim, 20);
  Rng rng(1);
  Eigen::MatrixXd X = random_batch(rng, 4, kFeatureDim);
  Eigen::VectorXd y(4);
  y << 0.2, 0.4, 0.6, 0.8;

  auto out = mlp_forward_backward(p, X, y);
  for (int i = 0; i < 4; ++i) CHECK(out.predictions(i) == 0.0);
  CHECK(out.gradients.W1.cwiseAbs().maxCoeff() == 0.0);  // upstream weight w2 is zero
  CHECK(out.gradients.b1.cwiseAbs().maxCoeff() == 0.0);
  CHECK(out.gradients.w2.cwiseAbs().maxCoeff() == 0.0);  // hidden activations are zero
  CHECK(out.gradients.b2 != 0.0);
}

TEST_CASE("gradients match central finite differences on 10 random draws") {
  Rng rng(42);
  const int hidden = 6, d = kFeatureDim;
  for (int draw = 0; draw < 10; ++draw) {
    MlpParams p = MlpParams::glorot(d, hidden, rng);
    p.b2 = rng.uniform(-0.5, 0.5);
    for (int i = 0; i < hidden; ++i) p.b1(i) = rng.uniform(-0.5, 0.5);
    Eigen::MatrixXd X = random_batch(rng, 5, d);
    Eigen::VectorXd y(5);
    for (int i = 0; i < 5; ++i) y(i) = rng.uniform(0.0, 1.0);

    auto analytic = mlp_forward_backward(p, X, y).gradients;
    const double h = 1e-6;
    auto check_grad = [&](double got, double* slot) {
      double orig = *slot;
      *slot = orig + h;
      double up = loss_of(p, X, y);
      *slot = orig - h;
      double down = loss_of(p, X, y);
      *slot = orig;
      double fd = (up - down) / (2 * h);
      double scale = std::max({std::abs(fd), std::abs(got), 1e-4});
      CHECK(std::abs(got - fd) / scale < 1e-5);
    };

    for (int i = 0; i < hidden; ++i)
      for (int j = 0; j < d; ++j) check_grad(analytic.W1(i, j), &p.W1(i, j));
    for (int i = 0; i < hidden; ++i) check_grad(analytic.b1(i), &p.b1(i));
    for (int i = 0; i < hidden; ++i) check_grad(analytic.w2(i), &p.w2(i));
    check_grad(analytic.b2, &p.b2);
  }
}

TEST_CASE("a small gradient step on one sample reduces its loss") {
  Rng rng(7);
  MlpParams p = MlpParams::glorot(kFeatureDim, 8, rng);
  Eigen::MatrixXd X = random_batch(rng, 1, kFeatureDim);
  Eigen::VectorXd y(1);
  y << 0.9;

  auto out = mlp_forward_backward(p, X, y);
  const double step = 1e-3;
  MlpParams q = p;
  q.W1 -= step * out.gradients.W1;
  q.b1 -= step * out.gradients.b1;
  q.w2 -= step * out.gradients.w2;
  q.b2 -= step * out.gradients.b2;
  CHECK(loss_of(q, X, y) < out.loss);
}

TEST_CASE("batch dimension mismatch is a shape error") {
  MlpParams p = MlpParams::zeros(kFeatureDim, 4);
  Eigen::MatrixXd X(2, kFeatureDim - 1);
  X.setZero();
  Eigen::VectorXd y(2);
  y.setZero();
  CHECK_THROWS_AS(mlp_forward_backward(p, X, y), std::invalid_argument);
}

TEST_CASE("training learns a linear map and inverts the target scaling") {
  Rng rng(3);
  auto samples = testgen::make_samples(
      rng, 12, 80, [](const FeatureRow& x) { return 1.5 * x[0] - 10.0; }, 0.05);
  NeuralConfig cfg;
  cfg.hidden_size = 16;
  cfg.batch_size = 32;
  cfg.max_epochs = 400;
  cfg.patience = 60;
  auto model = train_mlp(samples, testgen::all_rows(samples), cfg, 0.125, 11);

  CHECK_FALSE(model.validation_log.empty());
  CHECK(model.best_epoch >= 0);

  // predictions come back in kW units
  double se = 0, pred_mean = 0, target_mean = 0;
  std::size_t n = 0;
  FeatureRow x;
  for (std::size_t r = 0; r < samples.size(); ++r) {
    samples.fill_row(r, x);
    double p = model.predict_one(x);
    se += (p - samples.target(r)) * (p - samples.target(r));
    pred_mean += p;
    target_mean += samples.target(r);
    ++n;
  }
  pred_mean /= double(n);
  target_mean /= double(n);
  double target_range = 1.5 * 30.0;
  CHECK(std::sqrt(se / double(n)) < 0.1 * target_range);
  CHECK(std::abs(pred_mean - target_mean) < 0.05 * target_range);
}

TEST_CASE("early stopping halts within patience of the best epoch") {
  Rng rng(4);
  // pure noise: validation loss plateaus immediately
  auto samples = testgen::make_samples(
      rng, 6, 60, [](const FeatureRow&) { return 0.0; }, 1.0);
  NeuralConfig cfg;
  cfg.max_epochs = 200;
  cfg.patience = 5;
  auto model = train_mlp(samples, testgen::all_rows(samples), cfg, 0.125, 2);
  auto epochs_run = static_cast<int>(model.validation_log.size());
  CHECK(epochs_run < cfg.max_epochs);
  CHECK(epochs_run - model.best_epoch <= cfg.patience + 1);

  double best = *std::min_element(model.validation_log.begin(), model.validation_log.end());
  CHECK(best <= model.validation_log.back());
}

TEST_CASE("training is deterministic for a fixed seed") {
  Rng rng(5);
  auto samples = testgen::make_samples(
      rng, 5, 40, [](const FeatureRow& x) { return x[2]; }, 0.1);
  NeuralConfig cfg;
  cfg.max_epochs = 10;
  auto a = train_mlp(samples, testgen::all_rows(samples), cfg, 0.125, 77);
  auto b = train_mlp(samples, testgen::all_rows(samples), cfg, 0.125, 77);
  CHECK(a.params.W1 == b.params.W1);
  CHECK(a.params.b2 == b.params.b2);
  CHECK(a.validation_log == b.validation_log);
}

TEST_CASE("divergence raises a diagnostic error") {
  Rng rng(6);
  auto samples = testgen::make_samples(
      rng, 4, 40, [](const FeatureRow& x) { return x[0]; }, 0.0);
  NeuralConfig cfg;
  cfg.learning_rate = 1e308;
  cfg.max_epochs = 5;
  CHECK_THROWS_AS(train_mlp(samples, testgen::all_rows(samples), cfg, 0.125, 1),
                  std::runtime_error);
}

TEST_CASE("neural model survives a save/load round trip") {
  Rng rng(9);
  auto samples = testgen::make_samples(
      rng, 4, 30, [](const FeatureRow& x) { return 0.2 * x[1]; }, 0.02);
  TrainConfig tc;
  tc.kind = ModelKind::kNeural;
  tc.neural.max_epochs = 5;
  tc.seed = 3;
  auto model = train(samples, testgen::all_rows(samples), tc);
  auto path = std::filesystem::temp_directory_path() / "feederlab_tests" / "mlp.bin";
  save_model(path, model);
  auto back = load_model(path);
  FeatureRow x;
  samples.fill_row(3, x);
  CHECK(back.predict_one(x) == model.predict_one(x));
}
