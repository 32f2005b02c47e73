#pragma once

#include <Eigen/Core>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "feederlab/models/common.hpp"

namespace feederlab {

/// Per-column min-max scaler onto [0, 1]; constant columns map to 0.
struct MinMaxScaler {
  std::vector<double> lo, hi;

  double scale(double v, std::size_t col) const {
    double range = hi[col] - lo[col];
    return range > 0.0 ? (v - lo[col]) / range : 0.0;
  }
  double unscale(double s, std::size_t col) const {
    return lo[col] + s * (hi[col] - lo[col]);
  }
};

/// Single-hidden-layer network: input -> tanh(hidden) -> linear output.
struct MlpParams {
  Eigen::MatrixXd W1;  // hidden x input
  Eigen::VectorXd b1;  // hidden
  Eigen::VectorXd w2;  // hidden
  double b2 = 0.0;

  static MlpParams zeros(int input_dim, int hidden) {
    MlpParams p;
    p.W1 = Eigen::MatrixXd::Zero(hidden, input_dim);
    p.b1 = Eigen::VectorXd::Zero(hidden);
    p.w2 = Eigen::VectorXd::Zero(hidden);
    return p;
  }

  static MlpParams glorot(int input_dim, int hidden, Rng& rng) {
    MlpParams p = zeros(input_dim, hidden);
    double a1 = std::sqrt(6.0 / (input_dim + hidden));
    for (int i = 0; i < hidden; ++i)
      for (int j = 0; j < input_dim; ++j) p.W1(i, j) = rng.uniform(-a1, a1);
    double a2 = std::sqrt(6.0 / (hidden + 1));
    for (int i = 0; i < hidden; ++i) p.w2(i) = rng.uniform(-a2, a2);
    return p;
  }
};

using MlpGradients = MlpParams;

struct MlpForwardBackward {
  Eigen::VectorXd predictions;
  MlpGradients gradients;
  double loss = 0.0;
};

/// Mean squared error forward/backward pass over one batch (rows of X scaled
/// to [0,1], targets scaled likewise). Gradients are exact.
inline MlpForwardBackward mlp_forward_backward(const MlpParams& p, const Eigen::MatrixXd& X,
                                               const Eigen::VectorXd& y) {
  if (X.rows() == 0) throw std::invalid_argument("empty batch");
  if (X.cols() != p.W1.cols()) throw std::invalid_argument("batch feature dimension mismatch");
  const auto n = static_cast<double>(X.rows());

  Eigen::MatrixXd z1 = (X * p.W1.transpose()).rowwise() + p.b1.transpose();
  Eigen::MatrixXd h = z1.array().tanh();
  Eigen::VectorXd pred = h * p.w2;
  pred.array() += p.b2;

  Eigen::VectorXd err = pred - y;
  MlpForwardBackward out;
  out.predictions = pred;
  out.loss = err.squaredNorm() / n;

  Eigen::VectorXd dpred = (2.0 / n) * err;
  out.gradients.w2 = h.transpose() * dpred;
  out.gradients.b2 = dpred.sum();
  Eigen::MatrixXd dz1 =
      (dpred * p.w2.transpose()).array() * (1.0 - h.array().square());
  out.gradients.W1 = dz1.transpose() * X;
  out.gradients.b1 = dz1.colwise().sum();
  return out;
}

struct MlpModel {
  MlpParams params;
  MinMaxScaler feature_scaler;
  MinMaxScaler target_scaler;
  std::vector<double> validation_log;  // scaled-space MSE per epoch
  int best_epoch = -1;

  double predict_one(const FeatureRow& x) const {
    Eigen::VectorXd xv(kFeatureDim);
    for (int j = 0; j < kFeatureDim; ++j)
      xv(j) = feature_scaler.scale(x[static_cast<std::size_t>(j)], static_cast<std::size_t>(j));
    Eigen::VectorXd h = (params.W1 * xv + params.b1).array().tanh();
    double s = params.w2.dot(h) + params.b2;
    return target_scaler.unscale(s, 0);
  }
};

namespace detail_models {

struct AdamState {
  MlpParams m, v;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  long step = 0;

  explicit AdamState(int input_dim, int hidden)
      : m(MlpParams::zeros(input_dim, hidden)), v(MlpParams::zeros(input_dim, hidden)) {}

  void update(MlpParams& p, const MlpGradients& g, double lr) {
    ++step;
    double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    auto upd = [&](auto& pm, auto& mm, auto& vm, const auto& gm) {
      mm = beta1 * mm + (1.0 - beta1) * gm;
      vm = beta2 * vm + (1.0 - beta2) * gm.array().square().matrix();
      pm.array() -= lr * (mm.array() / c1) / ((vm.array() / c2).sqrt() + eps);
    };
    upd(p.W1, m.W1, v.W1, g.W1);
    upd(p.b1, m.b1, v.b1, g.b1);
    upd(p.w2, m.w2, v.w2, g.w2);
    m.b2 = beta1 * m.b2 + (1.0 - beta1) * g.b2;
    v.b2 = beta2 * v.b2 + (1.0 - beta2) * g.b2 * g.b2;
    p.b2 -= lr * (m.b2 / c1) / (std::sqrt(v.b2 / c2) + eps);
  }
};

inline void fill_scaled_batch(const SampleSet& samples, const std::vector<std::size_t>& rows,
                              std::size_t begin, std::size_t end, const MinMaxScaler& fs,
                              const MinMaxScaler& ts, Eigen::MatrixXd& X, Eigen::VectorXd& y) {
  auto nb = static_cast<Eigen::Index>(end - begin);
  X.resize(nb, kFeatureDim);
  y.resize(nb);
  FeatureRow buf;
  for (std::size_t i = begin; i < end; ++i) {
    samples.fill_row(rows[i], buf);
    auto r = static_cast<Eigen::Index>(i - begin);
    for (int j = 0; j < kFeatureDim; ++j)
      X(r, j) = fs.scale(buf[static_cast<std::size_t>(j)], static_cast<std::size_t>(j));
    y(r) = ts.scale(samples.target(rows[i]), 0);
  }
}

inline double scaled_mse(const SampleSet& samples, const std::vector<std::size_t>& rows,
                         const MinMaxScaler& fs, const MinMaxScaler& ts, const MlpParams& p) {
  double sum = 0.0;
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  constexpr std::size_t chunk = 8192;
  for (std::size_t begin = 0; begin < rows.size(); begin += chunk) {
    std::size_t end = std::min(begin + chunk, rows.size());
    fill_scaled_batch(samples, rows, begin, end, fs, ts, X, y);
    Eigen::MatrixXd h = ((X * p.W1.transpose()).rowwise() + p.b1.transpose()).array().tanh();
    Eigen::VectorXd pred = h * p.w2;
    pred.array() += p.b2;
    sum += (pred - y).squaredNorm();
  }
  return sum / static_cast<double>(rows.size());
}

}  // namespace detail_models

/// Trains the network with minibatch adaptive-moment updates and early
/// stopping on a feeder-disjoint validation split. Features and targets are
/// min-max scaled with fit-split statistics only; predictions are returned
/// in original kW units.
inline MlpModel train_mlp(const SampleSet& samples, const std::vector<std::size_t>& rows,
                          const NeuralConfig& cfg, double validation_fraction,
                          std::uint64_t seed) {
  auto split = detail_models::split_validation_feeders(samples, rows, validation_fraction, seed);
  if (split.fit_rows.empty() || split.val_rows.empty())
    throw std::invalid_argument("training split produced an empty side");

  MlpModel model;
  model.feature_scaler.lo.assign(kFeatureDim, std::numeric_limits<double>::infinity());
  model.feature_scaler.hi.assign(kFeatureDim, -std::numeric_limits<double>::infinity());
  model.target_scaler.lo.assign(1, std::numeric_limits<double>::infinity());
  model.target_scaler.hi.assign(1, -std::numeric_limits<double>::infinity());
  FeatureRow buf;
  for (std::size_t r : split.fit_rows) {
    samples.fill_row(r, buf);
    for (std::size_t j = 0; j < kFeatureDim; ++j) {
      model.feature_scaler.lo[j] = std::min(model.feature_scaler.lo[j], buf[j]);
      model.feature_scaler.hi[j] = std::max(model.feature_scaler.hi[j], buf[j]);
    }
    model.target_scaler.lo[0] = std::min(model.target_scaler.lo[0], samples.target(r));
    model.target_scaler.hi[0] = std::max(model.target_scaler.hi[0], samples.target(r));
  }

  Rng rng(Rng::splitmix(seed) ^ 0x6d6c70ULL);
  MlpParams params = MlpParams::glorot(kFeatureDim, cfg.hidden_size, rng);
  detail_models::AdamState adam(kFeatureDim, cfg.hidden_size);

  std::vector<std::size_t> order = split.fit_rows;
  MlpParams best = params;
  double best_val = std::numeric_limits<double>::infinity();
  int epochs_since_best = 0;
  Eigen::MatrixXd X;
  Eigen::VectorXd y;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t begin = 0; begin < order.size();
         begin += static_cast<std::size_t>(cfg.batch_size)) {
      std::size_t end = std::min(begin + static_cast<std::size_t>(cfg.batch_size), order.size());
      detail_models::fill_scaled_batch(samples, order, begin, end, model.feature_scaler,
                                       model.target_scaler, X, y);
      auto fb = mlp_forward_backward(params, X, y);
      if (!std::isfinite(fb.loss))
        throw std::runtime_error("neural training diverged: non-finite loss at epoch " +
                                 std::to_string(epoch));
      adam.update(params, fb.gradients, cfg.learning_rate);
    }
    double val = detail_models::scaled_mse(samples, split.val_rows, model.feature_scaler,
                                           model.target_scaler, params);
    model.validation_log.push_back(val);
    if (val < best_val) {
      best_val = val;
      best = params;
      model.best_epoch = epoch;
      epochs_since_best = 0;
    } else if (++epochs_since_best >= cfg.patience) {
      break;
    }
  }
  model.params = best;
  return model;
}

}  // namespace feederlab
