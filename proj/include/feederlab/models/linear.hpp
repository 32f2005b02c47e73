#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "feederlab/models/common.hpp"

namespace feederlab {

/// Elastic-net linear regression solved by coordinate descent on the Gram
/// matrix of standardized features. Weights and bias are reported in raw
/// feature units.
struct LinearModel {
  std::array<double, kFeatureDim> weights{};
  double bias = 0.0;
  std::vector<double> objective_log;  // penalized objective per sweep

  double predict_one(const FeatureRow& x) const {
    double acc = bias;
    for (int i = 0; i < kFeatureDim; ++i)
      acc += weights[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)];
    return acc;
  }
};

namespace detail_models {

inline double soft_threshold(double x, double t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

}  // namespace detail_models

inline LinearModel train_linear(const SampleSet& samples, const std::vector<std::size_t>& rows,
                                const LinearConfig& cfg) {
  if (rows.empty()) throw std::invalid_argument("no training rows");
  const auto n = static_cast<double>(rows.size());
  constexpr int d = kFeatureDim;

  std::array<double, d> mean{}, sd{};
  double y_mean = 0.0;
  FeatureRow buf;
  for (std::size_t r : rows) {
    samples.fill_row(r, buf);
    for (int j = 0; j < d; ++j) mean[static_cast<std::size_t>(j)] += buf[static_cast<std::size_t>(j)];
    y_mean += samples.target(r);
  }
  for (auto& m : mean) m /= n;
  y_mean /= n;
  for (std::size_t r : rows) {
    samples.fill_row(r, buf);
    for (int j = 0; j < d; ++j) {
      double c = buf[static_cast<std::size_t>(j)] - mean[static_cast<std::size_t>(j)];
      sd[static_cast<std::size_t>(j)] += c * c;
    }
  }
  for (auto& s : sd) s = std::sqrt(s / n);

  // Gram matrix and feature-target correlations in standardized coordinates.
  std::array<std::array<double, d>, d> gram{};
  std::array<double, d> corr{};
  std::array<double, d> z{};
  for (std::size_t r : rows) {
    samples.fill_row(r, buf);
    for (int j = 0; j < d; ++j) {
      auto ju = static_cast<std::size_t>(j);
      z[ju] = sd[ju] > 1e-12 ? (buf[ju] - mean[ju]) / sd[ju] : 0.0;
    }
    double yc = samples.target(r) - y_mean;
    for (int a = 0; a < d; ++a) {
      auto au = static_cast<std::size_t>(a);
      corr[au] += z[au] * yc;
      for (int b = a; b < d; ++b) gram[au][static_cast<std::size_t>(b)] += z[au] * z[static_cast<std::size_t>(b)];
    }
  }
  for (int a = 0; a < d; ++a)
    for (int b = a; b < d; ++b) {
      gram[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] /= n;
      gram[static_cast<std::size_t>(b)][static_cast<std::size_t>(a)] =
          gram[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
    }
  for (auto& c : corr) c /= n;

  const double lambda = cfg.penalty_strength;
  const double l1 = lambda * cfg.l1_ratio;
  const double l2 = lambda * (1.0 - cfg.l1_ratio);

  std::array<double, d> w{};
  LinearModel model;
  for (int sweep = 0; sweep < cfg.max_sweeps; ++sweep) {
    double max_delta = 0.0;
    for (int j = 0; j < d; ++j) {
      auto ju = static_cast<std::size_t>(j);
      if (sd[ju] <= 1e-12) continue;  // constant column stays at zero
      double rho = corr[ju] + gram[ju][ju] * w[ju];
      for (int k = 0; k < d; ++k) rho -= gram[ju][static_cast<std::size_t>(k)] * w[static_cast<std::size_t>(k)];
      double w_new = detail_models::soft_threshold(rho, l1) / (gram[ju][ju] + l2);
      max_delta = std::max(max_delta, std::abs(w_new - w[ju]));
      w[ju] = w_new;
    }
    double quad = 0.0, pen = 0.0;
    for (int a = 0; a < d; ++a) {
      auto au = static_cast<std::size_t>(a);
      double gw = 0.0;
      for (int b = 0; b < d; ++b) gw += gram[au][static_cast<std::size_t>(b)] * w[static_cast<std::size_t>(b)];
      quad += w[au] * (0.5 * gw - corr[au]);
      pen += l1 * std::abs(w[au]) + 0.5 * l2 * w[au] * w[au];
    }
    model.objective_log.push_back(quad + pen);
    if (max_delta < cfg.tol) break;
  }

  model.bias = y_mean;
  for (int j = 0; j < d; ++j) {
    auto ju = static_cast<std::size_t>(j);
    if (sd[ju] <= 1e-12) continue;
    model.weights[ju] = w[ju] / sd[ju];
    model.bias -= model.weights[ju] * mean[ju];
  }
  return model;
}

}  // namespace feederlab
