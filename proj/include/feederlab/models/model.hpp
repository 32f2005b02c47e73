#pragma once

#include <filesystem>
#include <fstream>
#include <variant>

#include <json.hpp>

#include "feederlab/models/gbt.hpp"
#include "feederlab/models/linear.hpp"
#include "feederlab/models/mlp.hpp"

namespace feederlab {

/// A trained regressor behind the common train/predict contract. Prediction
/// is deterministic, side-effect-free and sees nothing but the 33 features.
struct TrainedModel {
  ModelKind kind = ModelKind::kLinear;
  std::uint64_t seed = 0;
  std::string config_digest;
  std::variant<LinearModel, MlpModel, GbtModel> payload;
  std::vector<std::int32_t> trained_feeders;  // provenance, for leakage checks

  double predict_one(const FeatureRow& x) const {
    return std::visit([&](const auto& m) { return m.predict_one(x); }, payload);
  }

  std::vector<double> predict(const std::vector<FeatureRow>& rows) const {
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& x : rows) out.push_back(predict_one(x));
    return out;
  }

  std::vector<double> predict_rows(const SampleSet& samples,
                                   const std::vector<std::size_t>& rows) const {
    std::vector<double> out;
    out.reserve(rows.size());
    FeatureRow buf;
    if (const auto* gbt = std::get_if<GbtModel>(&payload)) {
      for (std::size_t r : rows) {
        double acc = 0.0;
        for (const auto& t : gbt->trees)
          acc += t.predict([&](int col) { return samples.feature(r, col); });
        out.push_back(gbt->learning_rate * acc);
      }
      return out;
    }
    for (std::size_t r : rows) {
      samples.fill_row(r, buf);
      out.push_back(predict_one(buf));
    }
    return out;
  }
};

/// Trains one model on the given sample rows. The neural and boosted-tree
/// models carve a feeder-disjoint validation split out of the rows for early
/// stopping; the linear model fits on everything.
inline TrainedModel train(const SampleSet& samples, const std::vector<std::size_t>& rows,
                          const TrainConfig& config) {
  config.validate();
  {
    std::vector<std::int32_t> feeders;
    for (std::size_t r : rows) feeders.push_back(samples.feeder_of(r));
    std::sort(feeders.begin(), feeders.end());
    feeders.erase(std::unique(feeders.begin(), feeders.end()), feeders.end());
    if (feeders.size() < 2)
      throw std::invalid_argument("training requires samples from at least 2 feeders");
  }
  detail_models::validate_training_rows(samples, rows);

  TrainedModel model;
  model.kind = config.kind;
  model.seed = config.seed;
  switch (config.kind) {
    case ModelKind::kLinear:
      model.payload = train_linear(samples, rows, config.linear);
      break;
    case ModelKind::kNeural:
      model.payload = train_mlp(samples, rows, config.neural, config.validation_fraction,
                                config.seed);
      break;
    case ModelKind::kBoostedTrees:
      model.payload = train_gbt(samples, rows, config.trees, config.validation_fraction,
                                config.seed);
      break;
  }
  {
    std::vector<std::int32_t> feeders;
    for (std::size_t r : rows) feeders.push_back(samples.feeder_of(r));
    std::sort(feeders.begin(), feeders.end());
    feeders.erase(std::unique(feeders.begin(), feeders.end()), feeders.end());
    model.trained_feeders = std::move(feeders);
  }
  return model;
}

// ---- model.bin: versioned self-describing JSON dump -----------------------

namespace detail_models {

inline nlohmann::json tree_to_json(const Tree& t) {
  return nlohmann::json{{"max_depth", t.max_depth},
                        {"split_feature", t.split_feature},
                        {"threshold", t.threshold},
                        {"value", t.value}};
}

inline Tree tree_from_json(const nlohmann::json& j) {
  Tree t;
  t.max_depth = j.at("max_depth").get<int>();
  t.split_feature = j.at("split_feature").get<std::vector<std::int16_t>>();
  t.threshold = j.at("threshold").get<std::vector<float>>();
  t.value = j.at("value").get<std::vector<double>>();
  return t;
}

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  std::vector<double> data(m.data(), m.data() + m.size());
  return nlohmann::json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  auto rows = j.at("rows").get<Eigen::Index>();
  auto cols = j.at("cols").get<Eigen::Index>();
  auto data = j.at("data").get<std::vector<double>>();
  Eigen::MatrixXd m(rows, cols);
  std::copy(data.begin(), data.end(), m.data());
  return m;
}

}  // namespace detail_models

inline nlohmann::json model_to_json(const TrainedModel& model) {
  nlohmann::json j;
  j["format"] = "feederlab-model";
  j["format_version"] = 1;
  j["kind"] = model_kind_name(model.kind);
  j["seed"] = model.seed;
  j["config_digest"] = model.config_digest;
  j["trained_feeders"] = model.trained_feeders;
  if (const auto* lin = std::get_if<LinearModel>(&model.payload)) {
    j["linear"] = {{"weights", lin->weights}, {"bias", lin->bias},
                   {"objective_log", lin->objective_log}};
  } else if (const auto* mlp = std::get_if<MlpModel>(&model.payload)) {
    j["neural"] = {{"W1", detail_models::matrix_to_json(mlp->params.W1)},
                   {"b1", std::vector<double>(mlp->params.b1.data(),
                                              mlp->params.b1.data() + mlp->params.b1.size())},
                   {"w2", std::vector<double>(mlp->params.w2.data(),
                                              mlp->params.w2.data() + mlp->params.w2.size())},
                   {"b2", mlp->params.b2},
                   {"feature_lo", mlp->feature_scaler.lo},
                   {"feature_hi", mlp->feature_scaler.hi},
                   {"target_lo", mlp->target_scaler.lo},
                   {"target_hi", mlp->target_scaler.hi},
                   {"validation_log", mlp->validation_log},
                   {"best_epoch", mlp->best_epoch}};
  } else if (const auto* gbt = std::get_if<GbtModel>(&model.payload)) {
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& t : gbt->trees) trees.push_back(detail_models::tree_to_json(t));
    j["boosted_trees"] = {{"learning_rate", gbt->learning_rate},
                          {"trees", std::move(trees)},
                          {"val_loss", gbt->log.val_loss},
                          {"fit_loss", gbt->log.fit_loss},
                          {"best_round", gbt->log.best_round}};
  }
  return j;
}

inline TrainedModel model_from_json(const nlohmann::json& j) {
  if (j.at("format").get<std::string>() != "feederlab-model" ||
      j.at("format_version").get<int>() != 1)
    throw std::runtime_error("unsupported model file format");
  TrainedModel model;
  model.kind = parse_model_kind(j.at("kind").get<std::string>());
  model.seed = j.at("seed").get<std::uint64_t>();
  model.config_digest = j.value("config_digest", "");
  model.trained_feeders = j.value("trained_feeders", std::vector<std::int32_t>{});
  if (model.kind == ModelKind::kLinear) {
    const auto& l = j.at("linear");
    LinearModel lin;
    auto w = l.at("weights").get<std::vector<double>>();
    if (w.size() != lin.weights.size()) throw std::runtime_error("bad linear weight count");
    std::copy(w.begin(), w.end(), lin.weights.begin());
    lin.bias = l.at("bias").get<double>();
    lin.objective_log = l.value("objective_log", std::vector<double>{});
    model.payload = std::move(lin);
  } else if (model.kind == ModelKind::kNeural) {
    const auto& n = j.at("neural");
    MlpModel mlp;
    mlp.params.W1 = detail_models::matrix_from_json(n.at("W1"));
    auto b1 = n.at("b1").get<std::vector<double>>();
    auto w2 = n.at("w2").get<std::vector<double>>();
    mlp.params.b1 = Eigen::Map<Eigen::VectorXd>(b1.data(), static_cast<Eigen::Index>(b1.size()));
    mlp.params.w2 = Eigen::Map<Eigen::VectorXd>(w2.data(), static_cast<Eigen::Index>(w2.size()));
    mlp.params.b2 = n.at("b2").get<double>();
    mlp.feature_scaler.lo = n.at("feature_lo").get<std::vector<double>>();
    mlp.feature_scaler.hi = n.at("feature_hi").get<std::vector<double>>();
    mlp.target_scaler.lo = n.at("target_lo").get<std::vector<double>>();
    mlp.target_scaler.hi = n.at("target_hi").get<std::vector<double>>();
    mlp.validation_log = n.value("validation_log", std::vector<double>{});
    mlp.best_epoch = n.value("best_epoch", -1);
    model.payload = std::move(mlp);
  } else {
    const auto& g = j.at("boosted_trees");
    GbtModel gbt;
    gbt.learning_rate = g.at("learning_rate").get<double>();
    for (const auto& tj : g.at("trees")) gbt.trees.push_back(detail_models::tree_from_json(tj));
    gbt.log.val_loss = g.value("val_loss", std::vector<double>{});
    gbt.log.fit_loss = g.value("fit_loss", std::vector<double>{});
    gbt.log.best_round = g.value("best_round", -1);
    model.payload = std::move(gbt);
  }
  return model;
}

inline void save_model(const std::filesystem::path& path, const TrainedModel& model) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << model_to_json(model).dump();
}

inline TrainedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  nlohmann::json j;
  in >> j;
  return model_from_json(j);
}

}  // namespace feederlab
