#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "seedsched/csv.hpp"
#include "seedsched/features.hpp"
#include "seedsched/random_forest.hpp"
#include "seedsched/rls.hpp"

namespace seedsched {

enum class ModelKind : std::uint8_t { kOL, kRF, kEN };

inline const char* to_string(ModelKind k) {
  switch (k) {
    case ModelKind::kOL: return "ol";
    case ModelKind::kRF: return "rf";
    case ModelKind::kEN: return "en";
  }
  return "?";
}

inline ModelKind model_kind_from_string(const std::string& s) {
  if (s == "ol") return ModelKind::kOL;
  if (s == "rf") return ModelKind::kRF;
  if (s == "en") return ModelKind::kEN;
  throw std::invalid_argument("unknown model kind: " + s);
}

struct ModelBundle {
  ModelKind kind = ModelKind::kOL;
  std::optional<OnlineLinearModel> ol;
  std::optional<RandomForestModel> rf;
  std::string training_log_ref;

  void validate() const {
    if (kind == ModelKind::kOL && !ol) throw std::invalid_argument("OL bundle without linear model");
    if (kind == ModelKind::kRF && !rf) throw std::invalid_argument("RF bundle without forest");
    if (kind == ModelKind::kEN && (!ol || !rf))
      throw std::invalid_argument("EN bundle requires both sub-models");
  }
};

struct EnsemblePrediction {
  double value = 0.0;
  bool rf_used = false;  // false: forest unfitted, fell back to the linear model
};

// Arithmetic average of the two utility predictions: the linear model sees
// log-scaled features, the forest raw counts. An unfitted forest falls back
// to the linear prediction alone.
inline EnsemblePrediction ensemble_predict(const OnlineLinearModel& ol,
                                           const RandomForestModel& rf,
                                           const FeatureVector& raw) {
  const double ol_pred = ol.predict(transform_for_linear(raw));
  if (!rf.fitted()) return {ol_pred, false};
  return {(ol_pred + rf.predict(raw.as_vector())) / 2.0, true};
}

// ---------------------------------------------------------------------------
// Persistence: a versioned JSON container with a checksum over the payload.
// Round trips reproduce predictions bit-exactly.

struct ModelIoError : std::runtime_error {
  enum class Kind { kVersionMismatch, kCorrupt };
  Kind kind;
  ModelIoError(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
};

inline constexpr const char* kModelFormat = "seedsched-model";
inline constexpr int kModelVersion = 1;

namespace detail {

inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline nlohmann::json ol_to_json(const OnlineLinearModel& m) {
  std::vector<double> w(m.w.data(), m.w.data() + m.w.size());
  std::vector<std::vector<double>> ci;
  for (int r = 0; r < m.c_inv.rows(); ++r)
    ci.emplace_back(m.c_inv.row(r).begin(), m.c_inv.row(r).end());
  return {{"lambda", m.lambda}, {"t", m.t}, {"w", w}, {"c_inv", ci}};
}

inline OnlineLinearModel ol_from_json(const nlohmann::json& j) {
  OnlineLinearModel m;
  m.lambda = j.at("lambda");
  m.t = j.at("t");
  auto w = j.at("w").get<std::vector<double>>();
  m.w = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
  auto ci = j.at("c_inv").get<std::vector<std::vector<double>>>();
  m.c_inv.resize(static_cast<Eigen::Index>(ci.size()), static_cast<Eigen::Index>(ci.size()));
  for (std::size_t r = 0; r < ci.size(); ++r)
    for (std::size_t c = 0; c < ci[r].size(); ++c)
      m.c_inv(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = ci[r][c];
  return m;
}

inline nlohmann::json rf_to_json(const RandomForestModel& m) {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : m.trees) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& nd : t.nodes)
      nodes.push_back({nd.feature, nd.threshold, nd.left, nd.right, nd.prediction, nd.n_samples,
                       nd.impurity_gain});
    trees.push_back(std::move(nodes));
  }
  return {{"n_trees", m.params.n_trees},
          {"max_depth", m.params.max_depth},
          {"min_samples_leaf", m.params.min_samples_leaf},
          {"features_per_split", m.params.features_per_split},
          {"bootstrap", m.params.bootstrap},
          {"rng_seed", m.rng_seed},
          {"d", m.d},
          {"trees", std::move(trees)}};
}

inline RandomForestModel rf_from_json(const nlohmann::json& j) {
  RandomForestModel m;
  m.params.n_trees = j.at("n_trees");
  m.params.max_depth = j.at("max_depth");
  m.params.min_samples_leaf = j.at("min_samples_leaf");
  m.params.features_per_split = j.at("features_per_split");
  m.params.bootstrap = j.at("bootstrap");
  m.rng_seed = j.at("rng_seed");
  m.d = j.at("d");
  for (const auto& jt : j.at("trees")) {
    RegressionTree t;
    for (const auto& jn : jt) {
      TreeNode nd;
      nd.feature = jn.at(0);
      nd.threshold = jn.at(1);
      nd.left = jn.at(2);
      nd.right = jn.at(3);
      nd.prediction = jn.at(4);
      nd.n_samples = jn.at(5);
      nd.impurity_gain = jn.at(6);
      t.nodes.push_back(nd);
    }
    m.trees.push_back(std::move(t));
  }
  return m;
}

}  // namespace detail

inline void save_model(const ModelBundle& b, const std::filesystem::path& path) {
  b.validate();
  nlohmann::json payload;
  payload["kind"] = to_string(b.kind);
  payload["training_log_ref"] = b.training_log_ref;
  if (b.ol) payload["ol"] = detail::ol_to_json(*b.ol);
  if (b.rf) payload["rf"] = detail::rf_to_json(*b.rf);  // trees may be empty pre-fit

  nlohmann::json file;
  file["format"] = kModelFormat;
  file["version"] = kModelVersion;
  file["payload"] = payload;
  char sum[17];
  std::snprintf(sum, sizeof(sum), "%016llx",
                static_cast<unsigned long long>(detail::fnv1a64(payload.dump())));
  file["checksum"] = sum;

  auto out = open_output(path);
  out << file.dump(2) << '\n';
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

inline ModelBundle load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelIoError(ModelIoError::Kind::kCorrupt,
                              "cannot open model file: " + path.string());
  nlohmann::json file;
  try {
    in >> file;
  } catch (const nlohmann::json::exception& e) {
    throw ModelIoError(ModelIoError::Kind::kCorrupt,
                       "malformed model file " + path.string() + ": " + e.what());
  }
  try {
    if (!file.contains("format") || file.at("format") != kModelFormat)
      throw ModelIoError(ModelIoError::Kind::kCorrupt, "not a model file: " + path.string());
    if (file.at("version").get<int>() != kModelVersion)
      throw ModelIoError(ModelIoError::Kind::kVersionMismatch,
                         "unsupported model file version in " + path.string());
    const auto& payload = file.at("payload");
    char sum[17];
    std::snprintf(sum, sizeof(sum), "%016llx",
                  static_cast<unsigned long long>(detail::fnv1a64(payload.dump())));
    if (file.at("checksum").get<std::string>() != sum)
      throw ModelIoError(ModelIoError::Kind::kCorrupt,
                         "checksum mismatch in " + path.string());

    ModelBundle b;
    b.kind = model_kind_from_string(payload.at("kind"));
    b.training_log_ref = payload.value("training_log_ref", "");
    if (payload.contains("ol")) b.ol = detail::ol_from_json(payload.at("ol"));
    if (payload.contains("rf")) b.rf = detail::rf_from_json(payload.at("rf"));
    b.validate();
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw ModelIoError(ModelIoError::Kind::kCorrupt,
                       "malformed model file " + path.string() + ": " + e.what());
  }
}

}  // namespace seedsched
