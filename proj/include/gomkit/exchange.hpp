#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gomkit/error.hpp"
#include "gomkit/gom.hpp"
#include "gomkit/kf_trainer.hpp"
#include "gomkit/topology.hpp"

namespace gomkit {

inline constexpr const char* kExchangeFormat = "gomkit-coefficients";
inline constexpr int kExchangeVersion = 1;

/// A trained system as stored in the coefficient-exchange file.
struct CoefficientModel {
  SkeletonTopology topology;
  std::string method = "kf"; // "kf" or "imported"
  std::string class_label;
  double frame_rate_hz = kDefaultFrameRateHz;
  std::vector<TrainedEquation> equations; // channel order

  GomSystem system() const {
    GomSystem sys{topology, {}};
    for (const auto& e : equations) sys.equations.push_back(e.equation);
    return sys;
  }

  std::vector<CoefficientTrajectory> trajectories() const {
    std::vector<CoefficientTrajectory> out;
    out.reserve(equations.size());
    for (const auto& e : equations) out.push_back(e.trajectory);
    return out;
  }
};

namespace detail {

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& rows, Eigen::Index cols, const std::string& what) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw ValidationError(what + ": row " + std::to_string(i) + " has the wrong width");
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (!row[j].is_number()) throw ValidationError(what + ": non-numeric entry");
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j].get<double>();
    }
  }
  return m;
}

} // namespace detail

inline nlohmann::json to_json(const CoefficientModel& model) {
  nlohmann::json j;
  j["format"] = kExchangeFormat;
  j["version"] = kExchangeVersion;
  j["method"] = model.method;
  j["class_label"] = model.class_label;
  j["frame_rate_hz"] = model.frame_rate_hz;
  j["topology"] = model.topology.to_json();
  j["channels"] = model.topology.channel_names();
  j["equations"] = nlohmann::json::array();
  for (const auto& te : model.equations) {
    nlohmann::json e;
    e["target"] = model.topology.channel_name(te.equation.target);
    e["regressors"] = nlohmann::json::array();
    for (const auto& r : te.equation.regressors)
      e["regressors"].push_back(
          {{"channel", model.topology.channel_name(r.channel)}, {"assumption", std::string(assumption_tag(r.assumption))}});
    std::vector<double> q(te.theta.q.data(), te.theta.q.data() + te.theta.q.size());
    e["theta"] = {{"q", q}, {"r", te.theta.r}};
    e["loglik"] = te.loglik;
    e["coefficients"] = detail::matrix_to_json(te.trajectory.mean);
    e["variances"] = detail::matrix_to_json(te.trajectory.variance);
    j["equations"].push_back(std::move(e));
  }
  return j;
}

/// Parses and validates an exchange document: version, channel order, and
/// that every equation's regressors match the structure built from the topology.
inline CoefficientModel coefficient_model_from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", std::string{}) != kExchangeFormat)
      throw ValidationError("not a coefficient-exchange document");
    if (!j.contains("version")) throw ValidationError("coefficient file has no version field");
    const int version = j.at("version").get<int>();
    if (version != kExchangeVersion)
      throw ValidationError("unsupported coefficient file version " + std::to_string(version) + " (expected " +
                            std::to_string(kExchangeVersion) + ")");
    CoefficientModel model;
    model.topology = SkeletonTopology::from_json(j.at("topology"));
    model.method = j.value("method", std::string("imported"));
    model.class_label = j.value("class_label", std::string{});
    model.frame_rate_hz = j.value("frame_rate_hz", kDefaultFrameRateHz);
    if (j.at("channels").get<std::vector<std::string>>() != model.topology.channel_names())
      throw ValidationError("channel order does not match the topology");
    const auto& eqs = j.at("equations");
    if (eqs.size() != model.topology.channel_count())
      throw ValidationError("expected one equation per channel");
    std::optional<Eigen::Index> steps;
    for (std::size_t i = 0; i < eqs.size(); ++i) {
      const auto& e = eqs[i];
      const auto target = model.topology.channel_index(e.at("target").get<std::string>());
      if (target != i) throw ValidationError("equations must be stored in channel order");
      const auto expected = build_equation(model.topology, target);
      GomEquation eq;
      eq.target = target;
      for (const auto& r : e.at("regressors"))
        eq.regressors.push_back({model.topology.channel_index(r.at("channel").get<std::string>()),
                                 parse_assumption_tag(r.at("assumption").get<std::string>())});
      if (!(eq == expected))
        throw ValidationError("regressor support of " + model.topology.channel_name(target) +
                              " differs from the topology's assumption sets");
      TrainedEquation te;
      te.equation = eq;
      const auto m = static_cast<Eigen::Index>(eq.coefficient_count());
      te.trajectory.target = target;
      te.trajectory.mean = detail::matrix_from_json(e.at("coefficients"), m, "coefficients");
      te.trajectory.variance = e.contains("variances")
                                   ? detail::matrix_from_json(e.at("variances"), m, "variances")
                                   : Eigen::MatrixXd::Zero(te.trajectory.mean.rows(), m);
      te.trajectory.validate();
      if (te.trajectory.steps() == 0) throw ValidationError("empty coefficient trajectory");
      if (steps && *steps != te.trajectory.mean.rows())
        throw ValidationError("equations have different trajectory lengths");
      steps = te.trajectory.mean.rows();
      if (e.contains("theta")) {
        const auto q = e.at("theta").at("q").get<std::vector<double>>();
        te.theta.q = Eigen::Map<const Eigen::VectorXd>(q.data(), static_cast<Eigen::Index>(q.size()));
        te.theta.r = e.at("theta").at("r").get<double>();
      }
      te.loglik = e.value("loglik", 0.0);
      model.equations.push_back(std::move(te));
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed coefficient file: ") + e.what());
  }
}

inline void save_coefficients(const std::filesystem::path& path, const CoefficientModel& model) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << to_json(model).dump() << '\n';
}

inline CoefficientModel load_coefficients(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open coefficient file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return coefficient_model_from_json(j);
}

} // namespace gomkit
