#pragma once

// JSON model files.
//
//   {
//     "schema_version": 1,
//     "n_states": 3, "n_controls": 2, "n_observations": 3,
//     "state_labels": ["A", "B", "C"],          // optional
//     "control_labels": ["a1", "a2"],           // optional
//     "transitions": [ <n x n matrix per control> ],
//     "observation_dist": <n x M matrix, row i = nu(i)>,
//     "rewards": [r(0), ..., r(n-1)]
//   }
//
// Matrices are arrays of rows. Loading checks shape only; stochasticity is
// left to validate_model so that defects are reported, not rejected.

#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "pglab/pomdp.hpp"

namespace pglab {

inline constexpr int kModelSchemaVersion = 1;

namespace detail {

inline Vector json_vector(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array()) throw ConfigError(what + ": expected an array");
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError(what + ": expected numbers");
    v[static_cast<Index>(i)] = j[i].get<double>();
  }
  return v;
}

inline Matrix json_matrix(const nlohmann::json& j, Index rows, Index cols, const std::string& what) {
  if (!j.is_array() || static_cast<Index>(j.size()) != rows) {
    throw ConfigError(what + ": expected " + std::to_string(rows) + " rows");
  }
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    const Vector row = json_vector(j[static_cast<std::size_t>(r)], what);
    if (row.size() != cols) throw ConfigError(what + ": row " + std::to_string(r) + " should have " + std::to_string(cols) + " entries");
    m.row(r) = row.transpose();
  }
  return m;
}

inline nlohmann::json matrix_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  try {
    return nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace detail

inline PomdpModel model_from_json(const nlohmann::json& j) {
  try {
    const int version = j.value("schema_version", 0);
    if (version != kModelSchemaVersion) {
      throw ConfigError("model: unsupported schema_version " + std::to_string(version));
    }
    PomdpModel m;
    m.n_states = j.at("n_states").get<Index>();
    m.n_controls = j.at("n_controls").get<Index>();
    m.n_observations = j.at("n_observations").get<Index>();
    if (m.n_states < 1 || m.n_controls < 1 || m.n_observations < 1) {
      throw ConfigError("model: dimensions must be positive");
    }
    const auto& tr = j.at("transitions");
    if (!tr.is_array() || static_cast<Index>(tr.size()) != m.n_controls) {
      throw ConfigError("model: transitions must hold one matrix per control");
    }
    for (std::size_t u = 0; u < tr.size(); ++u) {
      m.transitions.push_back(
          detail::json_matrix(tr[u], m.n_states, m.n_states, "transitions[" + std::to_string(u) + "]"));
    }
    m.observation_dist = detail::json_matrix(j.at("observation_dist"), m.n_states, m.n_observations, "observation_dist");
    m.rewards = detail::json_vector(j.at("rewards"), "rewards");
    if (m.rewards.size() != m.n_states) throw ConfigError("model: rewards must have n_states entries");
    if (j.contains("state_labels")) m.state_labels = j["state_labels"].get<std::vector<std::string>>();
    if (j.contains("control_labels")) m.control_labels = j["control_labels"].get<std::vector<std::string>>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
}

inline nlohmann::json model_to_json(const PomdpModel& m) {
  nlohmann::json j;
  j["schema_version"] = kModelSchemaVersion;
  j["n_states"] = m.n_states;
  j["n_controls"] = m.n_controls;
  j["n_observations"] = m.n_observations;
  if (!m.state_labels.empty()) j["state_labels"] = m.state_labels;
  if (!m.control_labels.empty()) j["control_labels"] = m.control_labels;
  nlohmann::json tr = nlohmann::json::array();
  for (const auto& p : m.transitions) tr.push_back(detail::matrix_json(p));
  j["transitions"] = std::move(tr);
  j["observation_dist"] = detail::matrix_json(m.observation_dist);
  j["rewards"] = std::vector<double>(m.rewards.data(), m.rewards.data() + m.rewards.size());
  return j;
}

inline PomdpModel load_model(const std::string& path) {
  const auto j = detail::read_json_file(path);
  try {
    return model_from_json(j);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace pglab
