#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "hxkit/error.hpp"

namespace hxkit::detail {

// Row-major nested arrays.
inline nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Eigen::MatrixXd json_matrix(const nlohmann::json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (static_cast<Eigen::Index>(j[static_cast<std::size_t>(i)].size()) != cols) {
      throw Error(Errc::InvalidArgument, "ragged matrix in JSON");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(i, c) = j[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)].get<double>();
    }
  }
  return m;
}

inline Eigen::VectorXd json_vector(const nlohmann::json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

inline nlohmann::json vector_json(const Eigen::VectorXd& v) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

}  // namespace hxkit::detail
