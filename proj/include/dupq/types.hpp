#pragma once

#include <Eigen/Dense>

#include <chrono>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace dupq {

using QuestionId = std::int64_t;
using Timestamp = std::chrono::sys_seconds;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using VectorXd = Vector<double>;
using MatrixXd = Matrix<double>;

/// Input data that cannot be interpreted (dump rows, archive lines, store files).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid or inconsistent configuration (dimensions, hyperparameters, keys).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class FeatureMode { kText, kTextNetwork };

std::string to_string(FeatureMode mode);
FeatureMode parse_feature_mode(const std::string& text);

}  // namespace dupq
