#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace uplift {

template <class Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <class Scalar>
using RowVectorX = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;
using RowVector = RowVectorX<double>;
using IntVector = VectorX<int>;
using IntMatrix = MatrixX<int>;
using Index = Eigen::Index;

// Error taxonomy. The CLI maps these onto exit codes:
// config 2, data/schema/shape 3, numeric 4.
class config_error : public std::runtime_error {
 public:
  explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

class data_error : public std::runtime_error {
 public:
  explicit data_error(const std::string& what) : std::runtime_error(what) {}
};

class schema_error : public data_error {
 public:
  explicit schema_error(const std::string& what) : data_error(what) {}
};

class shape_error : public data_error {
 public:
  explicit shape_error(const std::string& what) : data_error(what) {}
};

class numeric_error : public std::runtime_error {
 public:
  explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace uplift
