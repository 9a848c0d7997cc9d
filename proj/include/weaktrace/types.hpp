#pragma once

#include <complex>
#include <numbers>

#include <Eigen/Dense>

namespace weaktrace {

template <typename Scalar>
using CVector = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1>;

template <typename Scalar>
using CMatrix = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, Eigen::Dynamic>;

using Complex = std::complex<double>;
using VectorXc = CVector<double>;
using MatrixXc = CMatrix<double>;

inline constexpr double kPi = std::numbers::pi;

}  // namespace weaktrace
