#pragma once

#include <Eigen/Dense>

#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace graphsolver {

using Complex = std::complex<double>;

template <typename Scalar>
using Vec3T = Eigen::Matrix<Scalar, 3, 1>;

using Vec3 = Vec3T<double>;
using CVec3 = Vec3T<Complex>;

template <typename Scalar>
using RowMatrixT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using RowMatrix = RowMatrixT<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

namespace constants {
inline constexpr double c0 = 299792458.0;
inline constexpr double mu0 = 4.0e-7 * std::numbers::pi;
inline constexpr double eps0 = 1.0 / (mu0 * c0 * c0);
// sqrt(mu0 / eps0) == mu0 * c0
inline constexpr double z0 = mu0 * c0;
inline constexpr double pi = std::numbers::pi;
}  // namespace constants

/// Plain a x b. Eigen's member cross() returns the conjugate for complex operands.
template <typename Scalar>
Vec3T<Scalar> cross(const Vec3T<Scalar>& a, const Vec3T<Scalar>& b) {
  return {a.y() * b.z() - a.z() * b.y(), a.z() * b.x() - a.x() * b.z(), a.x() * b.y() - a.y() * b.x()};
}

inline double wavelength(double frequency) { return constants::c0 / frequency; }
inline double wavenumber(double frequency) { return 2.0 * constants::pi * frequency / constants::c0; }

/// Raised for violated preconditions on user-provided inputs.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a numerical stage cannot produce a trustworthy result.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised on malformed files or byte streams.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace graphsolver
