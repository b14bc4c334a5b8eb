#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace qbe {

/// Dense complex operator on a small Hilbert space.
template <typename Scalar>
using Operator = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, Eigen::Dynamic>;

/// Column ket.
template <typename Scalar>
using Ket = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1>;

template <typename Scalar>
using RealVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using RealMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

// Double-precision aliases used by the model and analysis layers.
using Real = double;
using Complex = std::complex<double>;
using CMatrix = Operator<double>;
using CVector = Ket<double>;
using RVector = RealVector<double>;
using RMatrix = RealMatrix<double>;
using Index = Eigen::Index;

/// Tensor factors in their fixed composite order.
enum class Factor { Q = 0, B = 1, E = 2 };

inline const char* factor_name(Factor f) {
  switch (f) {
    case Factor::Q: return "Q";
    case Factor::B: return "B";
    case Factor::E: return "E";
  }
  return "?";
}

// Error hierarchy. Each maps onto one failure class of the CLI exit codes.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ShapeError : Error {
  using Error::Error;
};
struct CapacityError : Error {
  using Error::Error;
};
struct ContractError : Error {
  using Error::Error;
};
struct NumericError : Error {
  using Error::Error;
};
struct ModelError : Error {
  using Error::Error;
};
struct ParseError : Error {
  using Error::Error;
};
struct DegeneracyError : NumericError {
  using NumericError::NumericError;
};
struct SingularBoundError : NumericError {
  using NumericError::NumericError;
};
struct UndefinedAmplitudeError : NumericError {
  using NumericError::NumericError;
};
struct InsufficientSweepError : Error {
  using Error::Error;
};

}  // namespace qbe
