#pragma once

// Dense complex linear algebra for small composite Hilbert spaces.
//
// Everything here is header-only and templated on the real scalar so the
// same kernels run in double (the default everywhere else) and long double
// (used by the tests as a higher-precision cross-check).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "qbe/types.hpp"

namespace qbe {

inline constexpr Index kDefaultMaxDimension = 4096;

/// Largest composite dimension any constructor will build. Honors QBE_MAX_DIM.
inline Index dimension_cap() {
  if (const char* env = std::getenv("QBE_MAX_DIM")) {
    char* end = nullptr;
    const long long v = std::strtoll(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<Index>(v);
  }
  return kDefaultMaxDimension;
}

template <typename Derived>
typename Derived::RealScalar max_abs(const Eigen::MatrixBase<Derived>& m) {
  using R = typename Derived::RealScalar;
  if (m.size() == 0) return R(0);
  return m.cwiseAbs().maxCoeff();
}

/// max |A - A^dagger| elementwise.
template <typename Derived>
typename Derived::RealScalar hermiticity_defect(const Eigen::MatrixBase<Derived>& m) {
  if (m.rows() != m.cols()) throw ShapeError("hermiticity_defect: matrix is not square");
  return max_abs(m - m.adjoint());
}

/// Absolute tolerance scaled by the operator magnitude once that exceeds 1.
template <typename Derived>
bool is_hermitian(const Eigen::MatrixBase<Derived>& m, typename Derived::RealScalar tol = 1e-12) {
  using R = typename Derived::RealScalar;
  if (m.rows() != m.cols()) return false;
  return hermiticity_defect(m) <= tol * std::max(R(1), max_abs(m));
}

/// max |U^dagger U - I|.
template <typename Derived>
typename Derived::RealScalar unitarity_defect(const Eigen::MatrixBase<Derived>& u) {
  using C = typename Derived::Scalar;
  using M = Eigen::Matrix<C, Eigen::Dynamic, Eigen::Dynamic>;
  const M gram = u.adjoint() * u;
  return max_abs(gram - M::Identity(u.cols(), u.cols()));
}

inline void check_capacity(Index dim, Index cap, const char* what) {
  if (dim > cap) {
    throw CapacityError(std::string(what) + ": dimension " + std::to_string(dim) +
                        " exceeds the configured maximum " + std::to_string(cap));
  }
}

/// Kronecker product with entry[(i1*db+i2),(j1*db+j2)] = a[i1,j1]*b[i2,j2].
template <typename DerivedA, typename DerivedB>
Eigen::Matrix<typename DerivedA::Scalar, Eigen::Dynamic, Eigen::Dynamic> kron(
    const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b,
    Index cap = dimension_cap()) {
  using Result = Eigen::Matrix<typename DerivedA::Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Index rows = a.rows() * b.rows();
  const Index cols = a.cols() * b.cols();
  check_capacity(std::max(rows, cols), cap, "kron");
  Result out(rows, cols);
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

namespace detail {

inline Index product(std::span<const Index> dims) {
  return std::accumulate(dims.begin(), dims.end(), Index{1}, std::multiplies<>());
}

// Row-major strides of a factor layout: stride[k] = prod(dims[k+1..]).
inline std::vector<Index> strides(std::span<const Index> dims) {
  std::vector<Index> s(dims.size(), 1);
  for (std::size_t k = dims.size(); k-- > 1;) s[k - 1] = s[k] * dims[k];
  return s;
}

inline std::vector<bool> slot_mask(std::span<const std::size_t> slots, std::size_t nfactors,
                                   const char* what) {
  std::vector<bool> mask(nfactors, false);
  for (std::size_t s : slots) {
    if (s >= nfactors) throw ShapeError(std::string(what) + ": slot index out of range");
    if (mask[s]) throw ShapeError(std::string(what) + ": repeated slot");
    mask[s] = true;
  }
  return mask;
}

// Splits a composite index into (masked-subsystem index, complement index),
// each in row-major order over its own factors.
struct Splitter {
  std::vector<Index> dims;
  std::vector<bool> mask;
  std::vector<Index> full_strides;

  Splitter(std::span<const Index> d, std::vector<bool> m)
      : dims(d.begin(), d.end()), mask(std::move(m)), full_strides(strides(d)) {}

  // Composite index from a kept index and a complement index.
  Index join(Index kept, Index rest) const {
    Index full = 0;
    for (std::size_t k = dims.size(); k-- > 0;) {
      Index digit;
      if (mask[k]) {
        digit = kept % dims[k];
        kept /= dims[k];
      } else {
        digit = rest % dims[k];
        rest /= dims[k];
      }
      full += digit * full_strides[k];
    }
    return full;
  }
};

inline std::vector<std::size_t> to_slots(std::initializer_list<Factor> factors) {
  std::vector<std::size_t> slots;
  for (Factor f : factors) slots.push_back(static_cast<std::size_t>(f));
  std::sort(slots.begin(), slots.end());
  return slots;
}

}  // namespace detail

/// Lift `op` (acting on the factors listed in `slots`, in ascending factor
/// order) to the full product space, acting as identity on the other factors.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> embed(
    const Eigen::MatrixBase<Derived>& op, std::span<const std::size_t> slots,
    std::span<const Index> dims, Index cap = dimension_cap()) {
  using Result = Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (op.rows() != op.cols()) throw ShapeError("embed: operator is not square");
  for (Index d : dims) {
    if (d <= 0) throw ShapeError("embed: factor dimensions must be positive");
  }
  auto mask = detail::slot_mask(slots, dims.size(), "embed");
  Index masked = 1;
  for (std::size_t k = 0; k < dims.size(); ++k) {
    if (mask[k]) masked *= dims[k];
  }
  if (masked != op.rows()) {
    throw ShapeError("embed: operator dimension " + std::to_string(op.rows()) +
                     " does not match the product of masked factor dimensions " +
                     std::to_string(masked));
  }
  const Index total = detail::product(dims);
  check_capacity(total, cap, "embed");
  const Index rest = total / masked;
  detail::Splitter split(dims, std::move(mask));
  Result out = Result::Zero(total, total);
  for (Index r = 0; r < rest; ++r) {
    for (Index a = 0; a < masked; ++a) {
      const Index row = split.join(a, r);
      for (Index b = 0; b < masked; ++b) out(row, split.join(b, r)) = op(a, b);
    }
  }
  return out;
}

template <typename Derived>
auto embed(const Eigen::MatrixBase<Derived>& op, std::initializer_list<Factor> factors,
           const std::array<Index, 3>& dims, Index cap = dimension_cap()) {
  const auto slots = detail::to_slots(factors);
  return embed(op, std::span<const std::size_t>(slots), std::span<const Index>(dims), cap);
}

/// Reduced operator on the factors in `keep`; the complement is traced out.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> partial_trace(
    const Eigen::MatrixBase<Derived>& rho, std::span<const std::size_t> keep,
    std::span<const Index> dims) {
  using Result = Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (rho.rows() != rho.cols()) throw ShapeError("partial_trace: operator is not square");
  const Index total = detail::product(dims);
  if (total != rho.rows()) {
    throw ShapeError("partial_trace: operator dimension " + std::to_string(rho.rows()) +
                     " does not match factor dimensions (product " + std::to_string(total) +
                     ")");
  }
  auto mask = detail::slot_mask(keep, dims.size(), "partial_trace");
  Index kept = 1;
  for (std::size_t k = 0; k < dims.size(); ++k) {
    if (mask[k]) kept *= dims[k];
  }
  const Index rest = total / kept;
  detail::Splitter split(dims, std::move(mask));
  Result out = Result::Zero(kept, kept);
  for (Index a = 0; a < kept; ++a) {
    for (Index b = 0; b < kept; ++b) {
      typename Derived::Scalar acc(0);
      for (Index r = 0; r < rest; ++r) acc += rho(split.join(a, r), split.join(b, r));
      out(a, b) = acc;
    }
  }
  return out;
}

template <typename Derived>
auto partial_trace(const Eigen::MatrixBase<Derived>& rho, std::initializer_list<Factor> keep,
                   const std::array<Index, 3>& dims) {
  const auto slots = detail::to_slots(keep);
  return partial_trace(rho, std::span<const std::size_t>(slots), std::span<const Index>(dims));
}

/// Reduced density operator of a pure state, |psi><psi| traced over the complement of `keep`.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> reduced_density(
    const Eigen::MatrixBase<Derived>& psi, std::span<const std::size_t> keep,
    std::span<const Index> dims) {
  using C = typename Derived::Scalar;
  using M = Eigen::Matrix<C, Eigen::Dynamic, Eigen::Dynamic>;
  const Index total = detail::product(dims);
  if (psi.cols() != 1 || psi.rows() != total) {
    throw ShapeError("reduced_density: state length does not match factor dimensions");
  }
  auto mask = detail::slot_mask(keep, dims.size(), "reduced_density");
  Index kept = 1;
  for (std::size_t k = 0; k < dims.size(); ++k) {
    if (mask[k]) kept *= dims[k];
  }
  const Index rest = total / kept;
  detail::Splitter split(dims, std::move(mask));
  M amps(kept, rest);
  for (Index a = 0; a < kept; ++a) {
    for (Index r = 0; r < rest; ++r) amps(a, r) = psi(split.join(a, r));
  }
  return amps * amps.adjoint();
}

template <typename Scalar>
struct EigenDecomposition {
  RealVector<Scalar> eigenvalues;  // ascending
  Operator<Scalar> eigenvectors;   // column k pairs with eigenvalues(k)
  int sweeps = 0;
};

struct EigOptions {
  int max_sweeps = 100;
  double hermitian_tol = 1e-12;
};

/// Cyclic Jacobi eigensolver for Hermitian matrices.
///
/// Rotations are applied in fixed row-major (p < q) order, so the output is
/// reproducible bit-for-bit on a given platform. Each rotation first removes
/// the phase of A(p,q) with a diagonal unitary and then applies the real
/// symmetric Jacobi rotation.
template <typename Derived>
EigenDecomposition<typename Derived::RealScalar> hermitian_eig(
    const Eigen::MatrixBase<Derived>& h, const EigOptions& opts = {}) {
  using R = typename Derived::RealScalar;
  using C = std::complex<R>;
  using M = Operator<R>;

  if (h.rows() != h.cols()) throw ShapeError("hermitian_eig: matrix is not square");
  const Index n = h.rows();
  if (!is_hermitian(h, static_cast<R>(opts.hermitian_tol))) {
    throw ContractError("hermitian_eig: input is not Hermitian (max |A - A^dagger| = " +
                        std::to_string(static_cast<double>(hermiticity_defect(h))) + ")");
  }

  M a = (h + h.adjoint()) / R(2);
  M v = M::Identity(n, n);
  const R eps = std::numeric_limits<R>::epsilon();
  const R frob = a.norm();

  auto off_norm = [&] {
    R acc(0);
    for (Index q = 1; q < n; ++q) {
      for (Index p = 0; p < q; ++p) acc += std::norm(a(p, q));
    }
    return std::sqrt(acc);
  };

  int sweep = 0;
  for (;; ++sweep) {
    const R off = off_norm();
    if (off == R(0) || off <= eps * frob) break;
    if (sweep == opts.max_sweeps) {
      throw NumericError("hermitian_eig: no convergence within the iteration cap of " +
                         std::to_string(opts.max_sweeps) + " sweeps");
    }
    for (Index p = 0; p < n - 1; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        const C b = a(p, q);
        const R ab = std::abs(b);
        if (ab == R(0)) continue;
        const R app = a(p, p).real();
        const R aqq = a(q, q).real();
        if (sweep > 3 && R(100) * ab + std::abs(app) == std::abs(app) &&
            R(100) * ab + std::abs(aqq) == std::abs(aqq)) {
          a(p, q) = a(q, p) = C(0);
          continue;
        }
        const R theta = (aqq - app) / (R(2) * ab);
        R t;
        if (std::abs(theta) > R(1) / eps) {
          t = R(1) / (R(2) * theta);
        } else {
          t = R(1) / (std::abs(theta) + std::sqrt(theta * theta + R(1)));
          if (theta < R(0)) t = -t;
        }
        const R c = R(1) / std::sqrt(t * t + R(1));
        const R s = t * c;
        const C phase = std::conj(b / ab);
        const C gpp = c, gpq = s, gqp = -s * phase, gqq = c * phase;

        for (Index k = 0; k < n; ++k) {
          const C akp = a(k, p), akq = a(k, q);
          a(k, p) = akp * gpp + akq * gqp;
          a(k, q) = akp * gpq + akq * gqq;
        }
        for (Index k = 0; k < n; ++k) {
          const C apk = a(p, k), aqk = a(q, k);
          a(p, k) = std::conj(gpp) * apk + std::conj(gqp) * aqk;
          a(q, k) = std::conj(gpq) * apk + std::conj(gqq) * aqk;
        }
        a(p, p) = C(app - t * ab);
        a(q, q) = C(aqq + t * ab);
        a(p, q) = a(q, p) = C(0);
        for (Index k = 0; k < n; ++k) {
          const C vkp = v(k, p), vkq = v(k, q);
          v(k, p) = vkp * gpp + vkq * gqp;
          v(k, q) = vkp * gpq + vkq * gqq;
        }
      }
    }
  }

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index x, Index y) { return a(x, x).real() < a(y, y).real(); });

  EigenDecomposition<R> out;
  out.eigenvalues.resize(n);
  out.eigenvectors.resize(n, n);
  for (Index k = 0; k < n; ++k) {
    out.eigenvalues(k) = a(order[k], order[k]).real();
    out.eigenvectors.col(k) = v.col(order[k]);
  }
  out.sweeps = sweep;
  return out;
}

/// V diag(eigenvalues) V^dagger.
template <typename Scalar>
Operator<Scalar> reconstruct(const EigenDecomposition<Scalar>& eig) {
  return eig.eigenvectors * eig.eigenvalues.template cast<std::complex<Scalar>>().asDiagonal() *
         eig.eigenvectors.adjoint();
}

/// exp(-i H t / hbar) from an existing eigendecomposition of H.
template <typename Scalar>
Operator<Scalar> propagator(const EigenDecomposition<Scalar>& eig, Scalar t, Scalar hbar = 1) {
  using C = std::complex<Scalar>;
  const Index n = eig.eigenvalues.size();
  Ket<Scalar> phases(n);
  for (Index k = 0; k < n; ++k) phases(k) = std::exp(C(0, -eig.eigenvalues(k) * t / hbar));
  return eig.eigenvectors * phases.asDiagonal() * eig.eigenvectors.adjoint();
}

template <typename Derived>
Operator<typename Derived::RealScalar> propagator(const Eigen::MatrixBase<Derived>& h,
                                                   typename Derived::RealScalar t,
                                                   typename Derived::RealScalar hbar = 1) {
  return propagator(hermitian_eig(h), t, hbar);
}

}  // namespace qbe
