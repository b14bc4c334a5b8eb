#pragma once

#include <array>
#include <numbers>
#include <span>
#include <vector>

#include "qbe/operator_core.hpp"
#include "qbe/types.hpp"

namespace qbe {

/// Complete family of mutually orthogonal projectors on one factor space.
struct ProjectorFamily {
  Index space_dim = 0;
  std::vector<CMatrix> projectors;
  std::vector<int> labels;

  std::size_t size() const { return projectors.size(); }

  /// Throws ModelError naming the first violated invariant
  /// ("projector shape", "idempotent", "hermitian", "orthogonal", "complete").
  void validate(double tol = 1e-12) const;

  /// Rank-1 projectors onto the standard basis.
  static ProjectorFamily standard_basis(Index dim);
  /// Rank-1 projectors onto the columns of an orthonormal basis matrix.
  static ProjectorFamily from_basis(const CMatrix& basis);
};

/// coupling * sum_ab coeffs(a,b) * left[a] (x) right[b]
struct SeparableInteraction {
  double coupling = 0;
  RMatrix coeffs;
  ProjectorFamily left;
  ProjectorFamily right;

  void validate(double tol = 1e-12) const;
  Index dim() const { return left.space_dim * right.space_dim; }
};

CMatrix assemble(const SeparableInteraction& interaction);

/// Orthogonal rotation of the bath's standard basis built from Givens
/// rotations in the planes (k, k+1). A single angle is applied to every plane.
RMatrix bath_rotation(Index d_b, std::span<const double> angles);

struct BathFamilies {
  ProjectorFamily qb_side;  // couples to Q: projectors onto the rotated basis
  ProjectorFamily be_side;  // couples to E: standard-basis projectors
};

BathFamilies rotated_bath_families(Index d_b, std::span<const double> angles);
inline BathFamilies rotated_bath_families(Index d_b, double angle) {
  return rotated_bath_families(d_b, std::span<const double>(&angle, 1));
}

struct TripartiteModel {
  std::array<Index, 3> dims{};  // (d_Q, d_B, d_E)
  SeparableInteraction h_qb;    // on Q (x) B
  SeparableInteraction h_be;    // on B (x) E
  double hbar = 1;
  std::vector<double> theta;    // bath basis angles, one or d_B - 1 of them

  Index dim() const { return dims[0] * dims[1] * dims[2]; }
  double c() const { return h_qb.coupling; }
  double C() const { return h_be.coupling; }
  double ratio() const { return h_qb.coupling / h_be.coupling; }

  /// Dimensions, shapes and projector families.
  void validate_structure() const;
  /// Structure plus the strong-coupling axioms: C > 0, finite c/C, hbar > 0.
  void validate() const;
};

/// Builds the model with standard-basis families on Q and E, a standard
/// family on B for the B-E coupling and the rotated family on B for Q-B.
TripartiteModel make_model(const std::array<Index, 3>& dims, double c, const RMatrix& gamma,
                           std::vector<double> theta, double C, const RMatrix& kappa,
                           double hbar = 1);

/// (2,2,2), gamma = [[1,-1],[-1,1]], kappa = [[1,0],[0,-1]].
TripartiteModel canonical_model(double c = 0.01, double C = 1.0,
                                double theta = std::numbers::pi / 4);

/// Copy of `model` with the two couplings replaced.
TripartiteModel with_couplings(const TripartiteModel& model, double c, double C);

CMatrix embedded_h_qb(const TripartiteModel& model);
CMatrix embedded_h_be(const TripartiteModel& model);
CMatrix full_hamiltonian(const TripartiteModel& model);

/// |Psi>_Q (x) |0>_B (x) |chi>_E amplitudes, each list l2-normalized.
struct ProductState {
  CVector q;
  CVector b;
  CVector e;
};

/// Normalizes each list; rejects empty, zero or non-finite lists.
ProductState make_product_state(CVector q, CVector b, CVector e);

/// Uniform superposition on Q and E, bath in pointer state i0.
ProductState robust_product_state(const std::array<Index, 3>& dims, Index i0);

CVector product_state_vector(const ProductState& state, const std::array<Index, 3>& dims);

CVector basis_vector(Index dim, Index k);

}  // namespace qbe
