#include "qbe/model.hpp"

#include <cmath>
#include <string>

namespace qbe {

namespace {

std::string shape_str(Index r, Index c) {
  return "(" + std::to_string(r) + ", " + std::to_string(c) + ")";
}

}  // namespace

void ProjectorFamily::validate(double tol) const {
  if (space_dim <= 0) throw ModelError("projector family: space dimension must be positive");
  if (projectors.empty()) throw ModelError("projector family: empty family");
  if (labels.size() != projectors.size()) {
    throw ModelError("projector family: labels do not match projector count");
  }
  const CMatrix id = CMatrix::Identity(space_dim, space_dim);
  CMatrix sum = CMatrix::Zero(space_dim, space_dim);
  for (std::size_t a = 0; a < projectors.size(); ++a) {
    const CMatrix& p = projectors[a];
    const std::string which = "projector " + std::to_string(a);
    if (p.rows() != space_dim || p.cols() != space_dim) {
      throw ModelError("projector family: projector shape violated by " + which);
    }
    if (hermiticity_defect(p) > tol) {
      throw ModelError("projector family: hermitian invariant violated by " + which);
    }
    if (max_abs(p * p - p) > tol) {
      throw ModelError("projector family: idempotent invariant violated by " + which);
    }
    for (std::size_t b = 0; b < a; ++b) {
      if (max_abs(p * projectors[b]) > tol) {
        throw ModelError("projector family: orthogonal invariant violated by projectors " +
                         std::to_string(b) + " and " + std::to_string(a));
      }
    }
    sum += p;
  }
  if (max_abs(sum - id) > tol) {
    throw ModelError("projector family: complete invariant violated (sum differs from identity)");
  }
}

ProjectorFamily ProjectorFamily::standard_basis(Index dim) {
  return from_basis(CMatrix::Identity(dim, dim));
}

ProjectorFamily ProjectorFamily::from_basis(const CMatrix& basis) {
  ProjectorFamily f;
  f.space_dim = basis.rows();
  for (Index k = 0; k < basis.cols(); ++k) {
    f.projectors.push_back(basis.col(k) * basis.col(k).adjoint());
    f.labels.push_back(static_cast<int>(k));
  }
  return f;
}

void SeparableInteraction::validate(double tol) const {
  left.validate(tol);
  right.validate(tol);
  if (coeffs.rows() != static_cast<Index>(left.size()) ||
      coeffs.cols() != static_cast<Index>(right.size())) {
    throw ModelError("coeffs shape " + shape_str(coeffs.rows(), coeffs.cols()) +
                     " does not match projector families " +
                     shape_str(static_cast<Index>(left.size()), static_cast<Index>(right.size())));
  }
  if (!std::isfinite(coupling) || !coeffs.allFinite()) {
    throw ModelError("coupling and coeffs must be finite");
  }
}

CMatrix assemble(const SeparableInteraction& interaction) {
  interaction.validate();
  const Index n = interaction.dim();
  check_capacity(n, dimension_cap(), "assemble");
  CMatrix h = CMatrix::Zero(n, n);
  for (std::size_t a = 0; a < interaction.left.size(); ++a) {
    for (std::size_t b = 0; b < interaction.right.size(); ++b) {
      const double w = interaction.coupling *
                       interaction.coeffs(static_cast<Index>(a), static_cast<Index>(b));
      if (w == 0.0) continue;
      h += Complex(w) * kron(interaction.left.projectors[a], interaction.right.projectors[b]);
    }
  }
  return h;
}

RMatrix bath_rotation(Index d_b, std::span<const double> angles) {
  if (d_b <= 0) throw ModelError("bath dimension must be positive");
  for (double a : angles) {
    if (!std::isfinite(a)) throw ModelError("theta: bath rotation angle must be finite");
  }
  const Index planes = d_b - 1;
  if (planes > 0 && angles.size() != 1 && angles.size() != static_cast<std::size_t>(planes)) {
    throw ModelError("theta: expected 1 or " + std::to_string(planes) + " angles, got " +
                     std::to_string(angles.size()));
  }
  RMatrix u = RMatrix::Identity(d_b, d_b);
  for (Index k = 0; k < planes; ++k) {
    const double th = angles.size() == 1 ? angles[0] : angles[static_cast<std::size_t>(k)];
    RMatrix g = RMatrix::Identity(d_b, d_b);
    g(k, k) = std::cos(th);
    g(k, k + 1) = -std::sin(th);
    g(k + 1, k) = std::sin(th);
    g(k + 1, k + 1) = std::cos(th);
    u = u * g;
  }
  return u;
}

BathFamilies rotated_bath_families(Index d_b, std::span<const double> angles) {
  const RMatrix u = bath_rotation(d_b, angles);
  return {ProjectorFamily::from_basis(u.cast<Complex>()), ProjectorFamily::standard_basis(d_b)};
}

void TripartiteModel::validate_structure() const {
  for (Index d : dims) {
    if (d <= 0) throw ModelError("dims: factor dimensions must be positive");
  }
  check_capacity(dim(), dimension_cap(), "model");
  if (h_qb.left.space_dim != dims[0] || h_qb.right.space_dim != dims[1]) {
    throw ModelError("h_qb must act on Q (x) B");
  }
  if (h_be.left.space_dim != dims[1] || h_be.right.space_dim != dims[2]) {
    throw ModelError("h_be must act on B (x) E");
  }
  h_qb.validate();
  h_be.validate();
}

void TripartiteModel::validate() const {
  validate_structure();
  if (!(h_be.coupling > 0)) throw ModelError("h_be coupling C must be positive");
  if (!std::isfinite(ratio())) throw ModelError("coupling ratio c/C must be finite");
  if (!(hbar > 0) || !std::isfinite(hbar)) throw ModelError("hbar must be positive and finite");
}

TripartiteModel make_model(const std::array<Index, 3>& dims, double c, const RMatrix& gamma,
                           std::vector<double> theta, double C, const RMatrix& kappa,
                           double hbar) {
  for (Index d : dims) {
    if (d <= 0) throw ModelError("dims: factor dimensions must be positive");
  }
  TripartiteModel m;
  m.dims = dims;
  m.hbar = hbar;
  m.theta = std::move(theta);
  auto bath = rotated_bath_families(dims[1], m.theta);
  m.h_qb = {c, gamma, ProjectorFamily::standard_basis(dims[0]), std::move(bath.qb_side)};
  m.h_be = {C, kappa, std::move(bath.be_side), ProjectorFamily::standard_basis(dims[2])};
  m.validate_structure();
  return m;
}

TripartiteModel canonical_model(double c, double C, double theta) {
  RMatrix gamma(2, 2), kappa(2, 2);
  gamma << 1, -1, -1, 1;
  kappa << 1, 0, 0, -1;
  return make_model({2, 2, 2}, c, gamma, {theta}, C, kappa, 1.0);
}

TripartiteModel with_couplings(const TripartiteModel& model, double c, double C) {
  TripartiteModel m = model;
  m.h_qb.coupling = c;
  m.h_be.coupling = C;
  return m;
}

CMatrix embedded_h_qb(const TripartiteModel& model) {
  return embed(assemble(model.h_qb), {Factor::Q, Factor::B}, model.dims);
}

CMatrix embedded_h_be(const TripartiteModel& model) {
  return embed(assemble(model.h_be), {Factor::B, Factor::E}, model.dims);
}

CMatrix full_hamiltonian(const TripartiteModel& model) {
  model.validate_structure();
  return embedded_h_qb(model) + embedded_h_be(model);
}

namespace {

CVector normalized(CVector v, const char* which) {
  if (v.size() == 0) throw ShapeError(std::string(which) + ": empty amplitude list");
  if (!v.allFinite()) throw ModelError(std::string(which) + ": amplitudes must be finite");
  const double n2 = v.squaredNorm();
  if (!(n2 > 0)) throw ModelError(std::string(which) + ": amplitude list has zero norm");
  // Leave already-normalized lists untouched so load/serialize round-trips are exact.
  if (std::abs(n2 - 1.0) > 4 * std::numeric_limits<double>::epsilon()) v /= std::sqrt(n2);
  return v;
}

}  // namespace

ProductState make_product_state(CVector q, CVector b, CVector e) {
  return {normalized(std::move(q), "q_amps"), normalized(std::move(b), "b_amps"),
          normalized(std::move(e), "e_amps")};
}

CVector basis_vector(Index dim, Index k) {
  if (k < 0 || k >= dim) throw ShapeError("basis_vector: index out of range");
  CVector v = CVector::Zero(dim);
  v(k) = 1;
  return v;
}

ProductState robust_product_state(const std::array<Index, 3>& dims, Index i0) {
  const CVector q = CVector::Constant(dims[0], Complex(1.0 / std::sqrt(double(dims[0]))));
  const CVector e = CVector::Constant(dims[2], Complex(1.0 / std::sqrt(double(dims[2]))));
  return make_product_state(q, basis_vector(dims[1], i0), e);
}

CVector product_state_vector(const ProductState& state, const std::array<Index, 3>& dims) {
  if (state.q.size() != dims[0] || state.b.size() != dims[1] || state.e.size() != dims[2]) {
    throw ShapeError("product_state_vector: amplitude lengths (" + std::to_string(state.q.size()) +
                     ", " + std::to_string(state.b.size()) + ", " +
                     std::to_string(state.e.size()) + ") do not match model dims (" +
                     std::to_string(dims[0]) + ", " + std::to_string(dims[1]) + ", " +
                     std::to_string(dims[2]) + ")");
  }
  check_capacity(dims[0] * dims[1] * dims[2], dimension_cap(), "product_state_vector");
  CVector psi = kron(kron(state.q, state.b), state.e);
  return psi / psi.norm();
}

}  // namespace qbe
