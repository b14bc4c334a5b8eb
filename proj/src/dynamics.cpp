#include "qbe/dynamics.hpp"

#include <cmath>
#include <limits>
#include <numeric>

namespace qbe {

void TimeGrid::validate() const {
  if (!std::isfinite(t_start) || !std::isfinite(t_end) || t_start < 0 || !(t_end > t_start)) {
    throw ContractError("time grid: require t_end > t_start >= 0, both finite");
  }
  if (n_points < 2) throw ContractError("time grid: require at least 2 points");
}

double TimeGrid::at(Index k) const {
  if (k == n_points - 1) return t_end;
  return t_start + (t_end - t_start) * static_cast<double>(k) / static_cast<double>(n_points - 1);
}

std::vector<double> TimeGrid::times() const {
  validate();
  std::vector<double> out(static_cast<std::size_t>(n_points));
  for (Index k = 0; k < n_points; ++k) out[static_cast<std::size_t>(k)] = at(k);
  return out;
}

Evolver::Evolver(const CMatrix& hamiltonian, double hbar) : eig_(hermitian_eig(hamiltonian)), hbar_(hbar) {
  if (!(hbar > 0)) throw ContractError("Evolver: hbar must be positive");
}

Evolver::Evolver(const TripartiteModel& model) : Evolver(full_hamiltonian(model), model.hbar) {}

Evolver::Evolver(ExactSpectrum spectrum, double hbar) : eig_(std::move(spectrum)), hbar_(hbar) {
  if (!(hbar > 0)) throw ContractError("Evolver: hbar must be positive");
}

CVector Evolver::at(const CVector& state0, double t) const {
  if (state0.size() != eig_.eigenvalues.size()) {
    throw ShapeError("evolve: state dimension " + std::to_string(state0.size()) +
                     " does not match the generator dimension " +
                     std::to_string(eig_.eigenvalues.size()));
  }
  if (t == 0.0) return state0;
  CVector coeffs = eig_.eigenvectors.adjoint() * state0;
  for (Index k = 0; k < coeffs.size(); ++k) {
    coeffs(k) *= std::exp(Complex(0, -eig_.eigenvalues(k) * t / hbar_));
  }
  return eig_.eigenvectors * coeffs;
}

std::vector<CVector> evolve(const TripartiteModel& model, const CVector& state0, const TimeGrid& grid) {
  grid.validate();
  const Evolver ev(model);
  std::vector<CVector> out;
  out.reserve(static_cast<std::size_t>(grid.n_points));
  for (double t : grid.times()) out.push_back(ev.at(state0, t));
  return out;
}

CMatrix reduced_q(const CVector& state, const std::array<Index, 3>& dims) {
  const std::array<std::size_t, 1> keep{0};
  return reduced_density(state, std::span<const std::size_t>(keep), std::span<const Index>(dims));
}

CMatrix reduced_qb(const CVector& state, const std::array<Index, 3>& dims) {
  const std::array<std::size_t, 2> keep{0, 1};
  return reduced_density(state, std::span<const std::size_t>(keep), std::span<const Index>(dims));
}

Complex correlation_amplitude(const CMatrix& rho_q, Index p, Index p2, const CVector& q_amps) {
  if (p < 0 || p2 < 0 || p >= q_amps.size() || p2 >= q_amps.size() || rho_q.rows() != q_amps.size()) {
    throw ShapeError("correlation_amplitude: index or dimension mismatch");
  }
  const Complex denom = q_amps(p) * std::conj(q_amps(p2));
  if (std::abs(q_amps(p)) <= 1e-12 || std::abs(q_amps(p2)) <= 1e-12) {
    throw UndefinedAmplitudeError("correlation_amplitude: C_p C*_p' vanishes for pair (" +
                                  std::to_string(p) + "," + std::to_string(p2) + ")");
  }
  return rho_q(p, p2) / denom;
}

std::vector<Complex> correlation_amplitude(std::span<const Complex> rho_offdiag, Index p, Index p2,
                                           const CVector& q_amps) {
  if (p < 0 || p2 < 0 || p >= q_amps.size() || p2 >= q_amps.size()) {
    throw ShapeError("correlation_amplitude: index out of range");
  }
  if (std::abs(q_amps(p)) <= 1e-12 || std::abs(q_amps(p2)) <= 1e-12) {
    throw UndefinedAmplitudeError("correlation_amplitude: C_p C*_p' vanishes for pair (" +
                                  std::to_string(p) + "," + std::to_string(p2) + ")");
  }
  const Complex denom = q_amps(p) * std::conj(q_amps(p2));
  std::vector<Complex> z;
  z.reserve(rho_offdiag.size());
  for (const Complex& r : rho_offdiag) z.push_back(r / denom);
  return z;
}

double qb_fidelity(const CVector& state, const CVector& qb_reference, const std::array<Index, 3>& dims) {
  if (qb_reference.size() != dims[0] * dims[1]) {
    throw ShapeError("qb_fidelity: reference length does not match d_Q * d_B");
  }
  const CMatrix rho = reduced_qb(state, dims);
  return qb_reference.dot(rho * qb_reference).real();
}

namespace {

double trace_distance(const CMatrix& a, const CMatrix& b) {
  const auto eig = hermitian_eig(a - b);
  return 0.5 * eig.eigenvalues.cwiseAbs().sum();
}

}  // namespace

DecoherenceTrace trace_decoherence(const TripartiteModel& model, const ProductState& initial,
                                   const TimeGrid& grid, const PairList& pairs) {
  return trace_decoherence(Evolver(model), model, initial, grid, pairs);
}

DecoherenceTrace trace_decoherence(const Evolver& evolver, const TripartiteModel& model,
                                   const ProductState& initial, const TimeGrid& grid,
                                   const PairList& pairs) {
  grid.validate();
  const auto& dims = model.dims;
  const CVector psi0 = product_state_vector(initial, dims);
  const CVector qb0 = kron(initial.q, initial.b);
  const CMatrix rho_qb0 = qb0 * qb0.adjoint();
  for (const auto& [p, p2] : pairs) {
    if (p < 0 || p2 < 0 || p >= dims[0] || p2 >= dims[0]) {
      throw ShapeError("trace: tracked pair index out of range");
    }
  }

  DecoherenceTrace tr;
  tr.times = grid.times();
  tr.pairs = pairs;
  tr.z_abs.assign(pairs.size(), {});
  tr.rho_q_offdiag.assign(pairs.size(), {});
  for (double t : tr.times) {
    const CVector psi = evolver.at(psi0, t);
    const CMatrix rho_q = reduced_q(psi, dims);
    const CMatrix rho_qb = reduced_qb(psi, dims);
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      const auto [p, p2] = pairs[k];
      tr.rho_q_offdiag[k].push_back(rho_q(p, p2));
      double z = std::numeric_limits<double>::quiet_NaN();
      if (std::abs(initial.q(p)) > 1e-12 && std::abs(initial.q(p2)) > 1e-12) {
        z = std::abs(correlation_amplitude(rho_q, p, p2, initial.q));
      }
      tr.z_abs[k].push_back(z);
    }
    tr.qb_fidelity.push_back(qb0.dot(rho_qb * qb0).real());
    tr.qb_state_distance.push_back(trace_distance(rho_qb, rho_qb0));
  }
  return tr;
}

void TwoBodyBaseline::validate() const {
  if (gamma.size() == 0) throw ModelError("baseline: empty gamma");
  if (static_cast<Index>(bath_weights.size()) != gamma.cols()) {
    throw ModelError("baseline: bath weight count must equal the number of gamma columns");
  }
  double total = 0;
  for (double w : bath_weights) {
    if (!(w >= 0)) throw ModelError("baseline: bath weights must be non-negative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) throw ModelError("baseline: bath weights must sum to 1");
  if (!(hbar > 0)) throw ModelError("baseline: hbar must be positive");
}

std::vector<Complex> baseline_z_closed_form(const TwoBodyBaseline& baseline, Index p, Index p2,
                                            const TimeGrid& grid) {
  baseline.validate();
  if (p < 0 || p2 < 0 || p >= baseline.gamma.rows() || p2 >= baseline.gamma.rows()) {
    throw ShapeError("baseline: pair index out of range");
  }
  std::vector<Complex> z;
  for (double t : grid.times()) {
    Complex acc = 0;
    for (Index q = 0; q < baseline.gamma.cols(); ++q) {
      const double phase = baseline.c * t * (baseline.gamma(p, q) - baseline.gamma(p2, q)) / baseline.hbar;
      acc += baseline.bath_weights[static_cast<std::size_t>(q)] * std::exp(Complex(0, -phase));
    }
    z.push_back(acc);
  }
  return z;
}

std::vector<Complex> baseline_z_simulated(const TwoBodyBaseline& baseline,
                                          const ProjectorFamily& bath_family, Index p, Index p2,
                                          const TimeGrid& grid) {
  baseline.validate();
  const Index dq = baseline.gamma.rows();
  const Index db = bath_family.space_dim;
  if (static_cast<Index>(bath_family.size()) != baseline.gamma.cols()) {
    throw ShapeError("baseline: bath family size must equal the number of gamma columns");
  }
  if (p < 0 || p2 < 0 || p >= dq || p2 >= dq) throw ShapeError("baseline: pair index out of range");

  const SeparableInteraction h{baseline.c, baseline.gamma, ProjectorFamily::standard_basis(dq), bath_family};
  const Evolver ev(assemble(h), baseline.hbar);
  const CVector q0 = CVector::Constant(dq, Complex(1.0 / std::sqrt(double(dq))));
  const std::array<Index, 2> dims{dq, db};
  const std::array<std::size_t, 1> keep{0};
  const auto times = grid.times();

  std::vector<CMatrix> rho(times.size(), CMatrix::Zero(dq, dq));
  for (std::size_t q = 0; q < bath_family.size(); ++q) {
    const double w = baseline.bath_weights[q];
    if (w == 0.0) continue;
    // Pointer states of the q-th bath projector, mixed uniformly when rank > 1.
    const auto eig = hermitian_eig(bath_family.projectors[q]);
    std::vector<CVector> range;
    for (Index k = 0; k < eig.eigenvalues.size(); ++k) {
      if (eig.eigenvalues(k) > 0.5) range.push_back(eig.eigenvectors.col(k));
    }
    for (const auto& b : range) {
      const CVector psi0 = kron(q0, b);
      for (std::size_t k = 0; k < times.size(); ++k) {
        rho[k] += (w / static_cast<double>(range.size())) *
                  reduced_density(ev.at(psi0, times[k]), std::span<const std::size_t>(keep),
                                  std::span<const Index>(dims));
      }
    }
  }
  std::vector<Complex> z;
  z.reserve(times.size());
  for (const auto& r : rho) z.push_back(correlation_amplitude(r, p, p2, q0));
  return z;
}

std::vector<Complex> residual_z_closed_form(std::span<const PerturbationRecord> records, Index i0,
                                            Index p, Index p2, const CVector& beta,
                                            const TimeGrid& grid, double hbar) {
  if (std::abs(beta.squaredNorm() - 1.0) > 1e-9) {
    throw ContractError("residual_z: environment amplitudes must be normalized");
  }
  auto find = [&](Index pp, Index j) -> double {
    for (const auto& r : records) {
      if (r.p == pp && r.i == i0 && r.j == j) return r.lambda;
    }
    throw ContractError("residual_z: no record for triple (" + std::to_string(pp) + "," +
                        std::to_string(i0) + "," + std::to_string(j) + ")");
  };
  std::vector<double> dl(static_cast<std::size_t>(beta.size()));
  for (Index j = 0; j < beta.size(); ++j) dl[static_cast<std::size_t>(j)] = find(p, j) - find(p2, j);
  std::vector<Complex> z;
  for (double t : grid.times()) {
    Complex acc = 0;
    for (Index j = 0; j < beta.size(); ++j) {
      acc += std::norm(beta(j)) * std::exp(Complex(0, -t * dl[static_cast<std::size_t>(j)] / hbar));
    }
    z.push_back(acc);
  }
  return z;
}

double robustness_residual(const CMatrix& h, const CVector& x, const CVector& y) {
  const Index dx = x.size(), dy = y.size();
  if (h.rows() != dx * dy || h.cols() != dx * dy) {
    throw ShapeError("robustness_residual: operator does not act on the product of the state spaces");
  }
  const CVector v = h * kron(x, y);
  // (|x><x| (x) I) v
  CVector proj(dx * dy);
  for (Index b = 0; b < dy; ++b) {
    Complex amp = 0;
    for (Index a = 0; a < dx; ++a) amp += std::conj(x(a)) * v(a * dy + b);
    for (Index a = 0; a < dx; ++a) proj(a * dy + b) = x(a) * amp;
  }
  return (v - proj).norm() / std::max(v.norm(), 1e-15);
}

double time_averaged_infidelity(const TripartiteModel& model, const ProductState& initial,
                                const TimeGrid& grid) {
  const auto tr = trace_decoherence(model, initial, grid, {});
  double acc = 0;
  for (double f : tr.qb_fidelity) acc += 1.0 - f;
  return acc / static_cast<double>(tr.qb_fidelity.size());
}

}  // namespace qbe
