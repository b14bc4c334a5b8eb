#pragma once

#include <span>
#include <utility>
#include <vector>

#include "qbe/model.hpp"
#include "qbe/spectral.hpp"

namespace qbe {

struct TimeGrid {
  double t_start = 0;
  double t_end = 1;
  Index n_points = 2;

  /// t_end > t_start >= 0, n_points >= 2.
  void validate() const;
  double at(Index k) const;
  std::vector<double> times() const;
};

/// Exact propagation from one eigensolve of the generator.
class Evolver {
 public:
  Evolver(const CMatrix& hamiltonian, double hbar);
  explicit Evolver(const TripartiteModel& model);
  Evolver(ExactSpectrum spectrum, double hbar);

  CVector at(const CVector& state0, double t) const;
  const ExactSpectrum& spectrum() const { return eig_; }

 private:
  ExactSpectrum eig_;
  double hbar_;
};

std::vector<CVector> evolve(const TripartiteModel& model, const CVector& state0, const TimeGrid& grid);

CMatrix reduced_q(const CVector& state, const std::array<Index, 3>& dims);
CMatrix reduced_qb(const CVector& state, const std::array<Index, 3>& dims);

using PairList = std::vector<std::pair<Index, Index>>;

/// z_pp' = rho_Q(p, p') / (C_p conj(C_p')).
Complex correlation_amplitude(const CMatrix& rho_q, Index p, Index p2, const CVector& q_amps);
std::vector<Complex> correlation_amplitude(std::span<const Complex> rho_offdiag, Index p, Index p2,
                                           const CVector& q_amps);

/// <Psi0|rho_QB|Psi0> for a pure Q+B reference.
double qb_fidelity(const CVector& state, const CVector& qb_reference, const std::array<Index, 3>& dims);

struct DecoherenceTrace {
  std::vector<double> times;
  PairList pairs;
  std::vector<std::vector<double>> z_abs;             // per pair
  std::vector<std::vector<Complex>> rho_q_offdiag;    // per pair
  std::vector<double> qb_fidelity;
  std::vector<double> qb_state_distance;              // trace distance to rho_QB(0)
};

/// Evolves the product state and records the Q coherences and the Q+B fidelity.
/// Pairs whose amplitude product vanishes get NaN in z_abs.
DecoherenceTrace trace_decoherence(const TripartiteModel& model, const ProductState& initial,
                                   const TimeGrid& grid, const PairList& pairs);
DecoherenceTrace trace_decoherence(const Evolver& evolver, const TripartiteModel& model,
                                   const ProductState& initial, const TimeGrid& grid,
                                   const PairList& pairs);

/// Two-body Q+B model with a bath mixed over the pointer states of its projectors.
struct TwoBodyBaseline {
  RMatrix gamma;
  double c = 0;
  std::vector<double> bath_weights;
  double hbar = 1;

  void validate() const;
};

/// sum_q p_q exp(-i c t (gamma_pq - gamma_p'q) / hbar)
std::vector<Complex> baseline_z_closed_form(const TwoBodyBaseline& baseline, Index p, Index p2,
                                            const TimeGrid& grid);

/// Evolves Q (x) B under the assembled interaction once per bath component
/// (the range vector of each bath projector), mixes the reduced Q states with
/// the weights and extracts z.
std::vector<Complex> baseline_z_simulated(const TwoBodyBaseline& baseline,
                                          const ProjectorFamily& bath_family, Index p, Index p2,
                                          const TimeGrid& grid);

/// sum_j |beta_j|^2 exp(-i t (lambda_{p i0 j} - lambda_{p' i0 j}) / hbar)
std::vector<Complex> residual_z_closed_form(std::span<const PerturbationRecord> records, Index i0,
                                            Index p, Index p2, const CVector& beta,
                                            const TimeGrid& grid, double hbar);

/// ||(I - |x><x| (x) I) H (x (x) y)|| / max(||H (x (x) y)||, 1e-15)
double robustness_residual(const CMatrix& h, const CVector& x, const CVector& y);

/// Mean of 1 - F over the grid.
double time_averaged_infidelity(const TripartiteModel& model, const ProductState& initial,
                                const TimeGrid& grid);

}  // namespace qbe
