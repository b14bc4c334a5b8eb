#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qbe/model.hpp"
#include "qbe/operator_core.hpp"

namespace qbe {

/// Product ket |p i j> with its B-E energy C * kappa(i, j).
struct UnperturbedState {
  Index p = 0, i = 0, j = 0;
  double e0 = 0;
  CVector ket;
};

/// Every triple (p, i, j) in product-basis order (p slowest, j fastest).
std::vector<UnperturbedState> unperturbed_spectrum(const TripartiteModel& model);

using ExactSpectrum = EigenDecomposition<double>;

/// Eigendecomposition of H_QB + H_BE on the full composite space.
ExactSpectrum exact_spectrum(const TripartiteModel& model);

struct MatchOptions {
  /// Two exact eigenvectors whose weights on one reference ket differ by less
  /// than this are treated as an ambiguous claim.
  double overlap_gap = 1e-6;
  /// Unperturbed energies closer than this (times max(1, |C|)) form one cluster.
  double cluster_tol = 1e-9;
  /// Exact eigenvalues closer than this (times max(1, max|E|)) are one eigenspace.
  double exact_tol = 1e-12;
  /// When false, degenerate clusters are matched against bare product kets and
  /// any ambiguity throws DegeneracyError.
  bool degenerate_path = true;
};

/// One exact eigenpair written as sqrt(1 - eps^2) |ref> + eps |chi>.
struct PerturbationRecord {
  Index p = 0, i = 0, j = 0;
  double e0 = 0;
  double e_exact = 0;
  double lambda = 0;
  double epsilon = 0;
  double overlap = 1;
  double residual_vector_norm = 0;
  Index exact_index = 0;
  bool degenerate = false;  // reference ket comes from an adapted degenerate basis
  bool ambiguous = false;
  std::optional<Index> alternative;  // competing exact eigen index when ambiguous
  CVector reference;                 // |pij> or its adapted replacement
  CVector eigenvector;               // gauge-fixed so <reference|eigenvector> = overlap
  CVector correction;                // eigenvector - overlap * reference = eps |chi>
};

/// Assigns every exact eigenpair to one triple by maximum overlap, sending
/// degenerate unperturbed clusters through degenerate_match. Records come back
/// sorted by (p, i, j).
std::vector<PerturbationRecord> match_spectrum(const TripartiteModel& model,
                                               const MatchOptions& opts = {});
std::vector<PerturbationRecord> match_spectrum(const TripartiteModel& model,
                                               const ExactSpectrum& exact,
                                               const MatchOptions& opts = {});

/// Matching for one cluster of equal unperturbed energies. The restriction of
/// H_QB to the cluster is diagonalized to get the zeroth-order adapted basis;
/// eigenvalue ties of that restriction are resolved by projecting the exact
/// eigenvectors onto the tied subspace. Exact eigenvectors are drawn from the
/// eigenspaces carrying the largest weight in the cluster.
std::vector<PerturbationRecord> degenerate_match(const TripartiteModel& model,
                                                 const ExactSpectrum& exact,
                                                 std::span<const UnperturbedState> cluster,
                                                 const MatchOptions& opts = {});

/// Groups unperturbed states into clusters of equal energy.
std::vector<std::vector<UnperturbedState>> energy_clusters(
    std::span<const UnperturbedState> states, double tol);

/// Right-hand side of the lambda bound
///   (1 - eps^2)^(-1/2) |<r|H_QB|r>| + |eps| (1 - eps^2)^(-1) |<r|H_QB|chi>|.
double lambda_bound(const PerturbationRecord& record, const TripartiteModel& model);
double lambda_bound(const PerturbationRecord& record, const CMatrix& h_qb_embedded);

struct NormSplit {
  double n1 = 1;
  double n2 = 0;
};

/// n1 = sum (1 - eps^2)^2 |<r|Psi>|^2, n2 = 1 - n1.
NormSplit norm_split(std::span<const PerturbationRecord> records, const CVector& initial);

struct PerturbationSummary {
  double eps_max = 0;     // over all records
  double eps_max_i0 = 0;  // over the i = i0 slice
  double lambda_max = 0;  // max |lambda| over the i = i0 slice
  double tau = 0;
  bool tau_infinite = false;
  double n1 = 1;
  double n2 = 0;
  double ratio = 0;
  double hbar = 1;
  Index i0 = 0;
};

inline constexpr double kLambdaFloor = 1e-15;

PerturbationSummary summarize(std::span<const PerturbationRecord> records,
                              const TripartiteModel& model, Index i0, const NormSplit& split);

/// ||U(t) psi - sum_r exp(-i E_r t / hbar) <r|psi> |r>||: the part of the
/// evolution not captured by the diagonal, error-free propagator.
double diagonal_evolution_error(std::span<const PerturbationRecord> records,
                                const CVector& initial, double t, double hbar);

/// Re-checks the exact identities on a finished analysis. Returns one message
/// per violation; empty means all hold.
std::vector<std::string> check_invariants(std::span<const PerturbationRecord> records,
                                          const PerturbationSummary& summary,
                                          const TripartiteModel& model);

}  // namespace qbe
