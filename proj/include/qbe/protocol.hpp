#pragma once

#include <optional>
#include <vector>

#include "qbe/dynamics.hpp"
#include "qbe/spectral.hpp"

namespace qbe {

struct ProtocolConfig {
  std::vector<double> ratio_ladder;  // c/C values, strictly positive, descending
  double fidelity_threshold = 0.99;
  double plateau_fraction = 0.1;     // plateau is checked up to fraction * tau
  Index grid_points = 401;
  PairList tracked_pairs{{0, 1}};
  int repeat_count = 1;
  double weak_coupling_limit = 0.1;  // c/C above this flags a regime breach
  MatchOptions match;

  void validate() const;
};

struct BathCandidate {
  Index i = 0;
  double diagonal_figure = 0;  // max_{p,j} |<pij|H_QB|pij>|
  double lambda_max = 0;       // max_{p,j} |lambda_pij| from the exact spectrum
};

struct RobustSelection {
  Index i0 = 0;
  bool tie = false;  // every row equal within tolerance
  std::vector<BathCandidate> candidates;
};

RobustSelection select_robust_bath_state(const TripartiteModel& model,
                                         std::span<const PerturbationRecord> records);
RobustSelection select_robust_bath_state(const TripartiteModel& model, const MatchOptions& opts = {});

struct ScalingFit {
  double slope = 0;
  double intercept = 0;
  double r2 = 0;
};

/// Least-squares line through (log x, log y).
ScalingFit fit_loglog(std::span<const double> xs, std::span<const double> ys);

struct ScalingRung {
  double ratio = 0;
  double c = 0;
  double C = 0;
  Index i0 = 0;
  double eps_max = 0;
  double lambda_max = 0;
  double tau = 0;
  bool tau_infinite = false;
  double n1 = 1;
  double n2 = 0;
  double k_factor = 0;  // n2 / ratio^2
};

struct SweepResult {
  std::vector<ScalingRung> rungs;
  ScalingFit fit;
  double k_spread = 0;  // max K / min K across rungs
};

/// Rebuilds the model at each ratio (c varies, C fixed) and fits
/// log eps_max against log(c/C).
SweepResult sweep_ratio(const TripartiteModel& model_template, const ProductState& initial,
                        const ProtocolConfig& config);

struct ProtocolStep {
  double min_fidelity = 1;
  bool plateau_ok = true;
};

struct ProtocolReport {
  RobustSelection selection;
  PerturbationSummary summary;
  std::vector<PerturbationRecord> records;
  ProductState prepared;
  bool exact_limit = false;         // lambda_max vanishes; tau infinite
  bool weak_coupling_breach = false;
  bool plateau_ok = false;
  double plateau_time = 0;          // fraction * tau, or the fallback window in the exact limit
  double min_plateau_fidelity = 1;
  double error_probability_bound = 0;  // n2
  std::vector<ProtocolStep> steps;
  DecoherenceTrace trace;           // first step
  std::optional<SweepResult> sweep;
  std::vector<std::string> invariant_violations;
};

/// Robust bath selection, spectral summary, exact evolution over the plateau
/// window and the fidelity verdict. `initial` supplies the Q and E amplitudes;
/// the bath amplitudes are replaced by the chosen pointer state.
ProtocolReport run_protocol(const TripartiteModel& model, const ProductState& initial,
                            const ProtocolConfig& config);

}  // namespace qbe
