#include "qbe/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace qbe {

void ProtocolConfig::validate() const {
  for (std::size_t k = 0; k < ratio_ladder.size(); ++k) {
    if (!(ratio_ladder[k] > 0) || !std::isfinite(ratio_ladder[k])) {
      throw ContractError("protocol: ratio ladder entries must be positive and finite");
    }
    if (k > 0 && !(ratio_ladder[k] < ratio_ladder[k - 1])) {
      throw ContractError("protocol: ratio ladder must be sorted strictly descending");
    }
  }
  if (!(fidelity_threshold > 0 && fidelity_threshold < 1)) {
    throw ContractError("protocol: fidelity threshold must lie in (0, 1)");
  }
  if (!(plateau_fraction > 0)) throw ContractError("protocol: plateau fraction must be positive");
  if (grid_points < 2) throw ContractError("protocol: need at least 2 grid points");
  if (repeat_count < 1) throw ContractError("protocol: repeat count must be at least 1");
}

RobustSelection select_robust_bath_state(const TripartiteModel& model,
                                         std::span<const PerturbationRecord> records) {
  const Index db = model.dims[1];
  const CMatrix h_qb = embedded_h_qb(model);
  RobustSelection sel;
  for (Index i = 0; i < db; ++i) sel.candidates.push_back({i, 0.0, 0.0});
  for (const auto& s : unperturbed_spectrum(model)) {
    auto& cand = sel.candidates[static_cast<std::size_t>(s.i)];
    cand.diagonal_figure = std::max(cand.diagonal_figure, std::abs(s.ket.dot(h_qb * s.ket)));
  }
  for (const auto& r : records) {
    auto& cand = sel.candidates[static_cast<std::size_t>(r.i)];
    cand.lambda_max = std::max(cand.lambda_max, std::abs(r.lambda));
  }
  double hi = 0, lo = std::numeric_limits<double>::infinity();
  for (const auto& c : sel.candidates) {
    hi = std::max(hi, c.lambda_max);
    lo = std::min(lo, c.lambda_max);
  }
  const double tol = 1e-12 * std::max(1.0, hi);
  sel.tie = hi - lo <= tol;
  sel.i0 = 0;
  if (!sel.tie) {
    for (const auto& c : sel.candidates) {
      if (c.lambda_max < sel.candidates[static_cast<std::size_t>(sel.i0)].lambda_max - tol) sel.i0 = c.i;
    }
  }
  return sel;
}

RobustSelection select_robust_bath_state(const TripartiteModel& model, const MatchOptions& opts) {
  const auto records = match_spectrum(model, opts);
  return select_robust_bath_state(model, records);
}

ScalingFit fit_loglog(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size() || xs.size() < 2) {
    throw ContractError("fit_loglog: need at least two paired points");
  }
  const double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    if (!(xs[k] > 0) || !(ys[k] > 0)) throw ContractError("fit_loglog: values must be positive");
    mx += std::log(xs[k]);
    my += std::log(ys[k]);
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const double dx = std::log(xs[k]) - mx, dy = std::log(ys[k]) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx == 0) throw ContractError("fit_loglog: x values are all equal");
  ScalingFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  const double ss_res = syy - fit.slope * sxy;
  fit.r2 = syy == 0 ? 1.0 : 1.0 - std::max(0.0, ss_res) / syy;
  return fit;
}

SweepResult sweep_ratio(const TripartiteModel& model_template, const ProductState& initial,
                        const ProtocolConfig& config) {
  config.validate();
  const auto& ladder = config.ratio_ladder;
  if (ladder.size() < 4) {
    throw InsufficientSweepError("sweep: need at least 4 ladder points, got " +
                                 std::to_string(ladder.size()));
  }
  if (ladder.front() / ladder.back() < 10.0 * (1 - 1e-12)) {
    throw InsufficientSweepError("sweep: ladder must span at least one decade");
  }
  if (ladder.front() > 0.1) throw InsufficientSweepError("sweep: ladder ratios must not exceed 0.1");

  const double C = model_template.C();
  const double sign = model_template.c() < 0 ? -1.0 : 1.0;
  SweepResult out;
  std::vector<double> xs, ys;
  for (double r : ladder) {
    const TripartiteModel m = with_couplings(model_template, sign * r * C, C);
    m.validate();
    const auto records = match_spectrum(m, config.match);
    const auto sel = select_robust_bath_state(m, records);
    const ProductState state = make_product_state(initial.q, basis_vector(m.dims[1], sel.i0), initial.e);
    const auto split = norm_split(records, product_state_vector(state, m.dims));
    const auto summary = summarize(records, m, sel.i0, split);

    ScalingRung rung;
    rung.ratio = r;
    rung.c = m.c();
    rung.C = C;
    rung.i0 = sel.i0;
    rung.eps_max = summary.eps_max;
    rung.lambda_max = summary.lambda_max;
    rung.tau = summary.tau;
    rung.tau_infinite = summary.tau_infinite;
    rung.n1 = summary.n1;
    rung.n2 = summary.n2;
    rung.k_factor = summary.n2 / (r * r);
    out.rungs.push_back(rung);
    if (summary.eps_max > 0) {
      xs.push_back(r);
      ys.push_back(summary.eps_max);
    }
  }
  if (xs.size() < 4) {
    throw InsufficientSweepError("sweep: fewer than 4 rungs with nonzero eps_max");
  }
  out.fit = fit_loglog(xs, ys);

  double kmin = std::numeric_limits<double>::infinity(), kmax = 0;
  for (const auto& r : out.rungs) {
    kmin = std::min(kmin, r.k_factor);
    kmax = std::max(kmax, r.k_factor);
  }
  out.k_spread = kmin > 0 ? kmax / kmin : std::numeric_limits<double>::infinity();
  return out;
}

namespace {

// Environment state conditioned on Q+B being found in the reference state.
CVector conditional_environment(const CVector& psi, const CVector& qb_ref, Index de) {
  const Index dqb = qb_ref.size();
  CVector e = CVector::Zero(de);
  for (Index a = 0; a < dqb; ++a) {
    for (Index k = 0; k < de; ++k) e(k) += std::conj(qb_ref(a)) * psi(a * de + k);
  }
  return e;
}

}  // namespace

ProtocolReport run_protocol(const TripartiteModel& model, const ProductState& initial,
                            const ProtocolConfig& config) {
  config.validate();
  model.validate();

  ProtocolReport rep;
  ExactSpectrum exact = exact_spectrum(model);
  rep.records = match_spectrum(model, exact, config.match);
  rep.selection = select_robust_bath_state(model, rep.records);
  const Index i0 = rep.selection.i0;
  rep.prepared = make_product_state(initial.q, basis_vector(model.dims[1], i0), initial.e);

  const CVector psi0 = product_state_vector(rep.prepared, model.dims);
  const auto split = norm_split(rep.records, psi0);
  rep.summary = summarize(rep.records, model, i0, split);
  rep.error_probability_bound = rep.summary.n2;
  rep.invariant_violations = check_invariants(rep.records, rep.summary, model);
  rep.exact_limit = rep.summary.tau_infinite;
  rep.weak_coupling_breach = std::abs(model.ratio()) > config.weak_coupling_limit;

  // In the exact limit there is no tau; watch a window of 100 B-E periods instead.
  rep.plateau_time = rep.exact_limit ? 100.0 * model.hbar / model.C()
                                     : config.plateau_fraction * rep.summary.tau;
  const TimeGrid grid{0.0, rep.plateau_time, config.grid_points};
  const Evolver evolver(std::move(exact), model.hbar);

  ProductState state = rep.prepared;
  const CVector qb_ref = kron(rep.prepared.q, rep.prepared.b);
  rep.plateau_ok = true;
  rep.min_plateau_fidelity = 1.0;
  for (int step = 0; step < config.repeat_count; ++step) {
    auto tr = trace_decoherence(evolver, model, state, grid, config.tracked_pairs);
    ProtocolStep ps;
    ps.min_fidelity = *std::min_element(tr.qb_fidelity.begin(), tr.qb_fidelity.end());
    ps.plateau_ok = rep.exact_limit || ps.min_fidelity >= config.fidelity_threshold;
    rep.plateau_ok = rep.plateau_ok && ps.plateau_ok;
    rep.min_plateau_fidelity = std::min(rep.min_plateau_fidelity, ps.min_fidelity);
    rep.steps.push_back(ps);

    // Next step: Q+B re-asserted, E carried over from the end of this window.
    const CVector psi_end = evolver.at(product_state_vector(state, model.dims), grid.t_end);
    const CVector e_next = conditional_environment(psi_end, qb_ref, model.dims[2]);
    if (e_next.norm() > 1e-12) state = make_product_state(rep.prepared.q, rep.prepared.b, e_next);
    if (step == 0) rep.trace = std::move(tr);
  }

  if (!config.ratio_ladder.empty()) rep.sweep = sweep_ratio(model, initial, config);
  return rep;
}

}  // namespace qbe
