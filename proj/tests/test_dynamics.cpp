#include <doctest.h>

#include <numbers>

#include "oracles.hpp"
#include "qbe/dynamics.hpp"
#include "qbe/protocol.hpp"

using namespace qbe;

namespace {

const std::array<Index, 3> k222{2, 2, 2};

double tau_of(const TripartiteModel& m, Index i0) {
  const auto recs = match_spectrum(m);
  return summarize(recs, m, i0, NormSplit{}).tau;
}

double min_of(const std::vector<double>& v) { return *std::min_element(v.begin(), v.end()); }

TwoBodyBaseline canonical_baseline() {
  TwoBodyBaseline b;
  b.gamma = canonical_model().h_qb.coeffs;
  b.c = 0.5;
  b.bath_weights = {0.5, 0.5};
  return b;
}

}  // namespace

TEST_CASE("TimeGrid: validation and endpoints") {
  const TimeGrid g{0.0, 3.0, 7};
  CHECK(g.at(0) == 0.0);
  CHECK(g.at(6) == 3.0);
  CHECK(g.times().size() == 7);
  CHECK_THROWS(TimeGrid{1.0, 1.0, 4}.validate());
  CHECK_THROWS(TimeGrid{-1.0, 1.0, 4}.validate());
  CHECK_THROWS(TimeGrid{0.0, 1.0, 1}.validate());
}

TEST_CASE("evolve: t = 0 is exact and norms are preserved") {
  const auto m = canonical_model();
  const CVector psi0 = product_state_vector(robust_product_state(k222, 0), k222);
  const auto states = evolve(m, psi0, TimeGrid{0.0, 5 * tau_of(m, 0), 101});
  CHECK(states.front() == psi0);
  for (const auto& s : states) CHECK(std::abs(s.norm() - 1) <= 1e-10);
}

TEST_CASE("evolve: c = 0 with a robust bath leaves Q and B untouched") {
  const auto m = canonical_model(0.0, 1.0);
  const auto init = robust_product_state(k222, 1);
  const CVector psi0 = product_state_vector(init, k222);
  const CMatrix qb0 = reduced_qb(psi0, k222);
  for (const auto& s : evolve(m, psi0, TimeGrid{0.0, 50.0, 64})) {
    CHECK(max_abs(reduced_qb(s, k222) - qb0) <= 1e-10);
  }
}

TEST_CASE("reduced states: purity bounds") {
  const CVector prod = product_state_vector(robust_product_state(k222, 0), k222);
  const CMatrix rq = reduced_q(prod, k222), rqb = reduced_qb(prod, k222);
  CHECK(std::abs((rq * rq).trace().real() - 1) <= 1e-10);
  CHECK(std::abs((rqb * rqb).trace().real() - 1) <= 1e-10);

  // (|0 0 0> + |1 0 1>)/sqrt 2 correlates Q with E
  CVector ghz = CVector::Zero(8);
  ghz(0) = ghz(5) = 1 / std::sqrt(2.0);
  const CMatrix rg = reduced_q(ghz, k222);
  CHECK(std::abs(rg(0, 1)) <= 1e-15);

  std::mt19937 rng(41);
  for (int t = 0; t < 20; ++t) {
    const std::array<Index, 3> d{3, 2, 2};
    const CVector psi = oracle::random_state(12, rng);
    const CMatrix r = reduced_q(psi, d);
    const double purity = (r * r).trace().real();
    CHECK(purity >= 1.0 / 3 - 1e-12);
    CHECK(purity <= 1 + 1e-12);
    CHECK(is_hermitian(r));
    CHECK(std::abs(r.trace() - Complex(1, 0)) <= 1e-10);
  }
}

TEST_CASE("correlation_amplitude: t = 0, c = 0, undefined amplitude") {
  const auto init = robust_product_state(k222, 0);
  const auto tr = trace_decoherence(canonical_model(0.0, 1.0), init, TimeGrid{0, 40, 50}, {{0, 1}});
  CHECK(std::abs(tr.z_abs[0][0] - 1) <= 1e-10);
  for (double z : tr.z_abs[0]) CHECK(std::abs(z - 1) <= 1e-10);

  const auto lopsided = make_product_state(basis_vector(2, 0), basis_vector(2, 0), basis_vector(2, 0));
  const CMatrix rq = reduced_q(product_state_vector(lopsided, k222), k222);
  CHECK_THROWS_AS(correlation_amplitude(rq, 0, 1, lopsided.q), UndefinedAmplitudeError);
  const auto tr2 = trace_decoherence(canonical_model(), lopsided, TimeGrid{0, 1, 3}, {{0, 1}});
  CHECK(std::isnan(tr2.z_abs[0][1]));
}

TEST_CASE("trace: rho_Q = C_p conj(C_p') z consistency and bounds on random models") {
  std::mt19937 rng(42);
  for (int t = 0; t < 6; ++t) {
    const auto m = oracle::random_model(rng);
    const auto init = make_product_state(oracle::random_state(2, rng), oracle::random_state(m.dims[1], rng),
                                         oracle::random_state(m.dims[2], rng));
    const TimeGrid grid{0, 200, 41};
    const auto tr = trace_decoherence(m, init, grid, {{0, 1}, {1, 0}});
    CHECK(std::abs(tr.qb_fidelity[0] - 1) <= 1e-10);
    const Complex cc = init.q(0) * std::conj(init.q(1));
    for (std::size_t k = 0; k < tr.times.size(); ++k) {
      CHECK(tr.qb_fidelity[k] <= 1 + 1e-9);
      CHECK(tr.qb_fidelity[k] >= -1e-12);
      CHECK(tr.z_abs[0][k] <= 1 + 1e-9);
      const Complex z = tr.rho_q_offdiag[0][k] / cc;
      CHECK(std::abs(tr.rho_q_offdiag[0][k] - cc * z) <= 1e-9);
      CHECK(std::abs(std::abs(z) - tr.z_abs[0][k]) <= 1e-9);
      const CVector psi = Evolver(m).at(product_state_vector(init, m.dims), grid.at(static_cast<Index>(k)));
      CHECK(std::abs(reduced_q(psi, m.dims)(0, 1) - tr.rho_q_offdiag[0][k]) <= 1e-9);
    }
  }
}

TEST_CASE("baseline_z_closed_form: examples") {
  auto b = canonical_baseline();
  const TimeGrid g{0, 10, 64};
  CHECK(std::abs(baseline_z_closed_form(b, 0, 1, g)[0] - Complex(1, 0)) <= 1e-15);

  auto single = b;
  single.gamma = RMatrix(2, 1);
  single.gamma << 0.3, -0.9;
  single.bath_weights = {1.0};
  for (auto z : baseline_z_closed_form(single, 0, 1, g)) CHECK(std::abs(std::abs(z) - 1) <= 1e-14);

  // c (gamma_00 - gamma_10) = 1, c (gamma_01 - gamma_11) = -1
  const auto z = baseline_z_closed_form(b, 0, 1, g);
  const auto ts = g.times();
  for (std::size_t k = 0; k < ts.size(); ++k) CHECK(std::abs(z[k] - Complex(std::cos(ts[k]), 0)) <= 1e-14);

  auto bad = b;
  bad.bath_weights = {0.7, 0.7};
  CHECK_THROWS(bad.validate());
}

TEST_CASE("baseline_z_simulated matches the closed form") {
  const TimeGrid g{0, 10, 64};
  const auto fam = canonical_model().h_qb.right;
  auto b = canonical_baseline();
  const auto a = baseline_z_closed_form(b, 0, 1, g), s = baseline_z_simulated(b, fam, 0, 1, g);
  double dev = 0;
  for (std::size_t k = 0; k < a.size(); ++k) dev = std::max(dev, std::abs(a[k] - s[k]));
  CHECK(dev <= 1e-10);

  auto off = b;
  off.c = 0;
  for (auto z : baseline_z_simulated(off, fam, 0, 1, g)) CHECK(std::abs(z - Complex(1, 0)) <= 1e-12);

  auto one = b;
  one.bath_weights = {1.0, 0.0};
  for (auto z : baseline_z_simulated(one, fam, 0, 1, g)) CHECK(std::abs(std::abs(z) - 1) <= 1e-12);
}

TEST_CASE("residual_z_closed_form: examples") {
  const auto m = canonical_model();
  const auto recs = match_spectrum(m);
  const auto init = robust_product_state(k222, 0);
  const double tau = tau_of(m, 0);
  const TimeGrid g{0, 5 * tau, 2001};
  const auto z = residual_z_closed_form(recs, 0, 0, 1, init.e, g, 1.0);
  CHECK(std::abs(z[0] - Complex(1, 0)) <= 1e-15);
  // the canonical p blocks are unitarily equivalent, so lambda does not depend on p
  for (auto v : z) CHECK(std::abs(std::abs(v) - 1) <= 1e-9);

  const auto tr = trace_decoherence(m, init, g, {{0, 1}});
  for (std::size_t k = 0; k < z.size(); ++k) CHECK(std::abs(std::abs(z[k]) - tr.z_abs[0][k]) <= 0.05);
}

TEST_CASE("residual_z_closed_form tracks exact |z| on an asymmetric model") {
  RMatrix g(2, 2), k(2, 2);
  g << 1, -1, -1, 3;
  k << 1, 0, 0.5, -1;
  const auto m = make_model(k222, 0.01, g, {std::numbers::pi / 4}, 1.0, k);
  const auto recs = match_spectrum(m);
  const auto sel = select_robust_bath_state(m, recs);
  const auto init = robust_product_state(k222, sel.i0);
  const double tau = tau_of(m, sel.i0);
  const TimeGrid grid{0, 5 * tau, 4001};
  const auto z = residual_z_closed_form(recs, sel.i0, 0, 1, init.e, grid, 1.0);
  const auto tr = trace_decoherence(m, init, grid, {{0, 1}});
  for (std::size_t n = 0; n < z.size(); ++n) CHECK(std::abs(std::abs(z[n]) - tr.z_abs[0][n]) <= 0.05);
}

TEST_CASE("qb_fidelity: exact limits, plateau and later decay") {
  for (Index i0 : {0, 1}) {
    const auto tr = trace_decoherence(canonical_model(0.0, 1.0), robust_product_state(k222, i0),
                                      TimeGrid{0, 500, 257}, {});
    for (double f : tr.qb_fidelity) CHECK(std::abs(f - 1) <= 1e-10);
  }

  // theta = 0: B stays in its pointer state but Q still collects the phases
  // c gamma(p, i0) t, so F = |sum_p |C_p|^2 exp(-i c gamma(p, i0) t)|^2, which
  // is 1 only when Q starts in a pointer state.
  const auto m0 = canonical_model(0.2, 1.0, 0.0);
  const TimeGrid g0{0, 500, 257};
  for (Index i0 : {0, 1}) {
    const auto init = robust_product_state(k222, i0);
    const auto tr = trace_decoherence(m0, init, g0, {});
    for (std::size_t n = 0; n < tr.times.size(); ++n) {
      Complex amp = 0;
      for (Index p = 0; p < 2; ++p)
        amp += std::norm(init.q(p)) * std::exp(Complex(0, -0.2 * m0.h_qb.coeffs(p, i0) * tr.times[n]));
      CHECK(std::abs(tr.qb_fidelity[n] - std::norm(amp)) <= 1e-10);
    }
    for (Index p = 0; p < 2; ++p) {
      const auto pointer = make_product_state(basis_vector(2, p), init.b, init.e);
      for (double f : trace_decoherence(m0, pointer, g0, {}).qb_fidelity) CHECK(std::abs(f - 1) <= 1e-10);
    }
  }

  const auto m = canonical_model(0.01, 1.0);
  const double tau = tau_of(m, 0);
  const auto tr = trace_decoherence(m, robust_product_state(k222, 0), TimeGrid{0, 0.1 * tau, 4001}, {});
  CHECK(min_of(tr.qb_fidelity) >= 0.99);

  // asymmetric gamma: lambda depends on p, so Q drifts once t passes tau
  RMatrix g(2, 2), k(2, 2);
  g << 1, -1, -1, 3;
  k << 1, 0, 0, -1;
  const auto ma = make_model(k222, 0.01, g, {std::numbers::pi / 4}, 1.0, k);
  const auto sel = select_robust_bath_state(ma, match_spectrum(ma));
  const auto init = robust_product_state(k222, sel.i0);
  const double ta = tau_of(ma, sel.i0);
  Evolver ev(ma);
  const auto plateau = trace_decoherence(ev, ma, init, TimeGrid{0, 0.1 * ta, 4001}, {});
  const auto late = trace_decoherence(ev, ma, init, TimeGrid{0, 20 * ta, 4001}, {});
  CHECK(late.qb_fidelity.back() < min_of(plateau.qb_fidelity));
  CHECK(min_of(late.qb_fidelity) < 0.5);
}

TEST_CASE("robustness_residual: examples") {
  const auto m = canonical_model();
  const CMatrix hbe = assemble(m.h_be);
  const CVector e0 = basis_vector(2, 0);
  CHECK(robustness_residual(hbe, basis_vector(2, 0), e0) <= 1e-12);
  CHECK(robustness_residual(hbe, basis_vector(2, 1), basis_vector(2, 1)) <= 1e-12);
  CVector uni(2);
  uni << 1 / std::sqrt(2.0), 1 / std::sqrt(2.0);
  CHECK(robustness_residual(hbe, uni, e0) > 0.1);
  CHECK(robustness_residual(CMatrix::Zero(4, 4), uni, e0) == 0.0);

  // the Q pointer states are robust under H_QB for any bath state
  std::mt19937 rng(43);
  const CMatrix hqb = assemble(m.h_qb);
  CHECK(robustness_residual(hqb, basis_vector(2, 1), oracle::random_state(2, rng)) <= 1e-12);
}

TEST_CASE("monotone suppression as C doubles") {
  const double c = 0.02, t_star = 400;
  double prev = std::numeric_limits<double>::infinity();
  for (double C : {0.5, 1.0, 2.0}) {
    const auto m = canonical_model(c, C);
    const double v = time_averaged_infidelity(m, robust_product_state(k222, 0), TimeGrid{0, t_star, 2001});
    CHECK(v <= prev * 1.1);
    prev = v;
  }
}
