// Acceptance suite: one PASS/FAIL line per criterion.
// usage: qbe_acceptance <path to qbe binary>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>

#include "oracles.hpp"
#include "qbe/config.hpp"
#include "qbe/dynamics.hpp"
#include "qbe/protocol.hpp"
#include "qbe/report.hpp"

using namespace qbe;
namespace fs = std::filesystem;

namespace {

const std::array<Index, 3> k222{2, 2, 2};

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

double min_of(const std::vector<double>& v) { return *std::min_element(v.begin(), v.end()); }

std::vector<TripartiteModel> random_models(int n, unsigned seed) {
  std::mt19937 rng(seed);
  std::vector<TripartiteModel> out;
  for (int k = 0; k < n; ++k) out.push_back(oracle::random_model(rng));
  return out;
}

// 1. Q+B fidelity is exactly 1 with theta = 0 or c = 0.
Outcome exact_limit() {
  const ProductState init = robust_product_state(k222, 0);
  const TimeGrid grid{0, 1000, 401};
  auto worst = [&](const TripartiteModel& m) {
    double w = 0;
    for (double f : trace_decoherence(m, init, grid, {}).qb_fidelity) w = std::max(w, std::abs(f - 1));
    return w;
  };
  const double c0 = worst(canonical_model(0.0, 1.0));
  const double t0 = worst(canonical_model(0.01, 1.0, 0.0));
  return {c0 <= 1e-10 && t0 <= 1e-10,
          "max|F-1| c=0: " + fmt(c0) + ", theta=0: " + fmt(t0) + " (tol 1e-10)"};
}

// 2. Simulated two-body z against the closed form.
Outcome baseline_oracle() {
  const TimeGrid grid{0, 20, 64};
  double worst = 0;
  auto compare = [&](const TwoBodyBaseline& b, const ProjectorFamily& fam) {
    const auto a = baseline_z_closed_form(b, 0, 1, grid), s = baseline_z_simulated(b, fam, 0, 1, grid);
    for (std::size_t k = 0; k < a.size(); ++k) worst = std::max(worst, std::abs(a[k] - s[k]));
  };
  const auto canon = canonical_model();
  compare(TwoBodyBaseline{canon.h_qb.coeffs, 0.5, {0.5, 0.5}, 1.0}, canon.h_qb.right);

  std::mt19937 rng(2024);
  std::uniform_int_distribution<int> dq(2, 3), db(2, 4);
  std::uniform_real_distribution<double> u(0.05, 1.0), ang(-1.5, 1.5), cc(0.1, 2.0);
  for (int k = 0; k < 20; ++k) {
    const Index d_q = dq(rng), d_b = db(rng);
    std::vector<double> angles, w;
    for (Index a = 0; a + 1 < d_b; ++a) angles.push_back(ang(rng));
    for (Index q = 0; q < d_b; ++q) w.push_back(u(rng));
    double total = 0;
    for (double x : w) total += x;
    for (double& x : w) x /= total;
    compare(TwoBodyBaseline{oracle::random_real(d_q, d_b, rng), cc(rng), w, 1.0},
            rotated_bath_families(d_b, angles).qb_side);
  }
  return {worst <= 1e-10, "max |z_sim - z_closed| over 21 baselines x 64 points: " + fmt(worst)};
}

// 3 and 4 share the random models.
Outcome norm_split_identity(const std::vector<TripartiteModel>& models) {
  std::mt19937 rng(7);
  double sum_dev = 0, ineq = std::numeric_limits<double>::infinity();
  for (const auto& m : models) {
    const auto recs = match_spectrum(m);
    const auto init = make_product_state(oracle::random_state(m.dims[0], rng), oracle::random_state(m.dims[1], rng),
                                         oracle::random_state(m.dims[2], rng));
    const auto split = norm_split(recs, product_state_vector(init, m.dims));
    double em = 0;
    for (const auto& r : recs) em = std::max(em, r.epsilon);
    sum_dev = std::max(sum_dev, std::abs(split.n1 + split.n2 - 1));
    ineq = std::min(ineq, split.n1 - (1 - em * em) * (1 - em * em));
  }
  return {sum_dev <= 1e-9 && ineq >= -1e-9,
          std::to_string(models.size()) + " models: max|n1+n2-1| " + fmt(sum_dev) + ", min n1-(1-eps^2)^2 " + fmt(ineq)};
}

Outcome lambda_bound_holds(const std::vector<TripartiteModel>& models) {
  double slack = std::numeric_limits<double>::infinity();
  std::size_t checked = 0;
  for (const auto& m : models) {
    const auto recs = match_spectrum(m);
    const Index i0 = select_robust_bath_state(m, recs).i0;
    const CMatrix h = embedded_h_qb(m);
    for (const auto& r : recs) {
      if (r.i != i0) continue;
      slack = std::min(slack, lambda_bound(r, h) + 1e-9 - std::abs(r.lambda));
      ++checked;
    }
  }
  return {slack >= 0, std::to_string(checked) + " i0 records: min (bound + 1e-9 - |lambda|) " + fmt(slack)};
}

SweepResult canonical_sweep() {
  ProtocolConfig pc;
  pc.ratio_ladder = {0.1, 0.05, 0.02, 0.01, 0.005};
  return sweep_ratio(canonical_model(), robust_product_state(k222, 0), pc);
}

// 5. eps_max ~ c/C
Outcome scaling() {
  const auto sw = canonical_sweep();
  return {sw.fit.slope >= 0.85 && sw.fit.slope <= 1.15 && sw.fit.r2 >= 0.98,
          "slope " + fmt(sw.fit.slope) + " in [0.85, 1.15], r2 " + fmt(sw.fit.r2) + " >= 0.98"};
}

// 6. n2 <= K (c/C)^2 with K stable
Outcome error_order() {
  const auto sw = canonical_sweep();
  double lo = std::numeric_limits<double>::infinity(), hi = 0;
  for (const auto& r : sw.rungs) {
    lo = std::min(lo, r.k_factor);
    hi = std::max(hi, r.k_factor);
  }
  return {hi / lo <= 2.0, "K = n2/(c/C)^2 in [" + fmt(lo) + ", " + fmt(hi) + "], spread " + fmt(hi / lo) + " <= 2"};
}

// 7. plateau, post-tau drop and residual law
Outcome plateau() {
  const auto m = canonical_model(0.01, 1.0);
  const auto recs = match_spectrum(m);
  const Index i0 = select_robust_bath_state(m, recs).i0;
  const auto init = robust_product_state(k222, i0);
  const auto sum = summarize(recs, m, i0, norm_split(recs, product_state_vector(init, k222)));
  const double tau = sum.tau;
  Evolver ev(m);
  // the plateau fidelity oscillates with period ~ 2 pi hbar / C; resolve it
  const auto pl = trace_decoherence(ev, m, init, TimeGrid{0, 0.1 * tau, 20001}, {});
  const double plateau_min = min_of(pl.qb_fidelity);
  const CVector psi20 = ev.at(product_state_vector(init, k222), 20 * tau);
  const double f20 = qb_fidelity(psi20, kron(init.q, init.b), k222);

  const TimeGrid g5{0, 5 * tau, 20001};
  const auto tr = trace_decoherence(ev, m, init, g5, {{0, 1}});
  const auto rz = residual_z_closed_form(recs, i0, 0, 1, init.e, g5, m.hbar);
  double dz = 0;
  for (std::size_t k = 0; k < rz.size(); ++k) dz = std::max(dz, std::abs(std::abs(rz[k]) - tr.z_abs[0][k]));

  const bool a = plateau_min >= 0.99, b = f20 < plateau_min, c = dz <= 0.05;
  return {a && b && c, "tau " + fmt(tau) + "; min F on [0, 0.1 tau] " + fmt(plateau_min) + (a ? " ok" : " LOW") +
                           "; F(20 tau) " + fmt(f20) + (b ? " below" : " NOT below") + " plateau min" +
                           "; max ||z_res|-|z|| on [0, 5 tau] " + fmt(dz) + (c ? " ok" : " > 0.05")};
}

// 8. time-averaged infidelity non-increasing as C doubles
Outcome monotone() {
  const double c = 0.01;
  const TimeGrid window{0, 1000, 4001};
  std::vector<double> v;
  bool ok = true;
  std::string detail = "c = 0.01, window [0, 1000]:";
  for (double C : {1.0, 2.0, 4.0}) {
    v.push_back(time_averaged_infidelity(canonical_model(c, C), robust_product_state(k222, 0), window));
    detail += " C=" + fmt(C) + " -> " + fmt(v.back());
    if (v.size() > 1 && v.back() > 1.1 * v[v.size() - 2]) ok = false;
  }
  return {ok, detail};
}

// 9. byte-identical CSVs from two protocol runs
Outcome determinism(const std::string& binary) {
  const fs::path dir = fs::temp_directory_path() / "qbe_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path model = dir / "canonical.json";
  std::ofstream(model) << serialize_model(ModelConfig{canonical_model(), robust_product_state(k222, 0)});
  std::vector<std::string> csv[2];
  for (int k = 0; k < 2; ++k) {
    const fs::path out = dir / ("run" + std::to_string(k));
    const std::string cmd = "\"" + binary + "\" protocol --model \"" + model.string() + "\" --out \"" + out.string() +
                            "\" --ladder 0.1 0.05 0.02 0.01 0.005 > /dev/null";
    if (std::system(cmd.c_str()) != 0) return {false, "protocol run " + std::to_string(k) + " failed"};
    for (const char* f : {"records.csv", "trace.csv", "scaling.csv"}) {
      std::ifstream in(out / f, std::ios::binary);
      std::ostringstream s;
      s << in.rdbuf();
      csv[k].push_back(s.str());
    }
  }
  fs::remove_all(dir);
  const bool same = csv[0] == csv[1] && !csv[0][0].empty();
  return {same, same ? "records.csv, trace.csv, scaling.csv identical" : "CSV bytes differ"};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: %s <qbe binary>\n", argv[0]);
    return 2;
  }
  const auto models = random_models(50, 1234);
  struct Criterion {
    int id;
    const char* name;
    double budget;  // seconds, 0 = none
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "exact-limit identity", 1, exact_limit},
      {2, "two-body closed-form equivalence", 10, baseline_oracle},
      {3, "norm split identity and lower bound", 60, [&] { return norm_split_identity(models); }},
      {4, "lambda bound", 0, [&] { return lambda_bound_holds(models); }},
      {5, "eps_max ~ c/C scaling", 30, scaling},
      {6, "error probability of order (c/C)^2", 0, error_order},
      {7, "fidelity plateau and post-tau dephasing", 0, plateau},
      {8, "monotone suppression", 0, monotone},
      {9, "determinism", 0, [&] { return determinism(argv[1]); }},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget > 0 && secs > c.budget) {
      o.pass = false;
      o.detail += "; runtime over budget " + fmt(c.budget) + " s";
    }
    failures += o.pass ? 0 : 1;
    std::printf("%s criterion %d (%s) [%.3f s]: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, secs, o.detail.c_str());
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
