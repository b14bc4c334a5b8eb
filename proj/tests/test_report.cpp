#include <doctest.h>

#include <charconv>
#include <clocale>
#include <sstream>

#include "qbe/report.hpp"

using namespace qbe;

namespace {

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST_CASE("format_real: 17 significant digits round-trip") {
  for (double v : {0.1, 1.0 / 3, -2.5e-300, 6.02214076e23, 0.0, 1e-15}) {
    const auto s = format_real(v);
    double back = 0;
    std::from_chars(s.data(), s.data() + s.size(), back);
    CHECK(back == v);
  }
  CHECK(format_real(0.1) == "0.10000000000000001");
  CHECK(format_real(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(format_real(-std::numeric_limits<double>::infinity()) == "-inf");
  CHECK(format_real(std::numeric_limits<double>::quiet_NaN()) == "nan");
}

TEST_CASE("format_real ignores the C locale") {
  const char* old = std::setlocale(LC_NUMERIC, nullptr);
  const std::string saved = old ? old : "C";
  if (std::setlocale(LC_NUMERIC, "de_DE.UTF-8")) {
    CHECK(format_real(1.5) == "1.5");
  }
  std::setlocale(LC_NUMERIC, saved.c_str());
}

TEST_CASE("records_csv: header and one row per record") {
  const auto recs = match_spectrum(canonical_model());
  const auto l = lines(records_csv(recs));
  REQUIRE(l.size() == 9);
  CHECK(l[0] == "p,i,j,e0,e_exact,lambda,epsilon,overlap");
  CHECK(l[1].rfind("0,0,0,", 0) == 0);
}

TEST_CASE("trace_csv: column layout") {
  const auto tr = trace_decoherence(canonical_model(), robust_product_state({2, 2, 2}, 0), TimeGrid{0, 1, 5},
                                    {{0, 1}});
  const auto l = lines(trace_csv(tr));
  REQUIRE(l.size() == 6);
  CHECK(l[0] == "time,z_abs_0_1,re_rho_0_1,im_rho_0_1,qb_fidelity");
}

TEST_CASE("scaling_csv and summaries") {
  ProtocolConfig pc;
  pc.ratio_ladder = {0.1, 0.05, 0.02, 0.01, 0.005};
  const auto sw = sweep_ratio(canonical_model(), robust_product_state({2, 2, 2}, 0), pc);
  const auto l = lines(scaling_csv(sw));
  REQUIRE(l.size() == 6);
  CHECK(l[0] == "ratio,c,C,i0,eps_max,lambda_max,tau,n1,n2,k_factor");
  CHECK(sweep_kv(sw).find("scaling_slope=") != std::string::npos);

  const auto m0 = canonical_model(0.0, 1.0);
  const auto s0 = summarize(match_spectrum(m0), m0, 0, NormSplit{});
  const auto kv = summary_kv(s0);
  CHECK(kv.find("tau=inf\n") != std::string::npos);
  CHECK(kv.find("eps_max=0\n") != std::string::npos);
}

TEST_CASE("report_kv flags the plateau criterion as an artifact default") {
  const auto rep = run_protocol(canonical_model(), robust_product_state({2, 2, 2}, 0), ProtocolConfig{});
  const auto kv = report_kv(rep);
  CHECK(kv.find("plateau_criterion=artifact_default") != std::string::npos);
  CHECK(kv.find("chosen_i0=0") != std::string::npos);
  CHECK(kv.find("error_probability_bound=" + format_real(rep.error_probability_bound)) != std::string::npos);
}

TEST_CASE("svg_line_plot: fixed canvas, one polyline per series, non-finite points skipped") {
  PlotSeries a{"a", {0, 1, 2, 3}, {1, 0.5, std::numeric_limits<double>::quiet_NaN(), 0.2}};
  PlotSeries b{"b", {0, 1, 2, 3}, {0, 1, 0, 1}};
  const std::vector<PlotSeries> both{a, b};
  const auto svg = svg_line_plot({"t", "x", "y"}, both);
  CHECK(svg.find("viewBox=\"0 0 800 600\"") != std::string::npos);
  std::size_t count = 0;
  for (auto pos = svg.find("<polyline"); pos != std::string::npos; pos = svg.find("<polyline", pos + 1)) ++count;
  CHECK(count >= 2);
  CHECK(svg.find("nan") == std::string::npos);

  PlotSeries lg{"log", {0.1, 0.01, 0.001}, {0.1, 0.01, 0.001}};
  const std::vector<PlotSeries> one{lg};
  const auto svg2 = svg_line_plot({"log", "x", "y", true, true}, one);
  CHECK(svg2.find("<polyline") != std::string::npos);
}
