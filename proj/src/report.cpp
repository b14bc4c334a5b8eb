#include "qbe/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

namespace qbe {

namespace {

std::string format_precision(double v, int precision) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, precision);
  return std::string(buf, res.ptr);
}

std::string pair_suffix(const std::pair<Index, Index>& pr) {
  return std::to_string(pr.first) + "_" + std::to_string(pr.second);
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

}  // namespace

std::string format_real(double v) { return format_precision(v, 17); }

std::string records_csv(std::span<const PerturbationRecord> records) {
  std::string out = "p,i,j,e0,e_exact,lambda,epsilon,overlap\n";
  for (const auto& r : records) {
    out += std::to_string(r.p) + "," + std::to_string(r.i) + "," + std::to_string(r.j) + "," +
           format_real(r.e0) + "," + format_real(r.e_exact) + "," + format_real(r.lambda) + "," +
           format_real(r.epsilon) + "," + format_real(r.overlap) + "\n";
  }
  return out;
}

std::string trace_csv(const DecoherenceTrace& trace) {
  std::string out = "time";
  for (const auto& pr : trace.pairs) {
    const auto s = pair_suffix(pr);
    out += ",z_abs_" + s + ",re_rho_" + s + ",im_rho_" + s;
  }
  out += ",qb_fidelity\n";
  for (std::size_t k = 0; k < trace.times.size(); ++k) {
    out += format_real(trace.times[k]);
    for (std::size_t q = 0; q < trace.pairs.size(); ++q) {
      out += "," + format_real(trace.z_abs[q][k]) + "," + format_real(trace.rho_q_offdiag[q][k].real()) +
             "," + format_real(trace.rho_q_offdiag[q][k].imag());
    }
    out += "," + format_real(trace.qb_fidelity[k]) + "\n";
  }
  return out;
}

std::string scaling_csv(const SweepResult& sweep) {
  std::string out = "ratio,c,C,i0,eps_max,lambda_max,tau,n1,n2,k_factor\n";
  for (const auto& r : sweep.rungs) {
    out += format_real(r.ratio) + "," + format_real(r.c) + "," + format_real(r.C) + "," +
           std::to_string(r.i0) + "," + format_real(r.eps_max) + "," + format_real(r.lambda_max) + "," +
           format_real(r.tau) + "," + format_real(r.n1) + "," + format_real(r.n2) + "," +
           format_real(r.k_factor) + "\n";
  }
  return out;
}

std::string baseline_csv(std::span<const double> times, std::span<const Complex> closed,
                         std::span<const Complex> simulated) {
  std::string out =
      "time,re_z_closed,im_z_closed,abs_z_closed,re_z_simulated,im_z_simulated,abs_z_simulated\n";
  for (std::size_t k = 0; k < times.size(); ++k) {
    out += format_real(times[k]) + "," + format_real(closed[k].real()) + "," +
           format_real(closed[k].imag()) + "," + format_real(std::abs(closed[k])) + "," +
           format_real(simulated[k].real()) + "," + format_real(simulated[k].imag()) + "," +
           format_real(std::abs(simulated[k])) + "\n";
  }
  return out;
}

std::string summary_kv(const PerturbationSummary& s) {
  std::string out;
  out += "eps_max=" + format_real(s.eps_max) + "\n";
  out += "eps_max_i0=" + format_real(s.eps_max_i0) + "\n";
  out += "lambda_max=" + format_real(s.lambda_max) + "\n";
  out += "tau=" + (s.tau_infinite ? std::string("inf") : format_real(s.tau)) + "\n";
  out += "n1=" + format_real(s.n1) + "\n";
  out += "n2=" + format_real(s.n2) + "\n";
  out += "ratio=" + format_real(s.ratio) + "\n";
  out += "hbar=" + format_real(s.hbar) + "\n";
  out += "i0=" + std::to_string(s.i0) + "\n";
  return out;
}

std::string sweep_kv(const SweepResult& sweep) {
  std::string out;
  out += "scaling_slope=" + format_real(sweep.fit.slope) + "\n";
  out += "scaling_intercept=" + format_real(sweep.fit.intercept) + "\n";
  out += "scaling_r2=" + format_real(sweep.fit.r2) + "\n";
  out += "k_spread=" + format_real(sweep.k_spread) + "\n";
  out += "rungs=" + std::to_string(sweep.rungs.size()) + "\n";
  return out;
}

std::string report_kv(const ProtocolReport& rep) {
  std::string out;
  out += "chosen_i0=" + std::to_string(rep.selection.i0) + "\n";
  out += "i0_tie=" + std::string(rep.selection.tie ? "true" : "false") + "\n";
  for (const auto& c : rep.selection.candidates) {
    const auto k = std::to_string(c.i);
    out += "candidate_" + k + "_diagonal_figure=" + format_real(c.diagonal_figure) + "\n";
    out += "candidate_" + k + "_lambda_max=" + format_real(c.lambda_max) + "\n";
  }
  out += summary_kv(rep.summary);
  out += "predicted_tau=" + (rep.summary.tau_infinite ? std::string("inf") : format_real(rep.summary.tau)) + "\n";
  out += "exact_limit=" + std::string(rep.exact_limit ? "true" : "false") + "\n";
  out += "weak_coupling_breach=" + std::string(rep.weak_coupling_breach ? "true" : "false") + "\n";
  out += "plateau_time=" + format_real(rep.plateau_time) + "\n";
  out += "min_plateau_fidelity=" + format_real(rep.min_plateau_fidelity) + "\n";
  out += "plateau_ok=" + std::string(rep.plateau_ok ? "true" : "false") + "\n";
  // The plateau threshold is a configurable default, not a derived quantity.
  out += "plateau_criterion=artifact_default\n";
  out += "error_probability_bound=" + format_real(rep.error_probability_bound) + "\n";
  out += "repeat_count=" + std::to_string(rep.steps.size()) + "\n";
  for (std::size_t k = 0; k < rep.steps.size(); ++k) {
    out += "step_" + std::to_string(k) + "_min_fidelity=" + format_real(rep.steps[k].min_fidelity) + "\n";
  }
  bool ambiguous = false;
  for (const auto& r : rep.records) ambiguous = ambiguous || r.ambiguous;
  out += "ambiguous_matches=" + std::string(ambiguous ? "true" : "false") + "\n";
  out += "invariant_violations=" + std::to_string(rep.invariant_violations.size()) + "\n";
  if (rep.sweep) out += sweep_kv(*rep.sweep);
  return out;
}

std::string svg_line_plot(const PlotSpec& spec, std::span<const PlotSeries> series) {
  constexpr double W = 800, H = 600, left = 90, right = 30, top = 50, bottom = 70;
  const double pw = W - left - right, ph = H - top - bottom;
  auto tx = [&](double v) { return spec.log_x ? std::log10(v) : v; };
  auto ty = [&](double v) { return spec.log_y ? std::log10(v) : v; };
  auto usable = [&](double x, double y) {
    return std::isfinite(x) && std::isfinite(y) && (!spec.log_x || x > 0) && (!spec.log_y || y > 0);
  };

  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    for (std::size_t k = 0; k < std::min(s.x.size(), s.y.size()); ++k) {
      if (!usable(s.x[k], s.y[k])) continue;
      x0 = std::min(x0, tx(s.x[k]));
      x1 = std::max(x1, tx(s.x[k]));
      y0 = std::min(y0, ty(s.y[k]));
      y1 = std::max(y1, ty(s.y[k]));
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 - x0 <= 0) x1 = x0 + 1;
  if (y1 - y0 <= 1e-300) {
    const double pad = std::max(std::abs(y0) * 1e-3, 1e-12);
    y0 -= pad;
    y1 += pad;
  }
  const double ypad = 0.05 * (y1 - y0);
  y0 -= ypad;
  y1 += ypad;
  auto px = [&](double v) { return left + (tx(v) - x0) / (x1 - x0) * pw; };
  auto py = [&](double v) { return top + (1.0 - (ty(v) - y0) / (y1 - y0)) * ph; };
  auto num = [](double v) { return format_precision(v, 6); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 800 600\" width=\"800\" height=\"600\">\n";
  svg << "<rect x=\"0\" y=\"0\" width=\"800\" height=\"600\" fill=\"white\"/>\n";
  svg << "<text x=\"400\" y=\"28\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"18\">"
      << xml_escape(spec.title) << "</text>\n";
  svg << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(pw) << "\" height=\""
      << num(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double fx = x0 + (x1 - x0) * k / 4.0, fy = y0 + (y1 - y0) * k / 4.0;
    const double sx = left + pw * k / 4.0, sy = top + ph * (1.0 - k / 4.0);
    const double lx = spec.log_x ? std::pow(10.0, fx) : fx, ly = spec.log_y ? std::pow(10.0, fy) : fy;
    svg << "<line x1=\"" << num(sx) << "\" y1=\"" << num(top + ph) << "\" x2=\"" << num(sx) << "\" y2=\""
        << num(top + ph + 6) << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << num(sx) << "\" y=\"" << num(top + ph + 22)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << format_precision(lx, 4)
        << "</text>\n";
    svg << "<line x1=\"" << num(left - 6) << "\" y1=\"" << num(sy) << "\" x2=\"" << num(left) << "\" y2=\""
        << num(sy) << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << num(left - 10) << "\" y=\"" << num(sy + 4)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">" << format_precision(ly, 6)
        << "</text>\n";
  }
  svg << "<text x=\"" << num(left + pw / 2) << "\" y=\"" << num(H - 20)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">" << xml_escape(spec.x_label)
      << "</text>\n";
  svg << "<text x=\"20\" y=\"" << num(top + ph / 2) << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
      << "font-size=\"14\" transform=\"rotate(-90 20 " << num(top + ph / 2) << ")\">" << xml_escape(spec.y_label)
      << "</text>\n";

  static constexpr const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = palette[s % std::size(palette)];
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    bool first = true;
    const auto& sr = series[s];
    for (std::size_t k = 0; k < std::min(sr.x.size(), sr.y.size()); ++k) {
      if (!usable(sr.x[k], sr.y[k])) continue;
      if (!first) svg << ' ';
      svg << num(px(sr.x[k])) << ',' << num(py(sr.y[k]));
      first = false;
    }
    svg << "\"/>\n";
    const double ly = top + 18 + 18.0 * static_cast<double>(s);
    svg << "<line x1=\"" << num(left + pw - 170) << "\" y1=\"" << num(ly) << "\" x2=\"" << num(left + pw - 145)
        << "\" y2=\"" << num(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << num(left + pw - 140) << "\" y=\"" << num(ly + 4)
        << "\" font-family=\"sans-serif\" font-size=\"12\">" << xml_escape(sr.label) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace qbe
