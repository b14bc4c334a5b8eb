#pragma once

#include <span>
#include <string>
#include <vector>

#include "qbe/dynamics.hpp"
#include "qbe/protocol.hpp"
#include "qbe/spectral.hpp"

namespace qbe {

/// 17 significant digits, locale independent; "inf", "-inf", "nan" for non-finite values.
std::string format_real(double v);

/// p,i,j,e0,e_exact,lambda,epsilon,overlap
std::string records_csv(std::span<const PerturbationRecord> records);

/// time, then z_abs_p_p', re_rho_p_p', im_rho_p_p' per tracked pair, then qb_fidelity.
std::string trace_csv(const DecoherenceTrace& trace);

/// ratio,c,C,i0,eps_max,lambda_max,tau,n1,n2,k_factor
std::string scaling_csv(const SweepResult& sweep);

/// time,re_z_closed,im_z_closed,abs_z_closed,re_z_simulated,im_z_simulated,abs_z_simulated
std::string baseline_csv(std::span<const double> times, std::span<const Complex> closed,
                         std::span<const Complex> simulated);

/// Flat `key=value` lines.
std::string summary_kv(const PerturbationSummary& summary);
std::string report_kv(const ProtocolReport& report);
std::string sweep_kv(const SweepResult& sweep);

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
};

/// Static 800x600 SVG line plot; non-finite points are skipped.
std::string svg_line_plot(const PlotSpec& spec, std::span<const PlotSeries> series);

}  // namespace qbe
