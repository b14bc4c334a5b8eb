#include "cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "qbe/config.hpp"
#include "qbe/dynamics.hpp"
#include "qbe/protocol.hpp"
#include "qbe/report.hpp"
#include "qbe/spectral.hpp"

namespace qbe::cli {

namespace fs = std::filesystem;

namespace {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvariantFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Manifest {
  std::string command;
  std::string model_path;
  std::string output_dir;
  std::vector<std::string> overrides;
  bool force = false;
  long long seed = 0;
};

struct RunOptions {
  double t_end = -1;       // absolute; negative means use t_end_tau
  double t_end_tau = 5.0;  // in units of the predicted tau
  Index points = 401;
  std::vector<Index> pair{0, 1};
  std::vector<double> ladder{0.1, 0.05, 0.02, 0.01, 0.005};
  double threshold = 0.99;
  double plateau_fraction = 0.1;
  int repeat = 1;
  std::vector<double> weights;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read model file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void prepare_output(const Manifest& m) {
  std::error_code ec;
  if (fs::exists(m.output_dir, ec)) {
    if (!fs::is_directory(m.output_dir, ec)) {
      throw IoError("output path '" + m.output_dir + "' exists and is not a directory");
    }
    if (!fs::is_empty(m.output_dir, ec) && !m.force) {
      throw IoError("output directory '" + m.output_dir + "' is not empty; pass --force to overwrite");
    }
  } else if (!fs::create_directories(m.output_dir, ec) || ec) {
    throw IoError("cannot create output directory '" + m.output_dir + "'");
  }
}

void write_file(const Manifest& m, const std::string& name, const std::string& text) {
  const fs::path path = fs::path(m.output_dir) / name;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
}

ModelConfig load(const Manifest& m) {
  std::vector<Override> ovs;
  for (const auto& o : m.overrides) ovs.push_back(parse_override(o));
  return load_model(read_file(m.model_path), ovs);
}

void require_clean(const std::vector<std::string>& violations) {
  if (violations.empty()) return;
  std::string msg = "invariant check failed:";
  for (const auto& v : violations) msg += "\n  " + v;
  throw InvariantFailure(msg);
}

PairList tracked_pairs(const RunOptions& o, const TripartiteModel& model) {
  if (model.dims[0] < 2) return {};
  if (o.pair.size() != 2) throw ContractError("--pair expects two indices");
  return {{o.pair[0], o.pair[1]}};
}

struct Analysis {
  std::vector<PerturbationRecord> records;
  RobustSelection selection;
  PerturbationSummary summary;
};

Analysis analyze(const ModelConfig& cfg) {
  Analysis a;
  a.records = match_spectrum(cfg.model);
  a.selection = select_robust_bath_state(cfg.model, a.records);
  const auto split = norm_split(a.records, product_state_vector(cfg.initial, cfg.model.dims));
  a.summary = summarize(a.records, cfg.model, a.selection.i0, split);
  require_clean(check_invariants(a.records, a.summary, cfg.model));
  return a;
}

void write_manifest(const Manifest& m) {
  std::string text = "command=" + m.command + "\nmodel=" + m.model_path + "\nseed=" + std::to_string(m.seed) + "\n";
  for (const auto& o : m.overrides) text += "override=" + o + "\n";
  write_file(m, "manifest.txt", text);
}

void cmd_analyze(const Manifest& m, std::ostream& out) {
  const auto cfg = load(m);
  prepare_output(m);
  const auto a = analyze(cfg);
  write_file(m, "records.csv", records_csv(a.records));
  write_file(m, "summary.txt", summary_kv(a.summary));
  write_manifest(m);
  out << "analyze: " << a.records.size() << " records, eps_max=" << format_real(a.summary.eps_max)
      << ", tau=" << (a.summary.tau_infinite ? std::string("inf") : format_real(a.summary.tau)) << "\n";
}

void cmd_evolve(const Manifest& m, const RunOptions& o, std::ostream& out) {
  const auto cfg = load(m);
  prepare_output(m);
  const auto a = analyze(cfg);
  double t_end = o.t_end;
  if (t_end <= 0) {
    t_end = a.summary.tau_infinite ? 100.0 * cfg.model.hbar / cfg.model.C() : o.t_end_tau * a.summary.tau;
  }
  const TimeGrid grid{0.0, t_end, o.points};
  const auto pairs = tracked_pairs(o, cfg.model);
  const auto tr = trace_decoherence(cfg.model, cfg.initial, grid, pairs);
  write_file(m, "trace.csv", trace_csv(tr));
  write_file(m, "records.csv", records_csv(a.records));
  write_file(m, "summary.txt", summary_kv(a.summary));
  const std::vector<PlotSeries> fid{{"Q+B fidelity", tr.times, tr.qb_fidelity}};
  write_file(m, "fidelity.svg", svg_line_plot({"Q+B fidelity", "t", "F(t)"}, fid));
  if (!pairs.empty()) {
    const std::vector<PlotSeries> z{{"|z_" + std::to_string(pairs[0].first) + std::to_string(pairs[0].second) + "|",
                                     tr.times, tr.z_abs[0]}};
    write_file(m, "z_abs.svg", svg_line_plot({"Correlation amplitude", "t", "|z(t)|"}, z));
  }
  write_manifest(m);
  out << "evolve: " << tr.times.size() << " grid points to t=" << format_real(t_end) << "\n";
}

ProtocolConfig protocol_config(const RunOptions& o, const TripartiteModel& model, bool with_ladder) {
  ProtocolConfig pc;
  if (with_ladder) pc.ratio_ladder = o.ladder;
  pc.fidelity_threshold = o.threshold;
  pc.plateau_fraction = o.plateau_fraction;
  pc.grid_points = o.points;
  pc.tracked_pairs = tracked_pairs(o, model);
  pc.repeat_count = o.repeat;
  return pc;
}

std::string scaling_plot(const SweepResult& sweep) {
  PlotSeries eps{"eps_max", {}, {}}, ref{"c/C", {}, {}};
  for (const auto& r : sweep.rungs) {
    eps.x.push_back(r.ratio);
    eps.y.push_back(r.eps_max);
    ref.x.push_back(r.ratio);
    ref.y.push_back(r.ratio);
  }
  const std::vector<PlotSeries> series{eps, ref};
  return svg_line_plot({"eps_max against c/C", "c/C", "eps_max", true, true}, series);
}

void cmd_protocol(const Manifest& m, const RunOptions& o, bool with_ladder, std::ostream& out) {
  const auto cfg = load(m);
  prepare_output(m);
  const auto rep = run_protocol(cfg.model, cfg.initial, protocol_config(o, cfg.model, with_ladder));
  require_clean(rep.invariant_violations);
  write_file(m, "report.txt", report_kv(rep));
  write_file(m, "records.csv", records_csv(rep.records));
  write_file(m, "trace.csv", trace_csv(rep.trace));
  const std::vector<PlotSeries> fid{{"Q+B fidelity", rep.trace.times, rep.trace.qb_fidelity}};
  write_file(m, "fidelity.svg", svg_line_plot({"Q+B fidelity over the plateau window", "t", "F(t)"}, fid));
  if (rep.sweep) {
    write_file(m, "scaling.csv", scaling_csv(*rep.sweep));
    write_file(m, "scaling.svg", scaling_plot(*rep.sweep));
  }
  write_manifest(m);
  out << "protocol: i0=" << rep.selection.i0 << " plateau_ok=" << (rep.plateau_ok ? "true" : "false")
      << " min_fidelity=" << format_real(rep.min_plateau_fidelity) << "\n";
}

void cmd_sweep(const Manifest& m, const RunOptions& o, std::ostream& out) {
  const auto cfg = load(m);
  prepare_output(m);
  const auto sweep = sweep_ratio(cfg.model, cfg.initial, protocol_config(o, cfg.model, true));
  write_file(m, "scaling.csv", scaling_csv(sweep));
  write_file(m, "summary.txt", sweep_kv(sweep));
  write_file(m, "scaling.svg", scaling_plot(sweep));
  write_manifest(m);
  out << "sweep: slope=" << format_real(sweep.fit.slope) << " r2=" << format_real(sweep.fit.r2) << "\n";
}

void cmd_baseline(const Manifest& m, const RunOptions& o, std::ostream& out) {
  const auto cfg = load(m);
  prepare_output(m);
  const auto& model = cfg.model;
  TwoBodyBaseline base;
  base.gamma = model.h_qb.coeffs;
  base.c = model.c();
  base.hbar = model.hbar;
  base.bath_weights = o.weights;
  if (base.bath_weights.empty()) {
    base.bath_weights.assign(static_cast<std::size_t>(base.gamma.cols()), 1.0 / static_cast<double>(base.gamma.cols()));
  }
  if (o.pair.size() != 2) throw ContractError("--pair expects two indices");
  const Index p = o.pair[0], p2 = o.pair[1];
  double t_end = o.t_end;
  if (t_end <= 0) {
    double spread = 0;
    for (Index q = 0; q < base.gamma.cols(); ++q) {
      spread = std::max(spread, std::abs(base.c * (base.gamma(p, q) - base.gamma(p2, q))));
    }
    t_end = spread > 0 ? 4 * std::numbers::pi * base.hbar / spread : 10.0;
  }
  const TimeGrid grid{0.0, t_end, o.points};
  const auto closed = baseline_z_closed_form(base, p, p2, grid);
  const auto sim = baseline_z_simulated(base, model.h_qb.right, p, p2, grid);
  const auto times = grid.times();
  write_file(m, "baseline.csv", baseline_csv(times, closed, sim));
  PlotSeries a{"closed form", times, {}}, b{"simulated", times, {}};
  double dev = 0;
  for (std::size_t k = 0; k < times.size(); ++k) {
    a.y.push_back(std::abs(closed[k]));
    b.y.push_back(std::abs(sim[k]));
    dev = std::max(dev, std::abs(closed[k] - sim[k]));
  }
  const std::vector<PlotSeries> series{a, b};
  write_file(m, "baseline.svg", svg_line_plot({"Two-body correlation amplitude", "t", "|z(t)|"}, series));
  write_manifest(m);
  if (dev > 1e-10) throw InvariantFailure("baseline: simulated z deviates from the closed form by " + format_real(dev));
  out << "baseline: max deviation " << format_real(dev) << "\n";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Qubit-bath-environment decoherence suppression analysis"};
  app.require_subcommand(1);
  Manifest m;
  RunOptions o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--model", m.model_path, "Model config (JSON)")->required();
    sub->add_option("--out", m.output_dir, "Output directory")->required();
    sub->add_option("--override", m.overrides, "key=value applied before validation")->allow_extra_args(false);
    sub->add_flag("--force", m.force, "Write into a non-empty output directory");
    sub->add_option("--seed", m.seed, "Seed recorded in the manifest");
  };
  auto timing = [&](CLI::App* sub) {
    sub->add_option("--t-end", o.t_end, "Absolute end time");
    sub->add_option("--points", o.points, "Grid points")->check(CLI::Range(Index{2}, Index{1} << 24));
    sub->add_option("--pair", o.pair, "Tracked (p, p') pair")->expected(2);
  };

  auto* analyze_cmd = app.add_subcommand("analyze", "Perturbative eigen-structure and summary");
  common(analyze_cmd);
  auto* evolve_cmd = app.add_subcommand("evolve", "Exact evolution trace of the configured state");
  common(evolve_cmd);
  timing(evolve_cmd);
  evolve_cmd->add_option("--t-end-tau", o.t_end_tau, "End time in units of tau");
  auto* protocol_cmd = app.add_subcommand("protocol", "Robust-state suppression protocol");
  common(protocol_cmd);
  timing(protocol_cmd);
  protocol_cmd->add_option("--threshold", o.threshold, "Plateau fidelity threshold");
  protocol_cmd->add_option("--plateau-fraction", o.plateau_fraction, "Plateau window as a fraction of tau");
  protocol_cmd->add_option("--repeat", o.repeat, "Protocol repetitions");
  bool protocol_ladder = false;
  protocol_cmd->add_flag("--with-sweep", protocol_ladder, "Also run the c/C sweep");
  auto* protocol_ladder_opt = protocol_cmd->add_option("--ladder", o.ladder, "c/C ladder, descending");
  auto* sweep_cmd = app.add_subcommand("sweep", "eps_max against c/C over a ladder");
  common(sweep_cmd);
  sweep_cmd->add_option("--ladder", o.ladder, "c/C ladder, descending");
  auto* baseline_cmd = app.add_subcommand("baseline", "Two-body Q+B correlation amplitude");
  common(baseline_cmd);
  timing(baseline_cmd);
  baseline_cmd->add_option("--weights", o.weights, "Bath mixture weights");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }

  try {
    if (*analyze_cmd) {
      m.command = "analyze";
      cmd_analyze(m, out);
    } else if (*evolve_cmd) {
      m.command = "evolve";
      cmd_evolve(m, o, out);
    } else if (*protocol_cmd) {
      m.command = "protocol";
      cmd_protocol(m, o, protocol_ladder || protocol_ladder_opt->count() > 0, out);
    } else if (*sweep_cmd) {
      m.command = "sweep";
      cmd_sweep(m, o, out);
    } else if (*baseline_cmd) {
      m.command = "baseline";
      cmd_baseline(m, o, out);
    }
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const InvariantFailure& e) {
    err << "error: " << e.what() << "\n";
    return kNumeric;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kNumeric;
  } catch (const Error& e) {
    err << "validation error: " << e.what() << "\n";
    return kValidation;
  }
  return kOk;
}

}  // namespace qbe::cli
