#include "qbe/config.hpp"

#include <json.hpp>

#include <set>

namespace qbe {

using nlohmann::json;

namespace {

[[noreturn]] void field_error(const std::string& path, const std::string& what) {
  throw ParseError(path + ": " + what);
}

void reject_unknown(const json& obj, const std::string& path, const std::set<std::string>& allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key())) {
      field_error(path.empty() ? it.key() : path + "." + it.key(), "unknown key");
    }
  }
}

const json& require(const json& obj, const std::string& path, const char* key) {
  if (!obj.contains(key)) field_error(path.empty() ? key : path + "." + key, "missing key");
  return obj.at(key);
}

const json& require_object(const json& obj, const std::string& path, const char* key) {
  const json& v = require(obj, path, key);
  if (!v.is_object()) field_error(path.empty() ? key : path + "." + key, "expected an object");
  return v;
}

double as_real(const json& v, const std::string& path) {
  if (!v.is_number()) field_error(path, "expected a number");
  return v.get<double>();
}

RMatrix as_real_matrix(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) field_error(path, "expected a non-empty 2-D array of numbers");
  const auto rows = static_cast<Index>(v.size());
  Index cols = -1;
  for (const auto& row : v) {
    if (!row.is_array() || row.empty()) {
      field_error(path, "expected a non-empty 2-D array of numbers");
    }
    if (cols < 0) cols = static_cast<Index>(row.size());
    if (static_cast<Index>(row.size()) != cols) field_error(path, "ragged rows");
  }
  RMatrix m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      m(r, c) = as_real(v[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)],
                        path + "[" + std::to_string(r) + "][" + std::to_string(c) + "]");
    }
  }
  return m;
}

CVector as_amplitudes(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) field_error(path, "expected a non-empty array of [re, im] pairs");
  CVector out(static_cast<Index>(v.size()));
  for (std::size_t k = 0; k < v.size(); ++k) {
    const std::string at = path + "[" + std::to_string(k) + "]";
    const json& pair = v[k];
    if (!pair.is_array() || pair.size() != 2) field_error(at, "expected a [re, im] pair");
    out(static_cast<Index>(k)) = Complex(as_real(pair[0], at + "[0]"), as_real(pair[1], at + "[1]"));
  }
  return out;
}

json from_matrix(const RMatrix& m) {
  json rows = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json from_amplitudes(const CVector& v) {
  json out = json::array();
  for (Index k = 0; k < v.size(); ++k) out.push_back(json::array({v(k).real(), v(k).imag()}));
  return out;
}

std::size_t line_of(std::string_view text, std::size_t byte, std::size_t& column) {
  std::size_t line = 1, col = 1;
  for (std::size_t k = 0; k < byte && k < text.size(); ++k) {
    if (text[k] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  column = col;
  return line;
}

void apply_override(json& doc, const Override& ov) {
  if (ov.key.empty()) throw ParseError("override: empty key");
  json value;
  try {
    value = json::parse(ov.value);
  } catch (const json::parse_error&) {
    value = ov.value;
  }
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = ov.key.find('.', start);
    const std::string seg = ov.key.substr(start, dot == std::string::npos ? std::string::npos
                                                                          : dot - start);
    if (seg.empty()) throw ParseError("override " + ov.key + ": empty path segment");
    json* next = nullptr;
    if (node->is_array()) {
      std::size_t idx = 0;
      try {
        idx = std::stoul(seg);
      } catch (const std::exception&) {
        throw ParseError("override " + ov.key + ": '" + seg + "' is not an array index");
      }
      if (idx >= node->size()) throw ParseError("override " + ov.key + ": index out of range");
      next = &(*node)[idx];
    } else if (node->is_object() || node->is_null()) {
      next = &(*node)[seg];
    } else {
      throw ParseError("override " + ov.key + ": cannot descend into a scalar");
    }
    if (dot == std::string::npos) {
      *next = std::move(value);
      return;
    }
    node = next;
    start = dot + 1;
  }
}

}  // namespace

Override parse_override(std::string_view text) {
  const auto eq = text.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ParseError("override '" + std::string(text) + "': expected key=value");
  }
  return {std::string(text.substr(0, eq)), std::string(text.substr(eq + 1))};
}

ModelConfig load_model(std::string_view text, std::span<const Override> overrides) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    std::size_t col = 0;
    const std::size_t line = line_of(text, e.byte == 0 ? 0 : e.byte - 1, col);
    throw ParseError("line " + std::to_string(line) + ", column " + std::to_string(col) +
                     ": malformed model document");
  }
  if (!doc.is_object()) throw ParseError("model document: expected a top-level object");
  for (const auto& ov : overrides) apply_override(doc, ov);

  reject_unknown(doc, "", {"dims", "hbar", "h_qb", "h_be", "initial"});

  const json& jd = require(doc, "", "dims");
  if (!jd.is_array() || jd.size() != 3) field_error("dims", "expected 3 integers");
  std::array<Index, 3> dims{};
  for (std::size_t k = 0; k < 3; ++k) {
    const std::string at = "dims[" + std::to_string(k) + "]";
    if (!jd[k].is_number_integer()) field_error(at, "expected an integer");
    const auto v = jd[k].get<long long>();
    if (v <= 0) field_error(at, "factor dimension must be positive");
    dims[k] = static_cast<Index>(v);
  }
  check_capacity(dims[0] * dims[1] * dims[2], dimension_cap(), "dims");

  const double hbar = doc.contains("hbar") ? as_real(doc["hbar"], "hbar") : 1.0;

  const json& qb = require_object(doc, "", "h_qb");
  reject_unknown(qb, "h_qb", {"c", "gamma", "bath_family", "theta"});
  const double c = as_real(require(qb, "h_qb", "c"), "h_qb.c");
  const RMatrix gamma = as_real_matrix(require(qb, "h_qb", "gamma"), "h_qb.gamma");
  if (qb.contains("bath_family")) {
    const json& fam = qb["bath_family"];
    if (!fam.is_string() || fam.get<std::string>() != "rotated") {
      field_error("h_qb.bath_family", "only \"rotated\" is supported");
    }
  }
  std::vector<double> theta;
  const json& jt = require(qb, "h_qb", "theta");
  if (jt.is_array()) {
    if (jt.empty()) field_error("h_qb.theta", "expected a number or a non-empty array");
    for (std::size_t k = 0; k < jt.size(); ++k) {
      theta.push_back(as_real(jt[k], "h_qb.theta[" + std::to_string(k) + "]"));
    }
  } else {
    theta.push_back(as_real(jt, "h_qb.theta"));
  }

  const json& be = require_object(doc, "", "h_be");
  reject_unknown(be, "h_be", {"C", "kappa"});
  const double C = as_real(require(be, "h_be", "C"), "h_be.C");
  const RMatrix kappa = as_real_matrix(require(be, "h_be", "kappa"), "h_be.kappa");

  ModelConfig out;
  try {
    out.model = make_model(dims, c, gamma, theta, C, kappa, hbar);
  } catch (const ModelError& e) {
    const std::string msg = e.what();
    if (msg.rfind("coeffs shape", 0) == 0) {
      const bool qb_side = gamma.rows() != dims[0] || gamma.cols() != dims[1];
      throw ModelError((qb_side ? "h_qb.gamma: " : "h_be.kappa: ") + msg);
    }
    throw;
  }
  out.model.validate();

  CVector q, b, e;
  if (doc.contains("initial")) {
    const json& init = doc["initial"];
    if (!init.is_object()) field_error("initial", "expected an object");
    reject_unknown(init, "initial", {"q_amps", "b_amps", "e_amps"});
    q = as_amplitudes(require(init, "initial", "q_amps"), "initial.q_amps");
    b = as_amplitudes(require(init, "initial", "b_amps"), "initial.b_amps");
    e = as_amplitudes(require(init, "initial", "e_amps"), "initial.e_amps");
  } else {
    const ProductState d = robust_product_state(dims, 0);
    q = d.q;
    b = d.b;
    e = d.e;
  }
  if (q.size() != dims[0] || b.size() != dims[1] || e.size() != dims[2]) {
    throw ShapeError("initial: amplitude lengths do not match dims");
  }
  out.initial = make_product_state(q, b, e);
  return out;
}

std::string serialize_model(const ModelConfig& config) {
  const TripartiteModel& m = config.model;
  json doc;
  doc["dims"] = json::array({m.dims[0], m.dims[1], m.dims[2]});
  doc["hbar"] = m.hbar;
  json qb;
  qb["c"] = m.h_qb.coupling;
  qb["gamma"] = from_matrix(m.h_qb.coeffs);
  qb["bath_family"] = "rotated";
  if (m.theta.size() == 1) {
    qb["theta"] = m.theta[0];
  } else {
    qb["theta"] = m.theta;
  }
  doc["h_qb"] = std::move(qb);
  doc["h_be"] = {{"C", m.h_be.coupling}, {"kappa", from_matrix(m.h_be.coeffs)}};
  doc["initial"] = {{"q_amps", from_amplitudes(config.initial.q)},
                    {"b_amps", from_amplitudes(config.initial.b)},
                    {"e_amps", from_amplitudes(config.initial.e)}};
  return doc.dump(2) + "\n";
}

}  // namespace qbe
