#include "qbe/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

namespace qbe {

namespace {

struct Reference {
  CVector ket;
  Index p = 0, i = 0, j = 0;
  double e0 = 0;
  bool degenerate = false;
  bool ambiguous = false;
};

// Range vector of a rank-1 projector; higher ranks are expanded into an
// orthonormal basis of the range.
std::vector<CVector> range_basis(const CMatrix& projector) {
  const auto eig = hermitian_eig(projector);
  std::vector<CVector> out;
  for (Index k = eig.eigenvalues.size(); k-- > 0;) {
    if (eig.eigenvalues(k) > 0.5) out.push_back(eig.eigenvectors.col(k));
  }
  return out;
}

// Exact eigenspaces: runs of eigenvalues within tol of their neighbour.
std::vector<std::vector<Index>> eigenspaces(const ExactSpectrum& exact,
                                            std::span<const Index> candidates, double tol) {
  std::vector<std::vector<Index>> groups;
  for (Index n : candidates) {
    if (!groups.empty() &&
        exact.eigenvalues(n) - exact.eigenvalues(groups.back().back()) <= tol) {
      groups.back().push_back(n);
    } else {
      groups.push_back({n});
    }
  }
  return groups;
}

double exact_tolerance(const ExactSpectrum& exact, const MatchOptions& opts) {
  const double scale = exact.eigenvalues.size() ? exact.eigenvalues.cwiseAbs().maxCoeff() : 0.0;
  return opts.exact_tol * std::max(1.0, scale);
}

// Unitary polar factor of a (rows >= cols): the isometry closest to a.
CMatrix polar_isometry(const CMatrix& a) {
  Eigen::JacobiSVD<CMatrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return svd.matrixU() * svd.matrixV().adjoint();
}

// One-to-one labelling of adapted kets by their dominant bare triple.
void label_references(std::vector<Reference>& refs, std::span<const UnperturbedState> bare) {
  struct Cand {
    double w;
    std::size_t r, b;
  };
  std::vector<Cand> cands;
  for (std::size_t r = 0; r < refs.size(); ++r) {
    for (std::size_t b = 0; b < bare.size(); ++b) {
      cands.push_back({std::norm(bare[b].ket.dot(refs[r].ket)), r, b});
    }
  }
  std::stable_sort(cands.begin(), cands.end(), [](const Cand& x, const Cand& y) { return x.w > y.w; });
  std::vector<bool> ref_done(refs.size(), false), bare_done(bare.size(), false);
  for (const auto& c : cands) {
    if (ref_done[c.r] || bare_done[c.b]) continue;
    ref_done[c.r] = bare_done[c.b] = true;
    refs[c.r].p = bare[c.b].p;
    refs[c.r].i = bare[c.b].i;
    refs[c.r].j = bare[c.b].j;
  }
}

// Zeroth-order adapted references for a degenerate cluster.
std::vector<Reference> adapted_references(std::span<const UnperturbedState> cluster,
                                          const CMatrix& h_qb, const ExactSpectrum& exact,
                                          const MatchOptions& opts) {
  const Index g = static_cast<Index>(cluster.size());
  const Index n = exact.eigenvectors.rows();
  CMatrix k(n, g);
  for (Index c = 0; c < g; ++c) k.col(c) = cluster[static_cast<std::size_t>(c)].ket;

  const CMatrix restricted = k.adjoint() * h_qb * k;
  const auto first = hermitian_eig(restricted);
  CMatrix adapted = k * first.eigenvectors;
  std::vector<bool> ambiguous(static_cast<std::size_t>(g), false);

  // Ties of the first-order shifts leave the adapted basis undetermined; fix
  // it with the projection of the exact eigenvectors onto the tied subspace.
  const double tie_tol = opts.cluster_tol * std::max(1.0, max_abs(restricted));
  Index start = 0;
  while (start < g) {
    Index stop = start + 1;
    while (stop < g && first.eigenvalues(stop) - first.eigenvalues(stop - 1) <= tie_tol) ++stop;
    const Index s = stop - start;
    if (s > 1) {
      const CMatrix sub = adapted.middleCols(start, s);
      const CMatrix coords = sub.adjoint() * exact.eigenvectors;  // s x n
      std::vector<Index> order(static_cast<std::size_t>(n));
      std::iota(order.begin(), order.end(), Index{0});
      std::vector<double> w(static_cast<std::size_t>(n));
      for (Index m = 0; m < n; ++m) w[static_cast<std::size_t>(m)] = coords.col(m).squaredNorm();
      std::stable_sort(order.begin(), order.end(), [&](Index x, Index y) {
        return w[static_cast<std::size_t>(x)] > w[static_cast<std::size_t>(y)];
      });
      bool amb = false;
      if (s < n) {
        amb = w[static_cast<std::size_t>(order[s - 1])] - w[static_cast<std::size_t>(order[s])] <
              opts.overlap_gap;
      }
      CMatrix picked(s, s);
      for (Index c = 0; c < s; ++c) picked.col(c) = coords.col(order[static_cast<std::size_t>(c)]);
      Eigen::JacobiSVD<CMatrix> svd(picked);
      if (svd.singularValues().minCoeff() > 1e-8) {
        adapted.middleCols(start, s) = sub * polar_isometry(picked);
      } else {
        amb = true;
      }
      for (Index c = start; c < stop; ++c) ambiguous[static_cast<std::size_t>(c)] = amb;
    }
    start = stop;
  }

  std::vector<Reference> refs;
  for (Index c = 0; c < g; ++c) {
    Reference r;
    r.ket = adapted.col(c);
    r.e0 = cluster.front().e0;
    r.degenerate = true;
    r.ambiguous = ambiguous[static_cast<std::size_t>(c)];
    refs.push_back(std::move(r));
  }
  label_references(refs, cluster);
  return refs;
}

// Assigns references to exact eigenspaces (capacity = eigenspace dimension)
// by descending weight, then gauge-fixes each eigenspace against its
// references with the polar (Procrustes) rotation.
std::vector<PerturbationRecord> assign(const ExactSpectrum& exact, std::span<const Index> candidates,
                                       std::span<const Reference> refs, const MatchOptions& opts) {
  const auto spaces = eigenspaces(exact, candidates, exact_tolerance(exact, opts));
  const std::size_t nd = spaces.size(), nr = refs.size();

  std::vector<std::vector<double>> weight(nd, std::vector<double>(nr, 0.0));
  for (std::size_t d = 0; d < nd; ++d) {
    for (std::size_t m = 0; m < nr; ++m) {
      double w = 0;
      for (Index n : spaces[d]) w += std::norm(exact.eigenvectors.col(n).dot(refs[m].ket));
      weight[d][m] = w;
    }
  }

  struct Pair {
    double w;
    std::size_t d, m;
  };
  std::vector<Pair> pairs;
  for (std::size_t d = 0; d < nd; ++d) {
    for (std::size_t m = 0; m < nr; ++m) pairs.push_back({weight[d][m], d, m});
  }
  std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& x, const Pair& y) { return x.w > y.w; });

  std::vector<std::size_t> capacity(nd);
  for (std::size_t d = 0; d < nd; ++d) capacity[d] = spaces[d].size();
  std::vector<std::optional<std::size_t>> owner(nr);
  std::vector<bool> ambiguous(nr, false);
  std::vector<std::optional<Index>> rival(nr);
  for (const auto& pr : pairs) {
    if (owner[pr.m] || capacity[pr.d] == 0) continue;
    for (std::size_t d2 = 0; d2 < nd; ++d2) {
      if (d2 == pr.d || capacity[d2] == 0) continue;
      if (weight[d2][pr.m] > pr.w - opts.overlap_gap) {
        ambiguous[pr.m] = true;
        rival[pr.m] = spaces[d2].front();
        break;
      }
    }
    owner[pr.m] = pr.d;
    --capacity[pr.d];
  }

  for (std::size_t m = 0; m < nr; ++m) {
    if (!owner[m]) throw NumericError("match: reference ket left unassigned");
    if ((ambiguous[m] || refs[m].ambiguous) && !opts.degenerate_path) {
      throw DegeneracyError("match: exact eigenvectors claim triple (" + std::to_string(refs[m].p) +
                            "," + std::to_string(refs[m].i) + "," + std::to_string(refs[m].j) +
                            ") with overlap gap below " + std::to_string(opts.overlap_gap) +
                            "; use the degenerate-subspace path");
    }
  }

  std::vector<PerturbationRecord> records;
  for (std::size_t d = 0; d < nd; ++d) {
    std::vector<std::size_t> owned;
    for (std::size_t m = 0; m < nr; ++m) {
      if (owner[m] == d) owned.push_back(m);
    }
    if (owned.empty()) continue;
    const Index dim = static_cast<Index>(spaces[d].size());
    const Index s = static_cast<Index>(owned.size());
    CMatrix v(exact.eigenvectors.rows(), dim);
    for (Index c = 0; c < dim; ++c) v.col(c) = exact.eigenvectors.col(spaces[d][static_cast<std::size_t>(c)]);
    CMatrix r(exact.eigenvectors.rows(), s);
    for (Index c = 0; c < s; ++c) r.col(c) = refs[owned[static_cast<std::size_t>(c)]].ket;
    const CMatrix fixed = v * polar_isometry(v.adjoint() * r);  // N x s

    for (Index c = 0; c < s; ++c) {
      const Reference& ref = refs[owned[static_cast<std::size_t>(c)]];
      PerturbationRecord rec;
      rec.p = ref.p;
      rec.i = ref.i;
      rec.j = ref.j;
      rec.e0 = ref.e0;
      // Within one eigenspace the eigenvalues agree to exact_tol; use the mean.
      double e = 0;
      for (Index n : spaces[d]) e += exact.eigenvalues(n);
      rec.e_exact = e / static_cast<double>(dim);
      rec.lambda = rec.e_exact - rec.e0;
      rec.exact_index = spaces[d][static_cast<std::size_t>(std::min(c, dim - 1))];
      rec.eigenvector = fixed.col(c);
      rec.reference = ref.ket;
      rec.overlap = std::clamp(ref.ket.dot(rec.eigenvector).real(), 0.0, 1.0);
      rec.epsilon = std::sqrt(std::max(0.0, 1.0 - rec.overlap * rec.overlap));
      rec.correction = rec.eigenvector - rec.overlap * rec.reference;
      rec.residual_vector_norm = rec.correction.norm();
      rec.degenerate = ref.degenerate;
      rec.ambiguous = ambiguous[owned[static_cast<std::size_t>(c)]] || ref.ambiguous;
      rec.alternative = rival[owned[static_cast<std::size_t>(c)]];
      records.push_back(std::move(rec));
    }
  }
  return records;
}

void sort_by_triple(std::vector<PerturbationRecord>& records) {
  std::stable_sort(records.begin(), records.end(), [](const auto& x, const auto& y) {
    return std::tie(x.p, x.i, x.j) < std::tie(y.p, y.i, y.j);
  });
}

double cluster_tolerance(const TripartiteModel& model, const MatchOptions& opts) {
  return opts.cluster_tol * std::max(1.0, std::abs(model.C()));
}

}  // namespace

std::vector<UnperturbedState> unperturbed_spectrum(const TripartiteModel& model) {
  model.validate_structure();
  struct Member {
    CVector ket;
    Index label;
  };
  auto expand = [](const ProjectorFamily& fam) {
    std::vector<Member> out;
    for (std::size_t a = 0; a < fam.size(); ++a) {
      for (auto& v : range_basis(fam.projectors[a])) out.push_back({std::move(v), static_cast<Index>(a)});
    }
    return out;
  };
  const auto qs = expand(model.h_qb.left);
  const auto bs = expand(model.h_be.left);
  const auto es = expand(model.h_be.right);

  std::vector<UnperturbedState> out;
  out.reserve(qs.size() * bs.size() * es.size());
  for (const auto& q : qs) {
    for (const auto& b : bs) {
      for (const auto& e : es) {
        UnperturbedState s;
        s.p = q.label;
        s.i = b.label;
        s.j = e.label;
        s.e0 = model.C() * model.h_be.coeffs(b.label, e.label);
        s.ket = kron(kron(q.ket, b.ket), e.ket);
        out.push_back(std::move(s));
      }
    }
  }
  return out;
}

ExactSpectrum exact_spectrum(const TripartiteModel& model) {
  return hermitian_eig(full_hamiltonian(model));
}

std::vector<std::vector<UnperturbedState>> energy_clusters(std::span<const UnperturbedState> states,
                                                           double tol) {
  std::vector<std::size_t> order(states.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return states[x].e0 < states[y].e0; });
  std::vector<std::vector<UnperturbedState>> out;
  double last = 0;
  for (std::size_t k : order) {
    if (out.empty() || states[k].e0 - last > tol) out.emplace_back();
    out.back().push_back(states[k]);
    last = states[k].e0;
  }
  return out;
}

std::vector<PerturbationRecord> match_spectrum(const TripartiteModel& model, const MatchOptions& opts) {
  return match_spectrum(model, exact_spectrum(model), opts);
}

std::vector<PerturbationRecord> match_spectrum(const TripartiteModel& model,
                                               const ExactSpectrum& exact, const MatchOptions& opts) {
  const auto states = unperturbed_spectrum(model);
  if (static_cast<Index>(states.size()) != exact.eigenvalues.size()) {
    throw ShapeError("match_spectrum: unperturbed basis does not span the composite space");
  }
  const CMatrix h_qb = embedded_h_qb(model);
  std::vector<Reference> refs;
  for (const auto& cluster : energy_clusters(states, cluster_tolerance(model, opts))) {
    if (cluster.size() > 1 && opts.degenerate_path) {
      for (auto& r : adapted_references(cluster, h_qb, exact, opts)) refs.push_back(std::move(r));
      continue;
    }
    for (const auto& s : cluster) {
      Reference r;
      r.ket = s.ket;
      r.p = s.p;
      r.i = s.i;
      r.j = s.j;
      r.e0 = s.e0;
      refs.push_back(std::move(r));
    }
  }
  std::vector<Index> all(static_cast<std::size_t>(exact.eigenvalues.size()));
  std::iota(all.begin(), all.end(), Index{0});
  auto records = assign(exact, all, refs, opts);
  sort_by_triple(records);
  return records;
}

std::vector<PerturbationRecord> degenerate_match(const TripartiteModel& model,
                                                 const ExactSpectrum& exact,
                                                 std::span<const UnperturbedState> cluster,
                                                 const MatchOptions& opts) {
  if (cluster.empty()) return {};
  const double tol = cluster_tolerance(model, opts);
  for (const auto& s : cluster) {
    if (std::abs(s.e0 - cluster.front().e0) > tol) {
      throw ContractError("degenerate_match: cluster energies differ by more than the cluster tolerance");
    }
  }
  const auto refs = adapted_references(cluster, embedded_h_qb(model), exact, opts);

  // Candidate eigenspaces: those with the largest weight inside the cluster span.
  const Index g = static_cast<Index>(cluster.size());
  CMatrix k(exact.eigenvectors.rows(), g);
  for (Index c = 0; c < g; ++c) k.col(c) = cluster[static_cast<std::size_t>(c)].ket;
  std::vector<Index> all(static_cast<std::size_t>(exact.eigenvalues.size()));
  std::iota(all.begin(), all.end(), Index{0});
  auto spaces = eigenspaces(exact, all, exact_tolerance(exact, opts));
  std::vector<double> w(spaces.size(), 0.0);
  for (std::size_t d = 0; d < spaces.size(); ++d) {
    for (Index n : spaces[d]) w[d] += (k.adjoint() * exact.eigenvectors.col(n)).squaredNorm();
    w[d] /= static_cast<double>(spaces[d].size());
  }
  std::vector<std::size_t> order(spaces.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return w[x] > w[y]; });
  std::vector<Index> candidates;
  for (std::size_t d : order) {
    if (static_cast<Index>(candidates.size()) >= g) break;
    for (Index n : spaces[d]) candidates.push_back(n);
  }
  std::sort(candidates.begin(), candidates.end());

  auto records = assign(exact, candidates, refs, opts);
  sort_by_triple(records);
  return records;
}

double lambda_bound(const PerturbationRecord& record, const TripartiteModel& model) {
  return lambda_bound(record, embedded_h_qb(model));
}

double lambda_bound(const PerturbationRecord& record, const CMatrix& h_qb) {
  const double eps = record.epsilon;
  if (eps >= 1.0 - 1e-12) {
    throw SingularBoundError("lambda_bound: epsilon = " + std::to_string(eps) +
                             " makes the bound diverge");
  }
  const double a2 = 1.0 - eps * eps;
  const CVector hr = h_qb * record.reference;
  double bound = std::abs(record.reference.dot(hr)) / std::sqrt(a2);
  const double cn = record.correction.norm();
  if (eps > 0 && cn > 0) {
    bound += eps / a2 * std::abs(record.correction.dot(hr)) / cn;
  }
  return bound;
}

NormSplit norm_split(std::span<const PerturbationRecord> records, const CVector& initial) {
  double n1 = 0;
  for (const auto& r : records) {
    const double keep = 1.0 - r.epsilon * r.epsilon;
    n1 += keep * keep * std::norm(r.reference.dot(initial));
  }
  return {n1, 1.0 - n1};
}

PerturbationSummary summarize(std::span<const PerturbationRecord> records,
                              const TripartiteModel& model, Index i0, const NormSplit& split) {
  PerturbationSummary s;
  s.i0 = i0;
  s.hbar = model.hbar;
  s.ratio = model.ratio();
  s.n1 = split.n1;
  s.n2 = split.n2;
  for (const auto& r : records) {
    s.eps_max = std::max(s.eps_max, r.epsilon);
    if (r.i == i0) {
      s.eps_max_i0 = std::max(s.eps_max_i0, r.epsilon);
      s.lambda_max = std::max(s.lambda_max, std::abs(r.lambda));
    }
  }
  if (s.lambda_max <= kLambdaFloor) {
    s.tau_infinite = true;
    s.tau = std::numeric_limits<double>::infinity();
  } else {
    s.tau = model.hbar / s.lambda_max;
  }
  return s;
}

double diagonal_evolution_error(std::span<const PerturbationRecord> records,
                                const CVector& initial, double t, double hbar) {
  CVector exact = CVector::Zero(initial.size());
  CVector diagonal = CVector::Zero(initial.size());
  for (const auto& r : records) {
    const Complex phase = std::exp(Complex(0, -r.e_exact * t / hbar));
    exact += phase * r.eigenvector.dot(initial) * r.eigenvector;
    diagonal += phase * r.reference.dot(initial) * r.reference;
  }
  return (exact - diagonal).norm();
}

std::vector<std::string> check_invariants(std::span<const PerturbationRecord> records,
                                          const PerturbationSummary& summary,
                                          const TripartiteModel& model) {
  std::vector<std::string> bad;
  const CMatrix h_qb = embedded_h_qb(model);
  auto triple = [](const PerturbationRecord& r) {
    return "(" + std::to_string(r.p) + "," + std::to_string(r.i) + "," + std::to_string(r.j) + ")";
  };
  double eig_sum = 0;
  for (const auto& r : records) {
    eig_sum += r.e_exact;
    if (std::abs(r.overlap * r.overlap + r.epsilon * r.epsilon - 1.0) > 1e-9) {
      bad.push_back("normalization overlap^2 + eps^2 = 1 fails for " + triple(r));
    }
    if (r.i != summary.i0) continue;
    try {
      if (std::abs(r.lambda) > lambda_bound(r, h_qb) + 1e-9) {
        bad.push_back("lambda bound fails for " + triple(r));
      }
    } catch (const SingularBoundError&) {
      bad.push_back("lambda bound diverges for " + triple(r));
    }
  }
  const double trace = full_hamiltonian(model).trace().real();
  if (std::abs(eig_sum - trace) > 1e-8 * std::max(1.0, std::abs(trace))) {
    bad.push_back("eigenvalue sum differs from trace(H)");
  }
  if (std::abs(summary.n1 + summary.n2 - 1.0) > 1e-9) bad.push_back("n1 + n2 != 1");
  const double floor = std::pow(1.0 - summary.eps_max * summary.eps_max, 2);
  if (summary.n1 < floor - 1e-9) bad.push_back("n1 < (1 - eps_max^2)^2");
  if (!summary.tau_infinite &&
      std::abs(summary.tau * summary.lambda_max - summary.hbar) > 1e-12 * summary.hbar) {
    bad.push_back("tau * lambda_max != hbar");
  }
  return bad;
}

}  // namespace qbe
