#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "plane_waves.hpp"
#include "qecho/error.hpp"
#include "qecho/format.hpp"
#include "qecho/parallel.hpp"

namespace qecho::billiard {

namespace {

constexpr double kPi = std::numbers::pi;
// Scale-free units (k * sqrt(area)). Estimates closer than this are refined together.
constexpr double kClusterGap = 3e-3;
// Refinement stops once the averaged estimates move less than this.
constexpr double kRefineSettled = 2e-5;
// Refined levels closer than this are treated as one level (or one degenerate subspace).
constexpr double kSameLevel = 1e-7;

struct Candidate {
  double k = 0.0;
  double omega = 0.0;
  Eigen::VectorXd x;
  int source = 0;
  WaveBasis basis;
};

// One scaling-method solve about k0 for a fixed boundary rule and basis size.
class ScalingProblem {
 public:
  ScalingProblem(const BilliardShape& shape, SymmetryClass cls, double k_ref, const SolverConfig& cfg)
      : cls_(cls), cfg_(cfg) {
    nodes_ = detail::wall_nodes(shape, k_ref, cfg.boundary_points_per_wavelength);
    basis_ = make_basis(shape, k_ref, cfg.basis_factor, cfg.evanescent_fraction, cfg.evanescent_alphas);
    n_ = basis_.size();
    weights_.resize(static_cast<Eigen::Index>(nodes_.size()));
    for (size_t i = 0; i < nodes_.size(); ++i) {
      weights_[static_cast<Eigen::Index>(i)] = nodes_[i].weight / dot(nodes_[i].position, nodes_[i].normal);
    }
  }

  // Eigenvalue shifts omega and coefficient vectors, sorted by |omega|.
  std::vector<Candidate> solve(double k0) const {
    const detail::BasisMatrices b = detail::basis_matrices(cls_, k0, basis_, nodes_, true);
    Eigen::MatrixXd rg(b.value.rows(), n_);
    for (Eigen::Index i = 0; i < rg.rows(); ++i) {
      rg.row(i) = nodes_[i].position.x * b.dx.row(i) + nodes_[i].position.y * b.dy.row(i);
    }
    const Eigen::MatrixXd wphi = weights_.asDiagonal() * b.value;
    const Eigen::MatrixXd f = b.value.transpose() * wphi;
    const Eigen::MatrixXd cross = wphi.transpose() * rg;
    const Eigen::MatrixXd g = (cross + cross.transpose()) / k0;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> fe(f);
    const Eigen::VectorXd& d = fe.eigenvalues();
    const double dmax = d.maxCoeff();
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < d.size(); ++i) {
      if (d[i] > cfg_.rank_cutoff * dmax) keep.push_back(i);
    }
    if (static_cast<int>(keep.size()) == n_) {
      fail(ErrorKind::Convergence, "trial basis of " + std::to_string(n_) +
                                       " plane waves is not overcomplete; raise basis_factor");
    }
    Eigen::MatrixXd t(n_, static_cast<Eigen::Index>(keep.size()));
    for (size_t c = 0; c < keep.size(); ++c) {
      t.col(static_cast<Eigen::Index>(c)) = fe.eigenvectors().col(keep[c]) / std::sqrt(d[keep[c]]);
    }
    const Eigen::MatrixXd h = t.transpose() * g * t;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> he(0.5 * (h + h.transpose()));
    std::vector<Candidate> out;
    out.reserve(static_cast<size_t>(h.rows()));
    for (Eigen::Index i = 0; i < h.rows(); ++i) {
      const double mu = he.eigenvalues()[i];
      if (mu == 0.0) continue;
      const double omega = -2.0 / mu;
      out.push_back({k0 + omega, omega, t * he.eigenvectors().col(i), 0, basis_});
    }
    std::sort(out.begin(), out.end(),
              [](const Candidate& a, const Candidate& b) { return std::abs(a.omega) < std::abs(b.omega); });
    return out;
  }

  const WaveBasis& basis() const { return basis_; }

 private:
  SymmetryClass cls_;
  SolverConfig cfg_;
  std::vector<quadrature::BoundaryNode> nodes_;
  WaveBasis basis_;
  Eigen::VectorXd weights_;
  int n_ = 0;
};

// Nearest unused candidate for each estimate.
std::vector<Candidate> match(const std::vector<Candidate>& sol, const std::vector<double>& estimates) {
  std::vector<char> used(sol.size(), 0);
  std::vector<Candidate> out;
  for (double e : estimates) {
    size_t pick = sol.size();
    for (size_t i = 0; i < sol.size(); ++i) {
      if (!used[i] && (pick == sol.size() || std::abs(sol[i].k - e) < std::abs(sol[pick].k - e))) pick = i;
    }
    if (pick == sol.size()) fail(ErrorKind::Convergence, "scaling solve returned too few levels");
    used[pick] = 1;
    out.push_back(sol[pick]);
  }
  return out;
}

// Re-solve a cluster slightly above its highest estimate. Solving exactly at a
// level would push its eigenfunction into the truncated null space of F.
std::vector<Candidate> refine_cluster(const BilliardShape& shape, SymmetryClass cls, const SolverConfig& cfg,
                                      double ell, std::vector<double> estimates) {
  const double delta = cfg.refine_offset / ell;
  std::vector<Candidate> best;
  for (int iter = 0; iter < 2; ++iter) {
    const double k0 = *std::max_element(estimates.begin(), estimates.end()) + delta;
    best = match(ScalingProblem(shape, cls, k0, cfg).solve(k0), estimates);
    double moved = 0.0;
    for (size_t i = 0; i < best.size(); ++i) {
      moved = std::max(moved, std::abs(best[i].k - estimates[i]));
      estimates[i] = best[i].k;
    }
    if (moved * ell < kRefineSettled) break;
  }
  // The scaling estimate k0 + omega is off by a term cubic in omega. A second
  // solve at twice the offset removes it; the vectors stay those of the first.
  const double k0 = *std::max_element(estimates.begin(), estimates.end()) + 2.0 * delta;
  const std::vector<Candidate> far = match(ScalingProblem(shape, cls, k0, cfg).solve(k0), estimates);
  for (size_t i = 0; i < best.size(); ++i) {
    const double w1 = std::pow(best[i].omega, 3);
    const double w2 = std::pow(far[i].omega, 3);
    if (std::abs(w2 - w1) > 0.5 * std::abs(w1)) best[i].k = (w2 * best[i].k - w1 * far[i].k) / (w2 - w1);
  }
  return best;
}

void fix_sign(Eigen::VectorXd& c) {
  Eigen::Index idx = 0;
  c.cwiseAbs().maxCoeff(&idx);
  if (c[idx] < 0.0) c = -c;
}

// Mean squared boundary value.
double wall_quality(const EigenState& s, std::span<const quadrature::BoundaryNode> nodes) {
  const detail::Fields f = detail::fields(s, nodes);
  double wall = 0.0;
  double len = 0.0;
  for (size_t p = 0; p < nodes.size(); ++p) {
    wall += nodes[p].weight * f.u[static_cast<Eigen::Index>(p)] * f.u[static_cast<Eigen::Index>(p)];
    len += nodes[p].weight;
  }
  return wall / len;
}

void orthonormalize_group(std::span<EigenState> group, double ppw) {
  const auto n = static_cast<Eigen::Index>(group.size());
  const double kg = group.front().k;
  const auto nodes = detail::wall_nodes(group.front().shape, kg, ppw);
  std::vector<detail::Fields> f;
  for (const auto& s : group) f.push_back(detail::fields(s, nodes));
  Eigen::MatrixXd gram(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double v = 4.0 * detail::rellich_integral(f[static_cast<size_t>(i)], f[static_cast<size_t>(j)], nodes, kg);
      gram(i, j) = v;
      gram(j, i) = v;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ge(gram);
  if (ge.eigenvalues().minCoeff() <= 0.0) {
    fail(ErrorKind::Convergence, "degenerate group at k=" + format_sig(kg, 12) + " is linearly dependent");
  }
  const Eigen::MatrixXd inv_sqrt =
      ge.eigenvectors() * ge.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() * ge.eigenvectors().transpose();
  std::vector<Eigen::VectorXd> coef;
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(group.front().coefficients.size());
    for (Eigen::Index j = 0; j < n; ++j) c += inv_sqrt(j, i) * group[static_cast<size_t>(j)].coefficients;
    coef.push_back(std::move(c));
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    EigenState& s = group[static_cast<size_t>(i)];
    s.coefficients = std::move(coef[static_cast<size_t>(i)]);
    s.quality = wall_quality(s, detail::wall_nodes(s.shape, s.k, ppw));
  }
}

bool integrable(const BilliardShape& shape) { return shape.kind() != geometry::ShapeKind::Stadium; }

}  // namespace

int WaveBasis::size() const {
  return plane_waves + 2 * evanescent_angles * static_cast<int>(evanescent_alphas.size());
}

std::vector<double> EigenBasis::wavenumbers() const {
  std::vector<double> k;
  k.reserve(states.size());
  for (const auto& s : states) k.push_back(s.k);
  return k;
}

int basis_size(const BilliardShape& shape, double k, double basis_factor) {
  require(basis_factor > 0.0, "basis_factor must be positive");
  return static_cast<int>(std::ceil(basis_factor * 0.25 * shape.perimeter() * k / (2.0 * kPi)));
}

WaveBasis make_basis(const BilliardShape& shape, double k, double basis_factor, double evanescent_fraction,
                     const std::vector<double>& evanescent_alphas) {
  require(evanescent_fraction >= 0.0, "evanescent_fraction must be non-negative");
  WaveBasis b;
  b.plane_waves = basis_size(shape, k, basis_factor);
  // Only walls with a curvature jump need them; elsewhere they add spurious roots.
  if (shape.kind() == geometry::ShapeKind::Stadium && evanescent_fraction > 0.0 && !evanescent_alphas.empty()) {
    b.evanescent_angles = static_cast<int>(std::ceil(evanescent_fraction * b.plane_waves));
    b.evanescent_alphas = evanescent_alphas;
  }
  switch (shape.kind()) {
    case geometry::ShapeKind::Stadium: {
      const auto& p = std::get<geometry::Stadium>(shape.params());
      b.support_centre = {0.5 * p.l, 0.0};
      b.support_radius = p.r;
      break;
    }
    case geometry::ShapeKind::Rectangle: {
      const auto& p = std::get<geometry::Rectangle>(shape.params());
      b.support_centre = {0.5 * p.a, 0.5 * p.b};
      break;
    }
    case geometry::ShapeKind::Circle:
      b.support_radius = std::get<geometry::Circle>(shape.params()).R;
      break;
  }
  return b;
}

EigenBasis solve_window(const BilliardShape& shape, SymmetryClass cls, double k_center, double half_width,
                        const SolverConfig& cfg) {
  require(k_center > 0.0, "k_center must be positive");
  require(half_width > 0.0, "half_width must be positive");
  require(k_center - half_width > 0.0, "window must stay at positive k");
  require(cfg.subwindow_half_width > 0.0, "subwindow_half_width must be positive");
  const geometry::FundamentalDomain fd = geometry::desymmetrize(shape, cls);

  const double k_lo = k_center - half_width;
  const double k_hi = k_center + half_width;
  // Sub-windows sit on a fixed grid in k * sqrt(area), so a dilated shape is solved
  // at exactly the dilated wavenumbers.
  const double ell = std::sqrt(fd.area);
  const double cell = 2.0 * cfg.subwindow_half_width;
  const auto j_lo = static_cast<long>(std::floor(k_lo * ell / cell));
  const auto j_hi = static_cast<long>(std::floor(k_hi * ell / cell));
  const auto m = static_cast<size_t>(j_hi - j_lo + 1);
  const double accept = 0.6 * cell / ell;
  const double pad = 0.1 * cell / ell;
  std::vector<Candidate> coarse_all;
  std::vector<std::vector<Candidate>> coarse(m);
  parallel_for(m, [&](size_t iu) {
    const double c = (static_cast<double>(j_lo + static_cast<long>(iu)) + 0.5) * cell / ell;
    const ScalingProblem prob(shape, cls, c + cell / ell, cfg);
    std::vector<Candidate> kept;
    for (auto& cand : prob.solve(c)) {
      if (std::abs(cand.omega) <= accept && cand.k >= k_lo - pad && cand.k <= k_hi + pad) {
        cand.source = static_cast<int>(iu);
        kept.push_back(std::move(cand));
      }
    }
    coarse[iu] = std::move(kept);
  });
  for (auto& list : coarse) {
    for (auto& c : list) coarse_all.push_back(std::move(c));
  }
  std::stable_sort(coarse_all.begin(), coarse_all.end(),
                   [](const Candidate& a, const Candidate& b) { return a.k < b.k; });

  // Neighbouring sub-windows see the same levels. Chain estimates closer than the
  // cluster gap across all sources; each source sees a level at most once, so the
  // source with the most members of a cluster gives its level count.
  std::vector<std::vector<double>> jobs;
  size_t a = 0;
  while (a < coarse_all.size()) {
    size_t b = a + 1;
    while (b < coarse_all.size() && (coarse_all[b].k - coarse_all[b - 1].k) * ell < kClusterGap) ++b;
    std::vector<int> count(m, 0);
    for (size_t i = a; i < b; ++i) ++count[static_cast<size_t>(coarse_all[i].source)];
    // Ties go to the source whose centre is nearest the cluster.
    const double mid = 0.5 * (coarse_all[a].k + coarse_all[b - 1].k) * ell / cell - 0.5;
    size_t best = 0;
    for (size_t i = 1; i < m; ++i) {
      const double di = std::abs(static_cast<double>(j_lo + static_cast<long>(i)) - mid);
      const double db = std::abs(static_cast<double>(j_lo + static_cast<long>(best)) - mid);
      if (count[i] > count[best] || (count[i] == count[best] && di < db)) best = i;
    }
    std::vector<double> est;
    for (size_t i = a; i < b; ++i) {
      if (static_cast<size_t>(coarse_all[i].source) == best) est.push_back(coarse_all[i].k);
    }
    jobs.push_back(std::move(est));
    a = b;
  }
  std::vector<std::vector<Candidate>> refined(jobs.size());
  parallel_for(jobs.size(), [&](size_t j) { refined[j] = refine_cluster(shape, cls, cfg, ell, jobs[j]); });

  std::vector<Candidate> unique;
  for (auto& r : refined) {
    for (auto& c : r) unique.push_back(std::move(c));
  }
  std::stable_sort(unique.begin(), unique.end(), [](const Candidate& a, const Candidate& b) { return a.k < b.k; });

  // Normalize, orthogonalize degenerate groups, and apply the quality filter.
  OverlapConfig ocfg;
  std::vector<EigenState> states;
  states.reserve(unique.size());
  for (auto& c : unique) {
    EigenState s;
    s.k = c.k;
    s.cls = cls;
    s.coefficients = std::move(c.x);
    s.basis = std::move(c.basis);
    s.shape = shape;
    states.push_back(std::move(s));
  }
  EigenBasis basis;
  basis.shape = shape;
  basis.cls = cls;
  basis.k_lo = k_lo;
  basis.k_hi = k_hi;

  // Normalize and measure each state on its own wall, then drop poor candidates
  // before they can contaminate the orthonormalization.
  std::vector<char> good(states.size(), 0);
  parallel_for(states.size(), [&](size_t i) {
    EigenState& s = states[i];
    const auto nodes = detail::wall_nodes(shape, s.k, ocfg.boundary_points_per_wavelength);
    const detail::Fields f = detail::fields(s, nodes);
    const double norm = 4.0 * detail::rellich_integral(f, f, nodes, s.k);
    if (!(norm > 0.0)) return;
    s.coefficients /= std::sqrt(norm);
    s.quality = wall_quality(s, nodes);
    good[i] = s.quality <= cfg.quality_factor * s.k * s.k;
  });
  std::vector<EigenState> kept;
  for (size_t i = 0; i < states.size(); ++i) {
    if (good[i]) {
      kept.push_back(std::move(states[i]));
    } else if (states[i].k >= k_lo && states[i].k <= k_hi) {
      ++basis.rejected;
    }
  }

  // Degenerate subspaces come out of the solver with an arbitrary, slightly
  // non-orthogonal frame; orthonormalize each symmetrically.
  size_t g0 = 0;
  while (g0 < kept.size()) {
    size_t g1 = g0 + 1;
    while (g1 < kept.size() && kept[g1].k - kept[g1 - 1].k < kSameLevel * kept[g1].k) ++g1;
    if (g1 - g0 > 1) orthonormalize_group(std::span(kept).subspan(g0, g1 - g0), ocfg.boundary_points_per_wavelength);
    g0 = g1;
  }
  for (auto& st : kept) {
    fix_sign(st.coefficients);
    if (st.k >= k_lo && st.k <= k_hi) basis.states.push_back(std::move(st));
  }

  basis.weyl_expected = fd.weyl_count(k_hi) - fd.weyl_count(k_lo);
  basis.weyl_found = static_cast<int>(basis.states.size());
  basis.weyl_tolerance = cfg.completeness_tolerance;
  if (cfg.integrable_allowance && integrable(shape)) basis.weyl_tolerance += std::sqrt(basis.weyl_expected);
  basis.complete = std::abs(basis.weyl_found - basis.weyl_expected) <= basis.weyl_tolerance;

  if (!basis.complete) {
    std::vector<double> edges = {k_lo};
    for (const auto& s : basis.states) edges.push_back(s.k);
    edges.push_back(k_hi);
    std::vector<std::pair<double, double>> gaps;
    for (size_t i = 0; i + 1 < edges.size(); ++i) gaps.emplace_back(edges[i], edges[i + 1]);
    std::stable_sort(gaps.begin(), gaps.end(), [](const auto& x, const auto& y) {
      return (x.second - x.first) > (y.second - y.first);
    });
    const auto deficit = static_cast<size_t>(std::max(1.0, std::ceil(std::abs(basis.weyl_expected - basis.weyl_found))));
    gaps.resize(std::min(gaps.size(), deficit));
    basis.suspect_intervals = gaps;
    if (cfg.require_complete) {
      std::ostringstream msg;
      msg << "Weyl audit failed for " << shape.describe() << " class " << geometry::to_string(cls) << " on ["
          << format_sig(k_lo, 10) << ", " << format_sig(k_hi, 10) << "]: found " << basis.weyl_found
          << ", expected " << format_sig(basis.weyl_expected, 6) << "; suspect intervals:";
      for (const auto& g : gaps) msg << " [" << format_sig(g.first, 10) << ", " << format_sig(g.second, 10) << "]";
      fail(ErrorKind::IncompleteBasis, msg.str());
    }
  }
  return basis;
}

EigenState dilated(const EigenState& state, double s) {
  require(s > 0.0, "dilation factor must be positive");
  EigenState out = state;
  out.k = state.k / s;
  out.shape = geometry::apply_perturbation(state.shape, geometry::Dilation{s});
  out.basis.support_centre = s * state.basis.support_centre;
  out.basis.support_radius = s * state.basis.support_radius;
  out.coefficients = state.coefficients / s;
  out.quality = state.quality / (s * s);
  return out;
}

}  // namespace qecho::billiard
