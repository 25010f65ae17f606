#include <algorithm>
#include <cmath>

#include "plane_waves.hpp"
#include "qecho/error.hpp"
#include "qecho/format.hpp"
#include "qecho/parallel.hpp"

namespace qecho::billiard {

namespace {

// Relative accuracy assumed for a single boundary sum when judging whether the
// Green identity is well conditioned.
constexpr double kSumAccuracy = 1e-11;
constexpr double kDegenerate = 1e-7;

// Below this relative gap the equal-k identity is used; its error is of the order
// of the gap itself.
bool same_k(double ka, double kb) { return std::abs(ka - kb) <= 1e-10 * std::max(ka, kb); }

// Below this relative gap the Green identity divides residual wall values by a
// small k^2 difference; when its two passes disagree the interior rule decides.
bool close_k(double ka, double kb) { return std::abs(ka - kb) <= 1e-5 * std::max(ka, kb); }

struct PairResult {
  double value = 0.0;
  bool conditioned = true;
};

// Full-domain overlap from boundary data on the intersection wall.
PairResult boundary_pair(const detail::Fields& fa, double ka, const detail::Fields& fb, double kb,
                         std::span<const quadrature::BoundaryNode> nodes, double tol) {
  if (same_k(ka, kb)) return {4.0 * detail::rellich_integral(fa, fb, nodes, 0.5 * (ka + kb)), true};
  double scale = 0.0;
  const double v = detail::green_integral(fa, ka, fb, kb, nodes, &scale);
  const double noise = 4.0 * kSumAccuracy * scale / std::abs(ka * ka - kb * kb);
  return {4.0 * v, noise < 0.1 * tol};
}

std::vector<double> interior_values(const EigenState& s, const std::vector<quadrature::AreaNode>& nodes) {
  std::vector<double> x(nodes.size());
  std::vector<double> y(nodes.size());
  for (size_t i = 0; i < nodes.size(); ++i) {
    x[i] = nodes[i].x;
    y[i] = nodes[i].y;
  }
  std::vector<double> out(nodes.size());
  detail::accumulate_values(s, x, y, out);
  return out;
}

double interior_once(const EigenState& a, const EigenState& b, const quadrature::QuarterIntersection& dom, double ppw) {
  const auto nodes = quadrature::area_nodes(dom, std::max(a.k, b.k), ppw);
  const auto va = interior_values(a, nodes);
  const auto vb = interior_values(b, nodes);
  double acc = 0.0;
  for (size_t i = 0; i < nodes.size(); ++i) acc += nodes[i].weight * va[i] * vb[i];
  return 4.0 * acc;
}

[[noreturn]] void nonconverged(const EigenState& a, const EigenState& b, double r1, double r2) {
  fail(ErrorKind::QuadratureNonconvergence, "overlap of k=" + format_sig(a.k, 12) + " and k=" + format_sig(b.k, 12) +
                                                " changed from " + format_sig(r1, 10) + " to " + format_sig(r2, 10) +
                                                " under refinement");
}

std::vector<std::vector<size_t>> degenerate_groups(const std::vector<EigenState>& s) {
  std::vector<std::vector<size_t>> groups;
  for (size_t i = 0; i < s.size(); ++i) {
    if (!groups.empty() && s[i].k - s[groups.back().back()].k < kDegenerate * s[i].k) {
      groups.back().push_back(i);
    } else {
      groups.push_back({i});
    }
  }
  return groups;
}

}  // namespace

std::vector<double> eval_wavefunction(const EigenState& state, std::span<const Vec2> points) {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<size_t> idx;
  for (size_t i = 0; i < points.size(); ++i) {
    if (state.shape.signed_distance(points[i]) <= 0.0) {
      x.push_back(points[i].x);
      y.push_back(points[i].y);
      idx.push_back(i);
    }
  }
  std::vector<double> inside(x.size());
  detail::accumulate_values(state, x, y, inside);
  std::vector<double> out(points.size(), 0.0);
  for (size_t i = 0; i < idx.size(); ++i) out[idx[i]] = inside[i];
  return out;
}

double overlap_interior(const EigenState& a, const EigenState& b, const OverlapConfig& cfg) {
  if (!(a.cls == b.cls)) return 0.0;
  const quadrature::QuarterIntersection dom(a.shape, b.shape);
  const double r1 = interior_once(a, b, dom, cfg.area_points_per_wavelength);
  const double r2 = interior_once(a, b, dom, cfg.area_points_per_wavelength * cfg.refinement_factor);
  if (std::abs(r1 - r2) > cfg.tolerance) nonconverged(a, b, r1, r2);
  return r2;
}

double overlap(const EigenState& a, const EigenState& b, const OverlapConfig& cfg) {
  // Different parity classes integrate to zero over the symmetric intersection.
  if (!(a.cls == b.cls)) return 0.0;
  const quadrature::QuarterIntersection dom(a.shape, b.shape);
  const double kmax = std::max(a.k, b.k);
  double r[2] = {0.0, 0.0};
  for (int pass = 0; pass < 2; ++pass) {
    const double ppw = cfg.boundary_points_per_wavelength * (pass == 0 ? 1.0 : cfg.refinement_factor);
    const auto nodes = quadrature::outer_wall_nodes(dom, kmax, ppw);
    const PairResult pr = boundary_pair(detail::fields(a, nodes), a.k, detail::fields(b, nodes), b.k, nodes,
                                        cfg.tolerance);
    if (!pr.conditioned) return overlap_interior(a, b, cfg);
    r[pass] = pr.value;
  }
  if (std::abs(r[0] - r[1]) > cfg.tolerance) {
    if (close_k(a.k, b.k)) return overlap_interior(a, b, cfg);
    nonconverged(a, b, r[0], r[1]);
  }
  return r[1];
}

namespace detail {

Eigen::MatrixXd overlap_entries(const std::vector<EigenState>& a, const std::vector<EigenState>& b,
                                const OverlapConfig& cfg) {
  const auto na = static_cast<Eigen::Index>(a.size());
  const auto nb = static_cast<Eigen::Index>(b.size());
  Eigen::MatrixXd entries = Eigen::MatrixXd::Zero(nb, na);
  if (na == 0 || nb == 0 || !(a.front().cls == b.front().cls)) return entries;
  const quadrature::QuarterIntersection dom(a.front().shape, b.front().shape);
  double kmax = 0.0;
  for (const auto& s : a) kmax = std::max(kmax, s.k);
  for (const auto& s : b) kmax = std::max(kmax, s.k);

  Eigen::MatrixXd res[2];
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> fallback = Eigen::Matrix<bool, -1, -1>::Constant(nb, na, false);
  for (int pass = 0; pass < 2; ++pass) {
    const double ppw = cfg.boundary_points_per_wavelength * (pass == 0 ? 1.0 : cfg.refinement_factor);
    const auto nodes = quadrature::outer_wall_nodes(dom, kmax, ppw);
    std::vector<Fields> fa(static_cast<size_t>(na));
    std::vector<Fields> fb(static_cast<size_t>(nb));
    parallel_for(fa.size(), [&](size_t n) { fa[n] = fields(a[n], nodes); });
    parallel_for(fb.size(), [&](size_t m) { fb[m] = fields(b[m], nodes); });
    res[pass].resize(nb, na);
    parallel_for(fa.size(), [&](size_t nu) {
      const auto n = static_cast<Eigen::Index>(nu);
      for (Eigen::Index m = 0; m < nb; ++m) {
        const PairResult pr =
            boundary_pair(fa[nu], a[nu].k, fb[static_cast<size_t>(m)], b[static_cast<size_t>(m)].k, nodes, cfg.tolerance);
        res[pass](m, n) = pr.value;
        if (!pr.conditioned) fallback(m, n) = true;
      }
    });
  }
  // Pairs with nearly equal but distinct k go through the interior rule.
  std::vector<std::pair<Eigen::Index, Eigen::Index>> slow;
  for (Eigen::Index n = 0; n < na; ++n) {
    for (Eigen::Index m = 0; m < nb; ++m) {
      if (!fallback(m, n) && std::abs(res[0](m, n) - res[1](m, n)) > cfg.tolerance &&
          close_k(a[static_cast<size_t>(n)].k, b[static_cast<size_t>(m)].k)) {
        fallback(m, n) = true;
      }
      if (fallback(m, n)) slow.emplace_back(m, n);
    }
  }
  std::vector<double> slow_val(slow.size());
  parallel_for(slow.size(), [&](size_t i) {
    slow_val[i] = overlap_interior(a[static_cast<size_t>(slow[i].second)], b[static_cast<size_t>(slow[i].first)], cfg);
  });
  for (Eigen::Index n = 0; n < na; ++n) {
    for (Eigen::Index m = 0; m < nb; ++m) {
      if (fallback(m, n)) continue;
      if (std::abs(res[0](m, n) - res[1](m, n)) > cfg.tolerance) {
        nonconverged(a[static_cast<size_t>(n)], b[static_cast<size_t>(m)], res[0](m, n), res[1](m, n));
      }
      entries(m, n) = res[1](m, n);
    }
  }
  for (size_t i = 0; i < slow.size(); ++i) entries(slow[i].first, slow[i].second) = slow_val[i];
  return entries;
}

}  // namespace detail

OverlapMatrix overlap_matrix(const EigenBasis& a, const EigenBasis& b, const OverlapConfig& cfg) {
  OverlapMatrix om;
  const auto na = static_cast<Eigen::Index>(a.states.size());
  const auto nb = static_cast<Eigen::Index>(b.states.size());
  om.k_a = a.wavenumbers();
  om.k_b = b.wavenumbers();
  om.entries = Eigen::MatrixXd::Zero(nb, na);

  if (a.cls == b.cls && na > 0 && nb > 0) {
    om.entries = detail::overlap_entries(a.states, b.states, cfg);

    // Inside a degenerate subspace of B the individual states are defined only up
    // to rotation; rotate each such block onto the best-matching A subspace.
    const auto ga = degenerate_groups(a.states);
    const auto gb = degenerate_groups(b.states);
    for (const auto& g : gb) {
      if (g.size() < 2) continue;
      const auto gs = static_cast<Eigen::Index>(g.size());
      double best = -1.0;
      const std::vector<size_t>* target = nullptr;
      for (const auto& h : ga) {
        if (h.size() != g.size()) continue;
        double fro = 0.0;
        for (size_t i : g) {
          for (size_t j : h) fro += om.entries(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) *
                                    om.entries(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        }
        if (fro > best) {
          best = fro;
          target = &h;
        }
      }
      if (!target) continue;
      Eigen::MatrixXd block(gs, gs);
      for (Eigen::Index i = 0; i < gs; ++i) {
        for (Eigen::Index j = 0; j < gs; ++j) {
          block(i, j) = om.entries(static_cast<Eigen::Index>(g[static_cast<size_t>(i)]),
                                   static_cast<Eigen::Index>((*target)[static_cast<size_t>(j)]));
        }
      }
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(block, Eigen::ComputeFullU | Eigen::ComputeFullV);
      const Eigen::MatrixXd rot = svd.matrixU() * svd.matrixV().transpose();
      Eigen::MatrixXd rows(gs, na);
      for (Eigen::Index i = 0; i < gs; ++i) rows.row(i) = om.entries.row(static_cast<Eigen::Index>(g[static_cast<size_t>(i)]));
      const Eigen::MatrixXd rotated = rot.transpose() * rows;
      for (Eigen::Index i = 0; i < gs; ++i) om.entries.row(static_cast<Eigen::Index>(g[static_cast<size_t>(i)])) = rotated.row(i);
    }
  }

  om.row_sumsq.resize(static_cast<size_t>(nb));
  om.col_sumsq.resize(static_cast<size_t>(na));
  for (Eigen::Index m = 0; m < nb; ++m) om.row_sumsq[static_cast<size_t>(m)] = om.entries.row(m).squaredNorm();
  for (Eigen::Index n = 0; n < na; ++n) om.col_sumsq[static_cast<size_t>(n)] = om.entries.col(n).squaredNorm();
  return om;
}

}  // namespace qecho::billiard
