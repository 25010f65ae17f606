#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "qecho/billiard.hpp"
#include "qecho/error.hpp"
#include "qecho/format.hpp"

namespace qecho::billiard {

std::vector<int> max_weight_assignment(const Eigen::MatrixXd& score) {
  // Hungarian algorithm (potentials form) on cost = -score.
  const auto n = static_cast<int>(score.rows());
  const auto m = static_cast<int>(score.cols());
  require(n <= m, "assignment needs at least as many columns as rows");
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<size_t>(n) + 1, 0.0);
  std::vector<double> v(static_cast<size_t>(m) + 1, 0.0);
  std::vector<int> p(static_cast<size_t>(m) + 1, 0);
  std::vector<int> way(static_cast<size_t>(m) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<size_t>(m) + 1, inf);
    std::vector<char> used(static_cast<size_t>(m) + 1, 0);
    do {
      used[static_cast<size_t>(j0)] = 1;
      const int i0 = p[static_cast<size_t>(j0)];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[static_cast<size_t>(j)]) continue;
        const double cur = -score(i0 - 1, j - 1) - u[static_cast<size_t>(i0)] - v[static_cast<size_t>(j)];
        if (cur < minv[static_cast<size_t>(j)]) {
          minv[static_cast<size_t>(j)] = cur;
          way[static_cast<size_t>(j)] = j0;
        }
        if (minv[static_cast<size_t>(j)] < delta) {
          delta = minv[static_cast<size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[static_cast<size_t>(j)]) {
          u[static_cast<size_t>(p[static_cast<size_t>(j)])] += delta;
          v[static_cast<size_t>(j)] -= delta;
        } else {
          minv[static_cast<size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<size_t>(j0)];
      p[static_cast<size_t>(j0)] = p[static_cast<size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> out(static_cast<size_t>(n), -1);
  for (int j = 1; j <= m; ++j) {
    if (p[static_cast<size_t>(j)] != 0) out[static_cast<size_t>(p[static_cast<size_t>(j)] - 1)] = j - 1;
  }
  return out;
}

std::vector<double> LevelTrack::k_curve(size_t track) const {
  std::vector<double> k;
  k.reserve(strengths.size());
  for (size_t i = 0; i < strengths.size(); ++i) k.push_back(state(i, track).k);
  return k;
}

const EigenState& LevelTrack::state(size_t step, size_t track) const {
  return bases[step].states[static_cast<size_t>(assignment[step][track])];
}

namespace {

class Tracker {
 public:
  Tracker(LevelTrack& out, const TrackConfig& cfg) : out_(out), cfg_(cfg) {}

  BilliardShape shape_at(double strength) const {
    return geometry::apply_perturbation(out_.shape, geometry::make_perturbation(out_.family, strength));
  }

  void advance(double s_next, bool inserted, int depth) {
    const size_t last = out_.strengths.size() - 1;
    const size_t nt = out_.tracks();
    const double s_prev = out_.strengths[last];

    // Predict each level linearly from the last two points.
    std::vector<double> pred(nt);
    for (size_t t = 0; t < nt; ++t) {
      const double k1 = out_.state(last, t).k;
      double slope = 0.0;
      if (last > 0) {
        const double k0 = out_.state(last - 1, t).k;
        slope = (k1 - k0) / (s_prev - out_.strengths[last - 1]);
      }
      pred[t] = k1 + slope * (s_next - s_prev);
    }
    const auto [lo_it, hi_it] = std::minmax_element(pred.begin(), pred.end());
    const double lo = *lo_it - cfg_.margin;
    const double hi = *hi_it + cfg_.margin;
    EigenBasis next = solve_window(shape_at(s_next), out_.cls, 0.5 * (lo + hi), 0.5 * (hi - lo), cfg_.solver);

    EigenBasis prev;
    prev.shape = out_.bases[last].shape;
    prev.cls = out_.cls;
    for (size_t t = 0; t < nt; ++t) prev.states.push_back(out_.state(last, t));
    const OverlapMatrix om = overlap_matrix(prev, next, cfg_.overlap);

    bool resolved = om.entries.rows() >= static_cast<Eigen::Index>(nt);
    std::vector<int> assign;
    std::vector<double> matched(nt, 0.0);
    if (resolved) {
      const Eigen::MatrixXd score = om.entries.transpose().cwiseAbs();
      assign = max_weight_assignment(score);
      for (size_t t = 0; t < nt; ++t) {
        matched[t] = score(static_cast<Eigen::Index>(t), assign[t]);
        if (matched[t] < cfg_.min_overlap) resolved = false;
      }
    }
    if (!resolved && depth < cfg_.max_bisection_depth) {
      const double mid = 0.5 * (s_prev + s_next);
      advance(mid, true, depth + 1);
      advance(s_next, inserted, depth + 1);
      return;
    }
    if (!resolved) {
      if (cfg_.strict || assign.empty()) {
        fail(ErrorKind::AmbiguousTracking, "level assignment between strengths " + format_sig(s_prev, 12) + " and " +
                                               format_sig(s_next, 12) + " stays ambiguous after " +
                                               std::to_string(cfg_.max_bisection_depth) + " bisections");
      }
    }
    std::vector<bool> flags(nt);
    for (size_t t = 0; t < nt; ++t) flags[t] = matched[t] < cfg_.min_overlap;
    out_.strengths.push_back(s_next);
    out_.inserted.push_back(inserted);
    out_.bases.push_back(std::move(next));
    out_.assignment.push_back(std::move(assign));
    out_.step_overlap.push_back(std::move(matched));
    out_.ambiguous.push_back(std::move(flags));
  }

 private:
  LevelTrack& out_;
  const TrackConfig& cfg_;
};

void annotate_crossings(LevelTrack& lt, double threshold) {
  const size_t steps = lt.strengths.size();
  const size_t nt = lt.tracks();
  if (steps < 3 || nt < 2) return;
  std::vector<std::vector<double>> k(nt);
  for (size_t t = 0; t < nt; ++t) k[t] = lt.k_curve(t);
  for (size_t i = 1; i + 1 < steps; ++i) {
    std::vector<size_t> order(nt);
    for (size_t t = 0; t < nt; ++t) order[t] = t;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return k[a][i] < k[b][i]; });
    for (size_t j = 0; j + 1 < nt; ++j) {
      const size_t a = order[j];
      const size_t b = order[j + 1];
      auto gap = [&](size_t step) { return std::abs(k[b][step] - k[a][step]); };
      const double g = gap(i);
      if (g < gap(i - 1) && g <= gap(i + 1) && g < threshold) {
        lt.crossings.push_back({static_cast<int>(a), static_cast<int>(b), i, lt.strengths[i], g});
      }
    }
  }
}

}  // namespace

LevelTrack track_levels(const BilliardShape& shape, SymmetryClass cls, geometry::PerturbationFamily family,
                        const std::vector<double>& strengths, double k_lo, double k_hi, const TrackConfig& cfg) {
  require(!strengths.empty(), "strength grid is empty");
  require(k_hi > k_lo && k_lo > 0.0, "tracking window must be positive and ordered");
  for (size_t i = 1; i < strengths.size(); ++i) {
    require(strengths[i] != strengths[i - 1], "strength grid has repeated points");
  }
  LevelTrack lt;
  lt.shape = shape;
  lt.cls = cls;
  lt.family = family;

  Tracker tracker(lt, cfg);
  const BilliardShape first = tracker.shape_at(strengths[0]);
  EigenBasis b0 = solve_window(first, cls, 0.5 * (k_lo + k_hi), 0.5 * (k_hi - k_lo) + cfg.margin, cfg.solver);
  std::vector<int> tracked;
  for (size_t i = 0; i < b0.states.size(); ++i) {
    if (b0.states[i].k >= k_lo && b0.states[i].k <= k_hi) tracked.push_back(static_cast<int>(i));
  }
  require(!tracked.empty(), "no levels in the tracking window");
  lt.strengths.push_back(strengths[0]);
  lt.inserted.push_back(false);
  lt.bases.push_back(std::move(b0));
  lt.assignment.push_back(tracked);
  lt.step_overlap.emplace_back(tracked.size(), 1.0);
  lt.ambiguous.emplace_back(tracked.size(), false);

  for (size_t i = 1; i < strengths.size(); ++i) tracker.advance(strengths[i], false, 0);

  const geometry::FundamentalDomain fd = geometry::desymmetrize(first, cls);
  const double kc = 0.5 * (k_lo + k_hi);
  const double density = fd.area * kc / (2.0 * std::numbers::pi) -
                         (fd.dirichlet_length() - fd.neumann_length()) / (4.0 * std::numbers::pi);
  lt.mean_spacing = 1.0 / density;
  annotate_crossings(lt, cfg.crossing_gap_fraction * lt.mean_spacing);
  return lt;
}

}  // namespace qecho::billiard
