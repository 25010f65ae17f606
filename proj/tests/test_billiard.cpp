#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <random>

#include "doctest.h"
#include "qecho/billiard.hpp"

using namespace qecho;
using namespace qecho::billiard;
using geometry::BilliardShape;
using geometry::parse_symmetry;
using geometry::Vec2;
using std::numbers::pi;

namespace {

// J_0..J_nmax at x by Miller's backward recurrence, normalized with
// J_0 + 2 sum J_2k = 1.
std::vector<double> bessel_j(int nmax, double x) {
  int start = static_cast<int>(x) + nmax + 60;
  if (start % 2) ++start;
  std::vector<double> j(static_cast<size_t>(start + 2), 0.0);
  j[static_cast<size_t>(start + 1)] = 0.0;
  j[static_cast<size_t>(start)] = 1e-300;
  for (int k = start; k >= 1; --k) {
    j[static_cast<size_t>(k - 1)] = 2.0 * k / x * j[static_cast<size_t>(k)] - j[static_cast<size_t>(k + 1)];
    if (std::abs(j[static_cast<size_t>(k - 1)]) > 1e250) {
      for (int i = k - 1; i <= start + 1; ++i) j[static_cast<size_t>(i)] *= 1e-250;
    }
  }
  double norm = j[0];
  for (int k = 2; k <= start; k += 2) norm += 2.0 * j[static_cast<size_t>(k)];
  j.resize(static_cast<size_t>(nmax + 1));
  for (double& v : j) v /= norm;
  return j;
}

double bessel_jn(int n, double x) { return bessel_j(n, x)[static_cast<size_t>(n)]; }

std::vector<double> bessel_zeros_in(int n, double lo, double hi) {
  std::vector<double> out;
  const double step = 0.01;
  double a = lo, fa = bessel_jn(n, a);
  while (a < hi) {
    const double b = std::min(a + step, hi);
    const double fb = bessel_jn(n, b);
    if (fa * fb < 0.0) {
      double l = a, r = b, fl = fa;
      for (int i = 0; i < 60; ++i) {
        const double m = 0.5 * (l + r);
        const double fm = bessel_jn(n, m);
        if (fl * fm <= 0.0) {
          r = m;
        } else {
          l = m;
          fl = fm;
        }
      }
      out.push_back(0.5 * (l + r));
    }
    a = b;
    fa = fb;
  }
  return out;
}

struct Mode {
  int n = 0;
  int m = 0;
  double k = 0.0;
};

// Rectangle modes sin(n pi (x + a/2) / a) sin(m pi (y + b/2) / b) in the class;
// even about the x-axis means m odd, even about the y-axis means n odd.
std::vector<Mode> rectangle_modes(double a, double b, geometry::SymmetryClass cls, double lo, double hi) {
  std::vector<Mode> out;
  for (int n = 1; n * pi / a <= hi; ++n) {
    for (int m = 1; m * pi / b <= hi; ++m) {
      const double k = pi * std::hypot(n / a, m / b);
      if (k < lo || k > hi) continue;
      const bool ex = m % 2 == 1, ey = n % 2 == 1;
      if ((cls.about_x == geometry::Parity::Even) == ex && (cls.about_y == geometry::Parity::Even) == ey) {
        out.push_back({n, m, k});
      }
    }
  }
  return out;
}

// Mode with this k when it is the only one within rel 1e-6.
std::optional<Mode> identify(const std::vector<Mode>& modes, double k) {
  std::optional<Mode> hit;
  for (const auto& md : modes) {
    if (std::abs(md.k / k - 1.0) < 1e-6) {
      if (hit) return std::nullopt;
      hit = md;
    }
  }
  return hit;
}

// sqrt(2/a) sin(n pi (x + a/2) / a) overlaps on [-1, 1] by composite Simpson.
double sine_overlap(int n, double a, int n2, double a2, double half) {
  const int steps = 20000;
  const double h = 2 * half / steps;
  double acc = 0.0;
  for (int i = 0; i <= steps; ++i) {
    const double x = -half + i * h;
    const double f = std::sqrt(2 / a) * std::sin(n * pi * (x + a / 2) / a) * std::sqrt(2 / a2) *
                     std::sin(n2 * pi * (x + a2 / 2) / a2);
    acc += f * (i == 0 || i == steps ? 1 : (i % 2 ? 4 : 2));
  }
  return acc * h / 3;
}

}  // namespace

TEST_CASE("Bessel oracle sanity") {
  // J_0(2.404825557695773) = 0 and J_1(1) = 0.4400505857449335.
  CHECK(std::abs(bessel_jn(0, 2.404825557695773)) < 1e-14);
  CHECK(bessel_jn(1, 1.0) == doctest::Approx(0.4400505857449335).epsilon(1e-13));
}

TEST_CASE("circle levels are Bessel zeros") {
  // (-,-): sin(n theta) with n even.
  const double lo = 99.7, hi = 100.3;
  std::vector<double> expected;
  for (int n = 2; n <= 100; n += 2) {
    for (double z : bessel_zeros_in(n, lo, hi)) expected.push_back(z);
  }
  std::sort(expected.begin(), expected.end());
  const auto b = solve_window(BilliardShape::circle(1), parse_symmetry("--"), 100.0, 0.3);
  const auto ks = b.wavenumbers();
  REQUIRE(ks.size() == expected.size());
  for (size_t i = 0; i < ks.size(); ++i) CHECK(std::abs(ks[i] / expected[i] - 1.0) < 1e-6);
}

TEST_CASE("rectangle eigenfunctions and overlaps") {
  const double a = 2.0, bh = 1.0;
  const auto cls = parse_symmetry("-+");
  const auto basis = solve_window(BilliardShape::rectangle(a, bh), cls, 100.0, 0.3);
  const auto modes = rectangle_modes(a, bh, cls, 99.7, 100.3);
  REQUIRE(basis.states.size() == modes.size());

  SUBCASE("wavefunction values") {
    std::mt19937 rng(1);
    std::uniform_real_distribution<double> ux(-1.0, 1.0), uy(-0.5, 0.5);
    std::vector<Vec2> pts;
    for (int i = 0; i < 400; ++i) pts.push_back({ux(rng), uy(rng)});
    int checked = 0;
    for (const auto& s : basis.states) {
      const auto md = identify(modes, s.k);
      if (!md) continue;
      ++checked;
      const auto v = eval_wavefunction(s, pts);
      double dot = 0.0, err_p = 0.0, err_m = 0.0;
      for (size_t i = 0; i < pts.size(); ++i) {
        const double ref = 2 / std::sqrt(a * bh) * std::sin(md->n * pi * (pts[i].x + a / 2) / a) *
                           std::sin(md->m * pi * (pts[i].y + bh / 2) / bh);
        dot += ref * v[i];
        err_p += std::pow(v[i] - ref, 2);
        err_m += std::pow(v[i] + ref, 2);
      }
      CHECK(std::sqrt(std::min(err_p, err_m) / pts.size()) < 1e-6);
    }
    CHECK(checked > 0);

    const std::vector<Vec2> outside = {{1.2, 0.0}, {0.0, 0.7}, {-3.0, 2.0}};
    for (double x : eval_wavefunction(basis.states.front(), outside)) CHECK(x == 0.0);
  }

  SUBCASE("self overlaps") {
    const auto o = overlap_matrix(basis, basis);
    const auto n = static_cast<Eigen::Index>(basis.states.size());
    CHECK((o.entries - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() < 1e-6);
  }

  SUBCASE("stretched rectangle: separable sine overlaps") {
    const double da = 0.004;
    const auto stretched = solve_window(BilliardShape::rectangle(a + da, bh), cls, 100.0, 0.3);
    const auto modes2 = rectangle_modes(a + da, bh, cls, 99.7, 100.3);
    int checked = 0;
    for (const auto& s1 : basis.states) {
      const auto m1 = identify(modes, s1.k);
      if (!m1) continue;
      for (const auto& s2 : stretched.states) {
        const auto m2 = identify(modes2, s2.k);
        if (!m2) continue;
        const double o = overlap(s1, s2);
        const double ref = m1->m == m2->m ? sine_overlap(m1->n, a, m2->n, a + da, a / 2) : 0.0;
        CHECK(std::abs(std::abs(o) - std::abs(ref)) < 1e-6);
        CHECK(std::abs(overlap(s2, s1) - o) < 1e-7);
        ++checked;
      }
    }
    CHECK(checked > 4);
  }
}

TEST_CASE("states of different parity do not couple") {
  const auto shape = BilliardShape::stadium(1, 2);
  const auto a = solve_window(shape, parse_symmetry("--"), 100.0, 0.1);
  const auto b = solve_window(geometry::apply_perturbation(shape, geometry::Stretch{0.01}), parse_symmetry("+-"), 100.0,
                              0.1);
  const auto o = overlap_matrix(a, b);
  CHECK(o.entries.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("dilation is exact") {
  const auto shape = BilliardShape::stadium(1, 2);
  const auto cls = parse_symmetry("--");
  const auto a = solve_window(shape, cls, 100.0, 0.1);
  const double s = 1.007;
  const auto moved = geometry::apply_perturbation(shape, geometry::Dilation{s});
  const auto b = solve_window(moved, cls, 100.0 / s, 0.1 / s);
  REQUIRE(a.states.size() == b.states.size());
  for (size_t i = 0; i < a.states.size(); ++i) {
    CHECK(std::abs(b.states[i].k * s / a.states[i].k - 1.0) < 1e-6);
    const auto d = dilated(a.states[i], s);
    CHECK(d.k == doctest::Approx(a.states[i].k / s).epsilon(1e-15));
    CHECK(std::abs(std::abs(overlap(d, b.states[i])) - 1.0) < 1e-6);
  }
}

TEST_CASE("boundary scan agrees with the scaling solve") {
  const auto shape = BilliardShape::stadium(1, 2);
  const auto cls = parse_symmetry("--");
  ScanConfig sc;
  sc.basis_factor = 3.0;
  const auto scan = boundary_svd_scan(shape, cls, 99.95, 100.05, sc);
  const auto solved = solve_window(shape, cls, 100.0, 0.05);
  const auto ks = solved.wavenumbers();
  REQUIRE(scan.size() == ks.size());
  for (size_t i = 0; i < ks.size(); ++i) CHECK(std::abs(scan[i] / ks[i] - 1.0) < 1e-6);
}

TEST_CASE("rectangle levels follow the analytic curves under stretch") {
  const auto cls = parse_symmetry("-+");
  TrackConfig tc;
  const std::vector<double> grid = {0.0, 0.0005, 0.001};
  const auto lt =
      track_levels(BilliardShape::rectangle(2, 1), cls, geometry::PerturbationFamily::Stretch, grid, 99.8, 100.1, tc);
  const auto modes = rectangle_modes(2, 1, cls, 99.5, 100.5);
  int checked = 0;
  for (size_t t = 0; t < lt.tracks(); ++t) {
    const auto md = identify(modes, lt.state(0, t).k);
    if (!md) continue;
    ++checked;
    const auto curve = lt.k_curve(t);
    for (size_t i = 0; i < lt.strengths.size(); ++i) {
      const double ref = pi * std::hypot(md->n / (2 + lt.strengths[i]), double(md->m));
      CHECK(std::abs(curve[i] / ref - 1.0) < 1e-6);
    }
  }
  CHECK(checked > 0);
}

TEST_CASE("assignment is optimal") {
  std::mt19937 rng(42);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const int rows = 3 + trial % 3, cols = 5;
    Eigen::MatrixXd s(rows, cols);
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < cols; ++j) s(i, j) = u(rng);
    }
    std::vector<int> perm(cols);
    for (int j = 0; j < cols; ++j) perm[static_cast<size_t>(j)] = j;
    double best = -1.0;
    do {
      double v = 0.0;
      for (int i = 0; i < rows; ++i) v += s(i, perm[static_cast<size_t>(i)]);
      best = std::max(best, v);
    } while (std::next_permutation(perm.begin(), perm.end()));
    const auto a = max_weight_assignment(s);
    double got = 0.0;
    for (int i = 0; i < rows; ++i) got += s(i, a[static_cast<size_t>(i)]);
    CHECK(got == doctest::Approx(best).epsilon(1e-12));
    std::vector<int> sorted = a;
    std::sort(sorted.begin(), sorted.end());
    CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());
  }
}
