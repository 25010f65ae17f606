#include <cmath>
#include <complex>
#include <numbers>

#include "doctest.h"
#include "qecho/error.hpp"
#include "qecho/trap1d.hpp"

using namespace qecho::trap1d;
using std::numbers::pi;
using cplx = std::complex<double>;

namespace {

Trap1DModel harmonic(double x0 = 0.0) {
  Trap1DModel m;
  m.variant = Variant::Harmonic;
  m.omega = 1.0;
  m.x0 = x0;
  return m;
}

// Plain O(N^2) DFT kinetic energy, independent of the FFTW path.
Eigen::VectorXd kinetic_apply(const Eigen::VectorXd& psi, const Grid1D& grid, double mass) {
  const int n = grid.n;
  const double l = grid.x_max - grid.x_min;
  std::vector<cplx> c(static_cast<size_t>(n));
  for (int j = 0; j < n; ++j) {
    cplx acc = 0.0;
    for (int i = 0; i < n; ++i) acc += psi[i] * std::polar(1.0, -2 * pi * i * j / n);
    c[static_cast<size_t>(j)] = acc;
  }
  for (int j = 0; j < n; ++j) {
    const int jj = j <= n / 2 ? j : j - n;
    const double k = 2 * pi * jj / l;
    c[static_cast<size_t>(j)] *= k * k / (2 * mass);
  }
  Eigen::VectorXd out(n);
  for (int i = 0; i < n; ++i) {
    cplx acc = 0.0;
    for (int j = 0; j < n; ++j) acc += c[static_cast<size_t>(j)] * std::polar(1.0, 2 * pi * i * j / n);
    out[i] = acc.real() / n;
  }
  return out;
}

}  // namespace

TEST_CASE("harmonic oscillator spectrum") {
  const Grid1D grid{-14, 14, 256};
  const auto sp = eigensolve(harmonic().sample(grid), grid, 20);
  for (int n = 0; n < 20; ++n) CHECK(std::abs(sp.energies[n] - (n + 0.5)) < 1e-8);

  // Shifted oscillator: same spectrum.
  const auto shifted = eigensolve(harmonic(0.3).sample(grid), grid, 20);
  for (int n = 0; n < 20; ++n) CHECK(std::abs(shifted.energies[n] - sp.energies[n]) < 1e-8);
}

TEST_CASE("eigenstates are orthonormal and solve the discrete equation") {
  const Grid1D grid{-14, 14, 256};
  const auto m = harmonic();
  const auto v = m.sample(grid);
  const auto sp = eigensolve(v, grid, 12);
  for (int i = 0; i < 12; ++i) {
    for (int j = 0; j < 12; ++j) {
      CHECK(std::abs(inner(grid, sp.states.col(i), sp.states.col(j)) - (i == j ? 1.0 : 0.0)) < 1e-8);
    }
    const Eigen::VectorXd psi = sp.states.col(i);
    Eigen::VectorXd h = kinetic_apply(psi, grid, 1.0);
    for (int x = 0; x < grid.n; ++x) h[x] += v[static_cast<size_t>(x)] * psi[x];
    const double res = std::sqrt(grid.h()) * (h - sp.energies[i] * psi).norm();
    CHECK(res <= 1e-8 * std::abs(sp.energies[i]));

    // Virial theorem: <T> = <V> for each harmonic eigenstate.
    const double t = inner(grid, psi, kinetic_apply(psi, grid, 1.0));
    double pot = 0.0;
    for (int x = 0; x < grid.n; ++x) pot += grid.h() * v[static_cast<size_t>(x)] * psi[x] * psi[x];
    CHECK(std::abs(t - pot) < 1e-6);
  }
}

TEST_CASE("translated potential keeps its spectrum") {
  const Grid1D grid{-30, 30, 256};
  Trap1DModel m;
  m.variant = Variant::Gaussian;
  m.U = 40;
  m.w = 8;
  m.g = 0.3;
  const auto a = eigensolve(m.sample(grid), grid, 10);
  // Shift by a whole number of grid cells: exact on the periodic grid.
  const int cells = 7;
  std::vector<double> v(static_cast<size_t>(grid.n));
  for (int i = 0; i < grid.n; ++i) v[static_cast<size_t>(i)] = m.potential(grid.x(i) - cells * grid.h());
  const auto b = eigensolve(v, grid, 10);
  for (int n = 0; n < 10; ++n) CHECK(b.energies[n] == doctest::Approx(a.energies[n]).epsilon(1e-9));
}

TEST_CASE("evanescent trap shifts every level by the same amount") {
  const Grid1D grid{-1, 40, 512};
  Trap1DModel m;
  m.variant = Variant::Evanescent;
  m.U = 100;
  m.kappa = 1.0;
  m.g = 1.0;
  const auto a = eigensolve(m.sample(grid), grid, 15);
  const double c = 1.5;
  const auto b = eigensolve(m.sample(grid, c), grid, 15);
  const double shift = m.mass * m.g / m.kappa * std::log(c);
  for (int n = 0; n < 15; ++n) CHECK(std::abs(b.energies[n] - a.energies[n] - shift) <= 1e-8 * std::abs(shift));
}

TEST_CASE("identical pair has identity overlaps") {
  Trap1DModel m;
  m.variant = Variant::Gaussian;
  m.U = 60;
  m.w = 15.491933384829668;
  m.g = 0.19364916731037085;
  m.eta = 0.0;
  const Grid1D grid{-27.885480092693403, 27.885480092693403, 512};
  const auto p = build_pair(m, grid, 15);
  CHECK((p.overlap - Eigen::MatrixXd::Identity(15, 15)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("oscillation period") {
  CHECK(oscillation_period(harmonic()) == doctest::Approx(2 * pi).epsilon(1e-10));
  Trap1DModel g;
  g.variant = Variant::Gaussian;
  g.U = 50;
  g.w = 7;
  g.g = 0.0;
  CHECK(oscillation_period(g) == doctest::Approx(pi * g.w * std::sqrt(g.mass / g.U)).epsilon(1e-8));
}

TEST_CASE("bounce period matches a classical trajectory") {
  Trap1DModel m;
  m.variant = Variant::Evanescent;
  m.U = 100;
  m.kappa = 1.0;
  m.g = 1.0;
  const double e = 8.0;
  // Velocity Verlet from the wall-side turning point; the period is the time
  // between two successive upper turning points.
  auto force = [&](double x) { return (m.U * m.kappa * std::exp(-m.kappa * x) - m.mass * m.g) / m.mass; };
  double lo = -5.0, hi = potential_minimum(m);
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (m.potential(mid) > e ? lo : hi) = mid;
  }
  double x = 0.5 * (lo + hi), v = 0.0, t = 0.0;
  const double dt = 1e-5;
  double a = force(x);
  std::vector<double> tops;
  while (tops.size() < 2 && t < 100.0) {
    const double prev_v = v;
    x += v * dt + 0.5 * a * dt * dt;
    const double a_new = force(x);
    v += 0.5 * (a + a_new) * dt;
    a = a_new;
    t += dt;
    if (prev_v > 0.0 && v <= 0.0) tops.push_back(t - dt * v / (v - prev_v));
  }
  REQUIRE(tops.size() == 2);
  const double t_return = tops[1] - tops[0];
  CHECK(bounce_period(m, e) == doctest::Approx(t_return).epsilon(1e-4));
}

TEST_CASE("propagator") {
  const Grid1D grid{-16, 16, 256};
  const auto m = harmonic();
  const auto v = m.sample(grid);
  const auto sp = eigensolve(v, grid, 30);
  const double emax = *std::max_element(v.begin(), v.end()) + 0.5 * std::pow(pi / grid.h(), 2);
  const double dt = 0.1 / emax;

  SUBCASE("t = 0 is the identity") {
    const auto psi = to_complex(sp.states.col(3));
    const auto out = propagate(psi, v, grid, 0.0, dt, emax);
    for (size_t i = 0; i < psi.size(); ++i) CHECK(std::abs(out[i] - psi[i]) < 1e-15);
  }

  SUBCASE("coherent state revives after one period") {
    cvec psi(static_cast<size_t>(grid.n));
    for (int i = 0; i < grid.n; ++i) psi[static_cast<size_t>(i)] = std::pow(pi, -0.25) * std::exp(-0.5 * std::pow(grid.x(i) - 2.0, 2));
    const auto out = propagate(psi, v, grid, 2 * pi, dt, emax);
    const double f = std::norm(inner(grid, psi, out));
    CHECK(f >= 1 - 1e-6);
  }

  SUBCASE("eigenstates are stationary") {
    const auto psi = to_complex(sp.states.col(5));
    for (double t : {0.7, 3.1}) {
      const auto out = propagate(psi, v, grid, t, dt, emax);
      CHECK(std::abs(std::abs(inner(grid, psi, out)) - 1.0) < 1e-8);
    }
  }

  SUBCASE("oversized step is rejected") {
    const auto psi = to_complex(sp.states.col(0));
    CHECK_THROWS_AS(propagate(psi, v, grid, 1.0, 2.0 / emax, emax), qecho::Error);
  }
}

TEST_CASE("grid leakage is detected") {
  const Grid1D grid{-3, 3, 256};
  CHECK_THROWS_AS(eigensolve(harmonic().sample(grid), grid, 10), qecho::Error);
}
