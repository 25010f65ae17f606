#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "qecho/error.hpp"
#include "qecho/spectroscopy.hpp"
#include "qecho/trap1d.hpp"

using namespace qecho::spectroscopy;
using std::numbers::pi;

namespace {

SpectralPair two_level(double delta0) {
  SpectralPair p;
  p.e1 = {0.0, 1.3};
  p.e2 = {delta0, 1.3 + delta0};
  p.overlap = Eigen::MatrixXd::Identity(2, 2);
  return p;
}

// Random orthogonal mixing of a ladder spectrum.
SpectralPair mixed_pair(int n, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) a(i, j) += 0.15 * g(rng);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ();
  for (int i = 0; i < n; ++i) {
    if (q(i, i) < 0) q.col(i) *= -1.0;
  }
  SpectralPair p;
  for (int i = 0; i < n; ++i) {
    p.e1.push_back(i + 0.1 * std::sin(i * 1.7));
    p.e2.push_back(i + 0.02 + 0.13 * std::cos(i * 0.9));
  }
  p.overlap = q;
  return p;
}

SpectralPair gaussian_pair(double eta) {
  qecho::trap1d::Trap1DModel m;
  m.variant = qecho::trap1d::Variant::Gaussian;
  m.U = 60;
  m.w = 15.491933384829668;
  m.g = 0.19364916731037085;
  m.eta = eta;
  const qecho::trap1d::Grid1D grid{-27.885480092693403, 27.885480092693403, 512};
  const auto tp = qecho::trap1d::build_pair(m, grid, 20, 30);
  SpectralPair p;
  p.e1 = tp.h1.energies;
  p.e2 = tp.h2.energies;
  p.overlap = tp.overlap;
  return p;
}

}  // namespace

TEST_CASE("two-level Ramsey fringes") {
  const double d0 = 0.37, mw = 0.12;
  const auto p = two_level(d0);
  for (double t : {0.0, 0.5, 2.0, 11.3}) {
    CHECK(ramsey_p2(p, 0, mw, t) == doctest::Approx(0.5 * (1 + std::cos((d0 - mw) * t))).epsilon(1e-14));
    CHECK(generalized_detuning(p, 1, mw, t).value == doctest::Approx(d0 - mw).epsilon(1e-12));
  }
  CHECK(ramsey_p2(p, 0, mw, 0.0) == 1.0);
}

TEST_CASE("identity overlaps give no echo signal") {
  const auto p = two_level(0.8);
  for (double t : {0.0, 1.0, 17.0}) {
    CHECK(std::abs(echo_amplitude(p, 0, t) - cplx(1.0)) < 1e-14);
    CHECK(echo_p2(p, 1, t) < 1e-14);
  }
}

TEST_CASE("echo vanishes at tau = 0") {
  const auto p = mixed_pair(12, 3);
  for (int n = 0; n < 12; ++n) CHECK(echo_p2(p, n, 0.0) == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("echo refocuses a displaced harmonic pair after one period") {
  const qecho::trap1d::Grid1D grid{-20, 22, 512};
  qecho::trap1d::Trap1DModel m;
  m.variant = qecho::trap1d::Variant::Harmonic;
  const auto h1 = qecho::trap1d::eigensolve(m.sample(grid), grid, 70);
  m.x0 = 0.7;
  const auto h2 = qecho::trap1d::eigensolve(m.sample(grid), grid, 70);
  const auto tp = qecho::trap1d::make_pair(h1, h2);
  SpectralPair p;
  p.e1 = tp.h1.energies;
  p.e2 = tp.h2.energies;
  p.overlap = tp.overlap;
  for (int n : {0, 3, 8}) CHECK(std::abs(echo_amplitude(p, n, 2 * pi) - cplx(1.0)) < 1e-6);
  CHECK(echo_p2(p, 0, pi / 2) > 0.01);
}

TEST_CASE("hyperfine offset drops out of the echo") {
  auto p = mixed_pair(10, 11);
  auto q = p;
  for (auto& e : q.e2) e += 123.456;
  for (double t : {0.3, 2.9, 14.0}) {
    for (int n = 0; n < 10; ++n) CHECK(std::abs(echo_amplitude(p, n, t) - echo_amplitude(q, n, t)) < 1e-11);
  }
}

TEST_CASE("eigenvector sign flips leave P2 unchanged") {
  const auto p = mixed_pair(10, 5);
  auto q = p;
  q.overlap.col(2) *= -1.0;
  q.overlap.row(6) *= -1.0;
  for (double t : {0.4, 3.3}) {
    for (int n = 0; n < 10; ++n) {
      CHECK(echo_p2(q, n, t) == doctest::Approx(echo_p2(p, n, t)).epsilon(1e-12));
      CHECK(ramsey_p2(q, n, 0.1, t) == doctest::Approx(ramsey_p2(p, n, 0.1, t)).epsilon(1e-12));
    }
  }
}

TEST_CASE("P2 stays in [0, 1]") {
  const auto p = mixed_pair(15, 9);
  for (int i = 0; i < 50; ++i) {
    const double t = 0.37 * i;
    for (int n = 0; n < 15; ++n) {
      const double e = echo_p2(p, n, t);
      const double r = ramsey_p2(p, n, 0.05, t);
      CHECK(e >= 0.0);
      CHECK(e <= 1.0);
      CHECK(r >= 0.0);
      CHECK(r <= 1.0);
    }
  }
}

TEST_CASE("two-time echo equals the symmetric one on the diagonal") {
  const auto p = mixed_pair(8, 2);
  for (double t : {0.5, 4.0}) CHECK(echo_p2(p, 3, t, t, 0.7) == doctest::Approx(echo_p2(p, 3, t)).epsilon(1e-13));
}

TEST_CASE("thermal averaging") {
  ThermalWeights one;
  one.weights = {1.0};
  const std::vector<double> s = {0.1, 0.4, 0.9};
  CHECK(thermal_average({s}, one) == s);

  ThermalWeights uniform;
  uniform.weights = {0.25, 0.25, 0.25, 0.25};
  const auto same = thermal_average({s, s, s, s}, uniform);
  for (size_t i = 0; i < s.size(); ++i) CHECK(same[i] == doctest::Approx(s[i]).epsilon(1e-15));

  ThermalWeights two;
  two.weights = {0.25, 0.75};
  CHECK(thermal_average({{0.0}, {1.0}}, two).front() == doctest::Approx(0.75));
}

TEST_CASE("Boltzmann weights") {
  std::vector<double> e;
  for (int i = 0; i < 200; ++i) e.push_back(0.5 + i);
  const auto w = thermal_weights(e, 3.0, 0.99);
  double sum = 0.0;
  for (double x : w.weights) sum += x;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(w.coverage >= 0.99);
  CHECK(w.warning.empty());
  // Geometric series: the smallest count holding 99% of the weight.
  const double q = std::exp(-1.0 / 3.0);
  const int expected = static_cast<int>(std::ceil(std::log(0.01) / std::log(q)));
  CHECK(w.size() == expected);
  CHECK(w.weights[1] / w.weights[0] == doctest::Approx(q).epsilon(1e-14));

  const auto short_list = thermal_weights(std::vector<double>(e.begin(), e.begin() + 5), 3.0);
  CHECK_FALSE(short_list.warning.empty());
}

TEST_CASE("long-time echo limits") {
  auto p = mixed_pair(6, 1);
  ThermalWeights w;
  w.weights = std::vector<double>(6, 1.0 / 6);
  auto id = p;
  id.overlap = Eigen::MatrixXd::Identity(6, 6);
  CHECK(long_time_echo(id, w) == doctest::Approx(0.0));

  auto swapped = p;
  swapped.overlap = Eigen::MatrixXd::Zero(6, 6);
  for (int i = 0; i < 6; ++i) swapped.overlap((i + 1) % 6, i) = 1.0;
  swapped.truncation_tolerance = 1.0;
  CHECK(long_time_echo(swapped, w) == doctest::Approx(0.5));
}

TEST_CASE("truncated columns are refused") {
  auto p = mixed_pair(6, 4);
  p.overlap.col(2) *= 0.9;
  CHECK_THROWS_AS(echo_p2(p, 2, 1.0), qecho::Error);
  CHECK_NOTHROW(echo_p2(p, 1, 1.0));
}

TEST_CASE("trap detuning") {
  SUBCASE("no perturbation, no detuning") {
    const auto p = gaussian_pair(0.0);
    for (int n = 0; n < 20; ++n) CHECK(std::abs(generalized_detuning(p, n, 0.0, 1.0).value) < 1e-10);
  }
  SUBCASE("Gaussian trap detuning varies monotonically with n") {
    const auto p = gaussian_pair(1e-3);
    std::vector<double> d;
    for (int n = 0; n < 20; ++n) d.push_back(generalized_detuning(p, n, 0.0, 0.0).value);
    bool inc = true, dec = true;
    for (size_t i = 1; i < d.size(); ++i) {
      inc = inc && d[i] > d[i - 1];
      dec = dec && d[i] < d[i - 1];
    }
    CHECK((inc || dec));
  }
}
