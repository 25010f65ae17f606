#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "qecho/geometry.hpp"

using namespace qecho::geometry;
using std::numbers::pi;

namespace {

double weight_sum(const std::vector<BoundarySample>& s) {
  double w = 0.0;
  for (const auto& b : s) w += b.weight;
  return w;
}

}  // namespace

TEST_CASE("perturbation examples") {
  const auto st = BilliardShape::stadium(1, 2);
  CHECK(apply_perturbation(st, Dilation{1.0}) == st);
  const auto phys = apply_perturbation(st, Physical{0.01});
  const auto& p = std::get<Stadium>(phys.params());
  CHECK(p.r == doctest::Approx(1.01).epsilon(1e-15));
  CHECK(p.l == doctest::Approx(2.0).epsilon(1e-15));
  const auto rect = apply_perturbation(BilliardShape::rectangle(2, 1), Stretch{0.1});
  const auto& r = std::get<Rectangle>(rect.params());
  CHECK(r.a == doctest::Approx(2.1).epsilon(1e-15));
  CHECK(r.b == 1.0);
}

TEST_CASE("boundary sampling closes the perimeter") {
  const auto circle = boundary_samples(BilliardShape::circle(1), 3, 100);
  CHECK(std::abs(weight_sum(circle) - 2 * pi) < 1e-10);
  // 3 points per wavelength over 2 pi at k = 100.
  CHECK(circle.size() >= 290);
  CHECK(circle.size() <= 310);

  for (double k : {10.0, 57.3, 100.0}) {
    const auto st = boundary_samples(BilliardShape::stadium(1, 2), 10, k);
    CHECK(std::abs(weight_sum(st) - (2 * pi + 4)) < 1e-10);
    for (const auto& b : st) CHECK(std::abs(std::hypot(b.normal.x, b.normal.y) - 1.0) < 1e-12);
  }

  const auto rect = boundary_samples(BilliardShape::rectangle(2, 1), 10, 50);
  CHECK(std::abs(weight_sum(rect) - 6.0) < 1e-10);
  for (const auto& b : rect) {
    const bool corner = std::abs(std::abs(b.position.x) - 1.0) < 1e-12 && std::abs(std::abs(b.position.y) - 0.5) < 1e-12;
    CHECK_FALSE(corner);
  }
}

TEST_CASE("fundamental domains") {
  const auto q = desymmetrize(BilliardShape::stadium(1, 2), parse_symmetry("--"));
  CHECK(q.area == doctest::Approx((pi + 4) / 4).epsilon(1e-14));
  CHECK(q.x_axis.condition == LineCondition::Dirichlet);
  CHECK(q.y_axis.condition == LineCondition::Dirichlet);

  const auto r = desymmetrize(BilliardShape::rectangle(2, 1), parse_symmetry("+-"));
  CHECK(r.x_axis.condition == LineCondition::Neumann);
  CHECK(r.y_axis.condition == LineCondition::Dirichlet);
  CHECK(r.area == doctest::Approx(0.5));

  for (const auto& c : all_symmetry_classes()) CHECK(parse_symmetry(to_string(c)) == c);
  CHECK_THROWS(parse_symmetry("+x"));
}

TEST_CASE("Weyl estimate of the full stadium") {
  // Sum over the four classes equals A k^2 / 4 pi - P k / 4 pi for the full domain.
  const auto shape = BilliardShape::stadium(1, 2);
  double n = 0.0;
  for (const auto& c : all_symmetry_classes()) n += desymmetrize(shape, c).weyl_count(100.0);
  const double expected = (pi + 4) * 1e4 / (4 * pi) - (2 * pi + 4) * 100 / (4 * pi);
  CHECK(n == doctest::Approx(expected).epsilon(1e-3));
  CHECK(n == doctest::Approx(5601).epsilon(2e-3));
}

TEST_CASE("dilation composes multiplicatively") {
  for (const auto& shape : {BilliardShape::stadium(1, 2), BilliardShape::rectangle(2, 1), BilliardShape::circle(1)}) {
    const auto a = apply_perturbation(apply_perturbation(shape, Dilation{1.25}), Dilation{0.8});
    const auto b = apply_perturbation(shape, Dilation{1.25 * 0.8});
    CHECK(a.area() == doctest::Approx(b.area()).epsilon(1e-14));
    CHECK(a.perimeter() == doctest::Approx(b.perimeter()).epsilon(1e-14));
  }
}

TEST_CASE("physical and stretch commute on a stadium") {
  const auto s = BilliardShape::stadium(1, 2);
  const auto a = apply_perturbation(apply_perturbation(s, Physical{0.03}), Stretch{0.07});
  const auto b = apply_perturbation(apply_perturbation(s, Stretch{0.07}), Physical{0.03});
  const auto& pa = std::get<Stadium>(a.params());
  const auto& pb = std::get<Stadium>(b.params());
  CHECK(pa.r == doctest::Approx(pb.r).epsilon(1e-15));
  CHECK(pa.l == doctest::Approx(pb.l).epsilon(1e-15));
}

TEST_CASE("inside respects dilation") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(-2.5, 2.5);
  for (const auto& shape : {BilliardShape::stadium(1, 2), BilliardShape::rectangle(2, 1), BilliardShape::circle(1)}) {
    for (double s : {0.9, 1.013, 1.5}) {
      const auto big = apply_perturbation(shape, Dilation{s});
      for (int i = 0; i < 500; ++i) {
        const Vec2 p{u(rng), u(rng)};
        if (std::abs(shape.signed_distance(p)) < 1e-9) continue;
        CHECK(shape.inside(p) == big.inside(s * p));
      }
    }
  }
}

TEST_CASE("signed distance of a stadium") {
  const auto s = BilliardShape::stadium(1, 2);
  CHECK(s.signed_distance({0, 0}) == doctest::Approx(-1.0));
  CHECK(s.signed_distance({3, 0}) == doctest::Approx(1.0));
  CHECK(s.signed_distance({0.5, 1.5}) == doctest::Approx(0.5));
  CHECK(s.area() == doctest::Approx(pi + 4));
  CHECK(s.perimeter() == doctest::Approx(2 * pi + 4));
}

TEST_CASE("equivalent displacement of a physical perturbation is d") {
  const auto s = BilliardShape::stadium(1, 2);
  // Area grows by P d + pi d^2 for the offset domain.
  const double d = 1e-3;
  CHECK(equivalent_displacement(s, Physical{d}) == doctest::Approx(d + pi * d * d / (2 * pi + 4)).epsilon(1e-12));
}

TEST_CASE("invalid shapes are rejected") {
  CHECK_THROWS(BilliardShape::stadium(-1, 2));
  CHECK_THROWS(BilliardShape::rectangle(0, 1));
  CHECK_THROWS(BilliardShape::circle(0));
}
