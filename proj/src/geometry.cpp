#include "qecho/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "qecho/error.hpp"
#include "qecho/format.hpp"

namespace qecho::geometry {

namespace {

constexpr double kPi = std::numbers::pi;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void check_shape(const BilliardShape::Params& p) {
  std::visit(Overloaded{
                 [](const Stadium& s) {
                   require(s.r > 0.0 && std::isfinite(s.r), "stadium radius must be positive");
                   require(s.l >= 0.0 && std::isfinite(s.l), "stadium straight length must be non-negative");
                 },
                 [](const Rectangle& r) {
                   require(r.a > 0.0 && r.b > 0.0 && std::isfinite(r.a) && std::isfinite(r.b),
                           "rectangle sides must be positive");
                 },
                 [](const Circle& c) { require(c.R > 0.0 && std::isfinite(c.R), "circle radius must be positive"); },
             },
             p);
}

// Appends n midpoint samples of a straight panel from a to b.
void sample_segment(std::vector<BoundarySample>& out, Vec2 a, Vec2 b, Vec2 normal, int n) {
  const double len = std::hypot(b.x - a.x, b.y - a.y);
  const double w = len / n;
  for (int i = 0; i < n; ++i) {
    const double t = (i + 0.5) / n;
    out.push_back({a + t * (b - a), normal, w});
  }
}

// Appends n midpoint samples of the arc centre + R(cos t, sin t), t in [t0, t1].
void sample_arc(std::vector<BoundarySample>& out, Vec2 centre, double R, double t0, double t1, int n) {
  const double w = R * (t1 - t0) / n;
  for (int i = 0; i < n; ++i) {
    const double t = t0 + (i + 0.5) * (t1 - t0) / n;
    const Vec2 nrm{std::cos(t), std::sin(t)};
    out.push_back({centre + R * nrm, nrm, w});
  }
}

int panel_count(double length, double points_per_wavelength, double k) {
  const double n = std::ceil(length * k / (2.0 * kPi) * points_per_wavelength);
  return std::max(1, static_cast<int>(n));
}

}  // namespace

BilliardShape BilliardShape::stadium(double r, double l) {
  Params p = Stadium{r, l};
  check_shape(p);
  return BilliardShape(p);
}

BilliardShape BilliardShape::rectangle(double a, double b) {
  Params p = Rectangle{a, b};
  check_shape(p);
  return BilliardShape(p);
}

BilliardShape BilliardShape::circle(double R) {
  Params p = Circle{R};
  check_shape(p);
  return BilliardShape(p);
}

ShapeKind BilliardShape::kind() const {
  return std::visit(Overloaded{[](const Stadium&) { return ShapeKind::Stadium; },
                               [](const Rectangle&) { return ShapeKind::Rectangle; },
                               [](const Circle&) { return ShapeKind::Circle; }},
                    params_);
}

double BilliardShape::area() const {
  return std::visit(Overloaded{[](const Stadium& s) { return kPi * s.r * s.r + 2.0 * s.r * s.l; },
                               [](const Rectangle& r) { return r.a * r.b; },
                               [](const Circle& c) { return kPi * c.R * c.R; }},
                    params_);
}

double BilliardShape::perimeter() const {
  return std::visit(Overloaded{[](const Stadium& s) { return 2.0 * kPi * s.r + 2.0 * s.l; },
                               [](const Rectangle& r) { return 2.0 * (r.a + r.b); },
                               [](const Circle& c) { return 2.0 * kPi * c.R; }},
                    params_);
}

double BilliardShape::signed_distance(Vec2 p) const {
  return std::visit(Overloaded{
                        [&](const Stadium& s) {
                          const double c = 0.5 * s.l;
                          const double dx = std::max(std::abs(p.x) - c, 0.0);
                          return std::hypot(dx, p.y) - s.r;
                        },
                        [&](const Rectangle& r) {
                          const double qx = std::abs(p.x) - 0.5 * r.a;
                          const double qy = std::abs(p.y) - 0.5 * r.b;
                          const double outside = std::hypot(std::max(qx, 0.0), std::max(qy, 0.0));
                          return outside + std::min(std::max(qx, qy), 0.0);
                        },
                        [&](const Circle& c) { return std::hypot(p.x, p.y) - c.R; },
                    },
                    params_);
}

Vec2 BilliardShape::half_extent() const {
  return std::visit(Overloaded{[](const Stadium& s) { return Vec2{s.r + 0.5 * s.l, s.r}; },
                               [](const Rectangle& r) { return Vec2{0.5 * r.a, 0.5 * r.b}; },
                               [](const Circle& c) { return Vec2{c.R, c.R}; }},
                    params_);
}

double BilliardShape::radial_extent(double phi) const {
  const double cp = std::cos(phi);
  const double sp = std::sin(phi);
  return std::visit(Overloaded{
                        [&](const Stadium& s) {
                          const double c = 0.5 * s.l;
                          // Top wall y = r when the ray passes above the cap centre.
                          if (s.r * cp <= c * sp) return s.r / sp;
                          return c * cp + std::sqrt(s.r * s.r - c * c * sp * sp);
                        },
                        [&](const Rectangle& r) {
                          const double ha = 0.5 * r.a;
                          const double hb = 0.5 * r.b;
                          if (hb * cp >= ha * sp) return ha / cp;
                          return hb / sp;
                        },
                        [&](const Circle& c) { return c.R; },
                    },
                    params_);
}

std::vector<double> BilliardShape::radial_breakpoints() const {
  return std::visit(Overloaded{
                        [](const Stadium& s) {
                          if (s.l == 0.0) return std::vector<double>{};
                          return std::vector<double>{std::atan2(s.r, 0.5 * s.l)};
                        },
                        [](const Rectangle& r) { return std::vector<double>{std::atan2(r.b, r.a)}; },
                        [](const Circle&) { return std::vector<double>{}; },
                    },
                    params_);
}

std::string BilliardShape::describe() const {
  return std::visit(
      Overloaded{
          [](const Stadium& s) { return "stadium(r=" + format_exact(s.r) + ",l=" + format_exact(s.l) + ")"; },
          [](const Rectangle& r) { return "rectangle(a=" + format_exact(r.a) + ",b=" + format_exact(r.b) + ")"; },
          [](const Circle& c) { return "circle(R=" + format_exact(c.R) + ")"; },
      },
      params_);
}

PerturbationFamily family_of(const Perturbation& p) {
  return std::visit(Overloaded{[](const Dilation&) { return PerturbationFamily::Dilation; },
                               [](const Stretch&) { return PerturbationFamily::Stretch; },
                               [](const Physical&) { return PerturbationFamily::Physical; }},
                    p);
}

double strength_of(const Perturbation& p) {
  return std::visit(Overloaded{[](const Dilation& d) { return d.s; }, [](const Stretch& s) { return s.dl; },
                               [](const Physical& p) { return p.d; }},
                    p);
}

Perturbation make_perturbation(PerturbationFamily family, double strength) {
  switch (family) {
    case PerturbationFamily::Dilation:
      return Dilation{strength};
    case PerturbationFamily::Stretch:
      return Stretch{strength};
    case PerturbationFamily::Physical:
      return Physical{strength};
  }
  fail(ErrorKind::InvalidParameter, "unknown perturbation family");
}

PerturbationFamily parse_family(const std::string& name) {
  if (name == "dilation") return PerturbationFamily::Dilation;
  if (name == "stretch") return PerturbationFamily::Stretch;
  if (name == "physical") return PerturbationFamily::Physical;
  fail(ErrorKind::Config, "unknown perturbation family '" + name + "'");
}

std::string to_string(PerturbationFamily family) {
  switch (family) {
    case PerturbationFamily::Dilation:
      return "dilation";
    case PerturbationFamily::Stretch:
      return "stretch";
    case PerturbationFamily::Physical:
      return "physical";
  }
  return "?";
}

BilliardShape apply_perturbation(const BilliardShape& shape, const Perturbation& pert) {
  auto positive = [](double v, const char* what) {
    if (!(v > 0.0)) fail(ErrorKind::InvalidParameter, std::string("perturbed ") + what + " must stay positive");
    return v;
  };
  return std::visit(
      Overloaded{
          [&](const Dilation& d) {
            positive(d.s, "scale factor");
            return std::visit(
                Overloaded{
                    [&](const Stadium& s) { return BilliardShape::stadium(d.s * s.r, d.s * s.l); },
                    [&](const Rectangle& r) { return BilliardShape::rectangle(d.s * r.a, d.s * r.b); },
                    [&](const Circle& c) { return BilliardShape::circle(d.s * c.R); },
                },
                shape.params());
          },
          [&](const Stretch& st) {
            return std::visit(
                Overloaded{
                    [&](const Stadium& s) {
                      if (s.l + st.dl < 0.0)
                        fail(ErrorKind::InvalidParameter, "stretch would make the straight length negative");
                      return BilliardShape::stadium(s.r, s.l + st.dl);
                    },
                    [&](const Rectangle& r) {
                      if (r.a >= r.b) return BilliardShape::rectangle(positive(r.a + st.dl, "width"), r.b);
                      return BilliardShape::rectangle(r.a, positive(r.b + st.dl, "height"));
                    },
                    [&](const Circle& c) {
                      // A stretched circle is a stadium.
                      if (st.dl < 0.0) fail(ErrorKind::InvalidParameter, "a circle cannot be stretched negatively");
                      if (st.dl == 0.0) return BilliardShape::circle(c.R);
                      return BilliardShape::stadium(c.R, st.dl);
                    },
                },
                shape.params());
          },
          [&](const Physical& p) {
            return std::visit(
                Overloaded{
                    [&](const Stadium& s) { return BilliardShape::stadium(positive(s.r + p.d, "radius"), s.l); },
                    [&](const Rectangle& r) {
                      return BilliardShape::rectangle(positive(r.a + 2.0 * p.d, "width"),
                                                      positive(r.b + 2.0 * p.d, "height"));
                    },
                    [&](const Circle& c) { return BilliardShape::circle(positive(c.R + p.d, "radius")); },
                },
                shape.params());
          },
      },
      pert);
}

double equivalent_displacement(const BilliardShape& shape, const Perturbation& pert) {
  const BilliardShape moved = apply_perturbation(shape, pert);
  return (moved.area() - shape.area()) / shape.perimeter();
}

std::vector<BoundarySample> boundary_samples(const BilliardShape& shape, double points_per_wavelength, double k) {
  require(points_per_wavelength >= 3.0, "boundary sampling needs at least 3 points per wavelength");
  require(k > 0.0, "wavenumber must be positive");
  std::vector<BoundarySample> out;
  std::visit(Overloaded{
                 [&](const Stadium& s) {
                   const double c = 0.5 * s.l;
                   const int n_arc = panel_count(kPi * s.r, points_per_wavelength, k);
                   sample_arc(out, {c, 0.0}, s.r, -0.5 * kPi, 0.5 * kPi, n_arc);
                   if (s.l > 0.0) {
                     const int n_line = panel_count(s.l, points_per_wavelength, k);
                     sample_segment(out, {c, s.r}, {-c, s.r}, {0.0, 1.0}, n_line);
                   }
                   sample_arc(out, {-c, 0.0}, s.r, 0.5 * kPi, 1.5 * kPi, n_arc);
                   if (s.l > 0.0) {
                     const int n_line = panel_count(s.l, points_per_wavelength, k);
                     sample_segment(out, {-c, -s.r}, {c, -s.r}, {0.0, -1.0}, n_line);
                   }
                 },
                 [&](const Rectangle& r) {
                   const double ha = 0.5 * r.a;
                   const double hb = 0.5 * r.b;
                   const int na = panel_count(r.a, points_per_wavelength, k);
                   const int nb = panel_count(r.b, points_per_wavelength, k);
                   sample_segment(out, {ha, -hb}, {ha, hb}, {1.0, 0.0}, nb);
                   sample_segment(out, {ha, hb}, {-ha, hb}, {0.0, 1.0}, na);
                   sample_segment(out, {-ha, hb}, {-ha, -hb}, {-1.0, 0.0}, nb);
                   sample_segment(out, {-ha, -hb}, {ha, -hb}, {0.0, -1.0}, na);
                 },
                 [&](const Circle& c) {
                   sample_arc(out, {0.0, 0.0}, c.R, 0.0, 2.0 * kPi,
                              panel_count(2.0 * kPi * c.R, points_per_wavelength, k));
                 },
             },
             shape.params());
  return out;
}

std::string to_string(SymmetryClass cls) {
  std::string s;
  s += cls.about_x == Parity::Even ? '+' : '-';
  s += cls.about_y == Parity::Even ? '+' : '-';
  return s;
}

SymmetryClass parse_symmetry(const std::string& label) {
  auto one = [&](char c) {
    if (c == '+') return Parity::Even;
    if (c == '-') return Parity::Odd;
    fail(ErrorKind::Config, "parity label must be two of '+'/'-', got '" + label + "'");
  };
  if (label.size() != 2) fail(ErrorKind::Config, "parity label must be two of '+'/'-', got '" + label + "'");
  return {one(label[0]), one(label[1])};
}

std::vector<SymmetryClass> all_symmetry_classes() {
  return {{Parity::Even, Parity::Even}, {Parity::Even, Parity::Odd}, {Parity::Odd, Parity::Even},
          {Parity::Odd, Parity::Odd}};
}

double SymmetryLine::length() const { return std::hypot(to.x - from.x, to.y - from.y); }

double FundamentalDomain::dirichlet_length() const {
  double len = outer_length;
  if (x_axis.condition == LineCondition::Dirichlet) len += x_axis.length();
  if (y_axis.condition == LineCondition::Dirichlet) len += y_axis.length();
  return len;
}

double FundamentalDomain::neumann_length() const {
  double len = 0.0;
  if (x_axis.condition == LineCondition::Neumann) len += x_axis.length();
  if (y_axis.condition == LineCondition::Neumann) len += y_axis.length();
  return len;
}

double FundamentalDomain::weyl_count(double k) const {
  return area * k * k / (4.0 * kPi) - (dirichlet_length() - neumann_length()) * k / (4.0 * kPi);
}

std::vector<BoundarySample> FundamentalDomain::outer_samples(double points_per_wavelength, double k) const {
  require(points_per_wavelength >= 3.0, "boundary sampling needs at least 3 points per wavelength");
  require(k > 0.0, "wavenumber must be positive");
  std::vector<BoundarySample> out;
  std::visit(Overloaded{
                 [&](const Stadium& s) {
                   const double c = 0.5 * s.l;
                   if (c > 0.0) sample_segment(out, {0.0, s.r}, {c, s.r}, {0.0, 1.0},
                                               panel_count(c, points_per_wavelength, k));
                   sample_arc(out, {c, 0.0}, s.r, 0.0, 0.5 * kPi,
                              panel_count(0.5 * kPi * s.r, points_per_wavelength, k));
                 },
                 [&](const Rectangle& r) {
                   const double ha = 0.5 * r.a;
                   const double hb = 0.5 * r.b;
                   sample_segment(out, {ha, 0.0}, {ha, hb}, {1.0, 0.0}, panel_count(hb, points_per_wavelength, k));
                   sample_segment(out, {0.0, hb}, {ha, hb}, {0.0, 1.0}, panel_count(ha, points_per_wavelength, k));
                 },
                 [&](const Circle& c) {
                   sample_arc(out, {0.0, 0.0}, c.R, 0.0, 0.5 * kPi,
                              panel_count(0.5 * kPi * c.R, points_per_wavelength, k));
                 },
             },
             shape.params());
  return out;
}

FundamentalDomain desymmetrize(const BilliardShape& shape, SymmetryClass cls) {
  // Every representable shape is symmetric about both axes; the check guards
  // future shape kinds.
  const Vec2 h = shape.half_extent();
  const bool symmetric = std::abs(shape.signed_distance({h.x, 0.0})) < 1e-12 &&
                         std::abs(shape.signed_distance({-h.x, 0.0})) < 1e-12 &&
                         std::abs(shape.signed_distance({0.0, h.y})) < 1e-12 &&
                         std::abs(shape.signed_distance({0.0, -h.y})) < 1e-12;
  if (!symmetric) fail(ErrorKind::UnsupportedSymmetry, "shape lacks the reflection symmetries of " + to_string(cls));

  FundamentalDomain fd{shape, cls, 0.0, 0.0, {}, {}};
  fd.area = shape.area() / 4.0;
  fd.outer_length = shape.perimeter() / 4.0;
  auto cond = [](Parity p) { return p == Parity::Odd ? LineCondition::Dirichlet : LineCondition::Neumann; };
  fd.x_axis = {{0.0, 0.0}, {h.x, 0.0}, cond(cls.about_x)};
  fd.y_axis = {{0.0, 0.0}, {0.0, h.y}, cond(cls.about_y)};
  return fd;
}

}  // namespace qecho::geometry
