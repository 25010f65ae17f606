#pragma once

// Hard-wall billiard domains, their deformation families and boundary
// discretizations. Lengths are dimensionless (hbar = 2m = 1).

#include <string>
#include <variant>
#include <vector>

namespace qecho::geometry {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }

// Two semicircles of radius r joined by straight sections of length l.
struct Stadium {
  double r = 1.0;
  double l = 0.0;
  friend bool operator==(const Stadium&, const Stadium&) = default;
};

// Axis-aligned rectangle of width a (along x) and height b, centred at the origin.
struct Rectangle {
  double a = 1.0;
  double b = 1.0;
  friend bool operator==(const Rectangle&, const Rectangle&) = default;
};

struct Circle {
  double R = 1.0;
  friend bool operator==(const Circle&, const Circle&) = default;
};

enum class ShapeKind { Stadium, Rectangle, Circle };

class BilliardShape {
 public:
  using Params = std::variant<Stadium, Rectangle, Circle>;

  static BilliardShape stadium(double r, double l);
  static BilliardShape rectangle(double a, double b);
  static BilliardShape circle(double R);

  ShapeKind kind() const;
  const Params& params() const { return params_; }

  double area() const;
  double perimeter() const;

  // Signed distance to the boundary: negative inside, zero on the wall.
  double signed_distance(Vec2 p) const;
  bool inside(Vec2 p) const { return signed_distance(p) < 0.0; }

  // Half extents of the bounding box.
  Vec2 half_extent() const;

  // Radial extent R(phi) of the first-quadrant piece, phi in [0, pi/2]; all
  // supported shapes are star-shaped about the centre.
  double radial_extent(double phi) const;
  // Angles in (0, pi/2) where R(phi) is not smooth.
  std::vector<double> radial_breakpoints() const;

  std::string describe() const;

  friend bool operator==(const BilliardShape&, const BilliardShape&) = default;

 private:
  explicit BilliardShape(Params p) : params_(p) {}
  Params params_;
};

struct Dilation {
  double s = 1.0;
};
// Change of the straight-section length, applied symmetrically about the centre.
struct Stretch {
  double dl = 0.0;
};
// Every wall moved a distance d along its outward normal.
struct Physical {
  double d = 0.0;
};

using Perturbation = std::variant<Dilation, Stretch, Physical>;

enum class PerturbationFamily { Dilation, Stretch, Physical };

PerturbationFamily family_of(const Perturbation& p);
double strength_of(const Perturbation& p);
Perturbation make_perturbation(PerturbationFamily family, double strength);
PerturbationFamily parse_family(const std::string& name);
std::string to_string(PerturbationFamily family);

BilliardShape apply_perturbation(const BilliardShape& shape, const Perturbation& pert);

// Mean normal displacement of the wall produced by the perturbation, used to put
// different families on a common strength axis.
double equivalent_displacement(const BilliardShape& shape, const Perturbation& pert);

struct BoundarySample {
  Vec2 position;
  Vec2 normal;
  double weight = 0.0;
};

// Midpoint-rule sampling of the full boundary, panel by panel, so no sample lands
// on a corner or a curvature jump.
std::vector<BoundarySample> boundary_samples(const BilliardShape& shape, double points_per_wavelength,
                                             double k);

enum class Parity { Even, Odd };

// Parity under reflection about the x-axis (y -> -y) and about the y-axis (x -> -x).
struct SymmetryClass {
  Parity about_x = Parity::Odd;
  Parity about_y = Parity::Odd;

  friend bool operator==(const SymmetryClass&, const SymmetryClass&) = default;
};

inline double sign(Parity p) { return p == Parity::Even ? 1.0 : -1.0; }

// "+-" style label: first symbol about the x-axis, second about the y-axis.
std::string to_string(SymmetryClass cls);
SymmetryClass parse_symmetry(const std::string& label);
std::vector<SymmetryClass> all_symmetry_classes();

enum class LineCondition { Dirichlet, Neumann };

struct SymmetryLine {
  Vec2 from;
  Vec2 to;
  LineCondition condition = LineCondition::Dirichlet;
  double length() const;
};

// Quarter of a doubly symmetric shape with boundary conditions on the symmetry
// lines chosen by parity (odd -> Dirichlet, even -> Neumann).
struct FundamentalDomain {
  BilliardShape shape;
  SymmetryClass cls;
  double area = 0.0;
  double outer_length = 0.0;
  SymmetryLine x_axis;  // y = 0 line
  SymmetryLine y_axis;  // x = 0 line

  double dirichlet_length() const;
  double neumann_length() const;
  // Smooth Weyl estimate of the number of states with wavenumber below k.
  double weyl_count(double k) const;
  // Outer (physical) wall of the quarter, midpoint sampled per smooth segment.
  std::vector<BoundarySample> outer_samples(double points_per_wavelength, double k) const;
};

FundamentalDomain desymmetrize(const BilliardShape& shape, SymmetryClass cls);

}  // namespace qecho::geometry
