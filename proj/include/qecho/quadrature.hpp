#pragma once

#include <vector>

#include "qecho/geometry.hpp"

namespace qecho::quadrature {

struct Rule1D {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// n-point Gauss-Legendre rule on [-1, 1].
const Rule1D& gauss_legendre(int n);

// Composite Gauss-Legendre rule on [a, b] with `panels` equal panels.
Rule1D composite_gauss(double a, double b, int panels, int order);

// First-quadrant piece of the intersection of two centred star-shaped domains,
// described in polar form by R(phi) = min(R_A(phi), R_B(phi)).
class QuarterIntersection {
 public:
  QuarterIntersection(const geometry::BilliardShape& a, const geometry::BilliardShape& b);
  explicit QuarterIntersection(const geometry::BilliardShape& a) : QuarterIntersection(a, a) {}

  double radius(double phi) const;
  // dR/dphi, one-sided from the left at breakpoints.
  double radius_derivative(double phi) const;
  // Sorted angles 0 = b_0 < ... < b_m = pi/2 between which R is smooth.
  const std::vector<double>& pieces() const { return pieces_; }
  double max_radius() const;

 private:
  geometry::BilliardShape a_;
  geometry::BilliardShape b_;
  std::vector<double> pieces_;
};

struct BoundaryNode {
  geometry::Vec2 position;
  geometry::Vec2 normal;
  double weight = 0.0;
};

// Gauss-Legendre nodes on the outer wall of the quarter intersection, panelled
// per smooth piece; `points_per_wavelength` is measured against wavenumber k.
std::vector<BoundaryNode> outer_wall_nodes(const QuarterIntersection& dom, double k, double points_per_wavelength);

struct AreaNode {
  double x = 0.0;
  double y = 0.0;
  double weight = 0.0;
};

// Polar Gauss-Legendre rule over the quarter intersection. The integrand is
// assumed to oscillate with wavenumber at most k.
std::vector<AreaNode> area_nodes(const QuarterIntersection& dom, double k, double points_per_wavelength);

}  // namespace qecho::quadrature
