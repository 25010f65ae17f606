#include "plane_waves.hpp"

#include <cmath>
#include <complex>
#include <numbers>

namespace qecho::billiard::detail {

namespace {

using cplx = std::complex<double>;

// f_x carries the parity under x -> -x, f_y the parity under y -> -y.
bool x_even(SymmetryClass cls) { return cls.about_y == geometry::Parity::Even; }
bool y_even(SymmetryClass cls) { return cls.about_x == geometry::Parity::Even; }

// One factor cos(a t) or sin(a t) times exp(-shift), with a possibly complex.
// The shift keeps evanescent factors O(1) on the domain without overflow.
struct Factor {
  cplx a;
  double shift = 0.0;
  bool even = true;

  void eval(double t, cplx& f, cplx& df) const {
    const double ar = a.real();
    const double ai = a.imag();
    const double c = std::cos(ar * t);
    const double s = std::sin(ar * t);
    double ch = 1.0;
    double sh = 0.0;
    if (ai != 0.0) {
      const double ep = std::exp(ai * t - shift);
      const double em = std::exp(-ai * t - shift);
      ch = 0.5 * (ep + em);
      sh = 0.5 * (ep - em);
    }
    // cos(a t) = cos(ar t) cosh(ai t) - i sin(ar t) sinh(ai t)
    // sin(a t) = sin(ar t) cosh(ai t) + i cos(ar t) sinh(ai t)
    const cplx cz(c * ch, -s * sh);
    const cplx sz(s * ch, c * sh);
    if (even) {
      f = cz;
      df = -a * sz;
    } else {
      f = sz;
      df = a * cz;
    }
  }
};

struct Column {
  Factor fx;
  Factor fy;
  bool imaginary = false;
};

std::vector<Column> columns(SymmetryClass cls, double k, const WaveBasis& basis) {
  std::vector<Column> out;
  out.reserve(static_cast<size_t>(basis.size()));
  const bool ex = x_even(cls);
  const bool ey = y_even(cls);
  const int n = basis.plane_waves;
  for (int j = 0; j < n; ++j) {
    const double t = (j + 0.5) * 0.5 * std::numbers::pi / n;
    out.push_back({{k * std::cos(t), 0.0, ex}, {k * std::sin(t), 0.0, ey}, false});
  }
  const int m = basis.evanescent_angles;
  for (double alpha : basis.evanescent_alphas) {
    for (int j = 0; j < m; ++j) {
      const cplx th((j + 0.5) * 0.5 * std::numbers::pi / m, alpha);
      const cplx a = k * std::cos(th);
      const cplx b = k * std::sin(th);
      const double ux = std::abs(a.imag());
      const double uy = std::abs(b.imag());
      const double h =
          ux * basis.support_centre.x + uy * basis.support_centre.y + basis.support_radius * std::hypot(ux, uy);
      // Split the growth between the factors in proportion to their own extents.
      const double hx = ux * (basis.support_centre.x + basis.support_radius);
      const double hy = uy * (basis.support_centre.y + basis.support_radius);
      const double share = hx + hy > 0.0 ? hx / (hx + hy) : 0.5;
      const Factor fx{a, share * h, ex};
      const Factor fy{b, (1.0 - share) * h, ey};
      out.push_back({fx, fy, false});
      out.push_back({fx, fy, true});
    }
  }
  return out;
}

}  // namespace

BasisMatrices basis_matrices(SymmetryClass cls, double k, const WaveBasis& basis,
                             std::span<const quadrature::BoundaryNode> nodes, bool with_gradient) {
  const std::vector<Column> cols = columns(cls, k, basis);
  const auto m = static_cast<Eigen::Index>(nodes.size());
  const auto n = static_cast<Eigen::Index>(cols.size());
  BasisMatrices out;
  out.value.resize(m, n);
  if (with_gradient) {
    out.dx.resize(m, n);
    out.dy.resize(m, n);
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    const Column& c = cols[static_cast<size_t>(j)];
    for (Eigen::Index i = 0; i < m; ++i) {
      cplx vx;
      cplx dvx;
      cplx vy;
      cplx dvy;
      c.fx.eval(nodes[i].position.x, vx, dvx);
      c.fy.eval(nodes[i].position.y, vy, dvy);
      const cplx v = vx * vy;
      out.value(i, j) = c.imaginary ? v.imag() : v.real();
      if (with_gradient) {
        const cplx gx = dvx * vy;
        const cplx gy = vx * dvy;
        out.dx(i, j) = c.imaginary ? gx.imag() : gx.real();
        out.dy(i, j) = c.imaginary ? gy.imag() : gy.real();
      }
    }
  }
  return out;
}

Fields fields(const EigenState& s, std::span<const quadrature::BoundaryNode> nodes) {
  const BasisMatrices b = basis_matrices(s.cls, s.k, s.basis, nodes, true);
  return {b.value * s.coefficients, b.dx * s.coefficients, b.dy * s.coefficients};
}

void accumulate_values(const EigenState& s, std::span<const double> x, std::span<const double> y,
                       std::span<double> out) {
  const std::vector<Column> cols = columns(s.cls, s.k, s.basis);
  for (size_t p = 0; p < x.size(); ++p) {
    double acc = 0.0;
    for (size_t j = 0; j < cols.size(); ++j) {
      const Column& c = cols[j];
      const double coef = s.coefficients[static_cast<Eigen::Index>(j)];
      if (coef == 0.0) continue;
      if (c.fx.a.imag() == 0.0 && c.fy.a.imag() == 0.0) {
        const double ax = c.fx.a.real() * x[p];
        const double ay = c.fy.a.real() * y[p];
        acc += coef * (c.fx.even ? std::cos(ax) : std::sin(ax)) * (c.fy.even ? std::cos(ay) : std::sin(ay));
        continue;
      }
      cplx vx;
      cplx dvx;
      cplx vy;
      cplx dvy;
      c.fx.eval(x[p], vx, dvx);
      c.fy.eval(y[p], vy, dvy);
      const cplx v = vx * vy;
      acc += coef * (c.imaginary ? v.imag() : v.real());
    }
    out[p] = acc;
  }
}

double rellich_integral(const Fields& a, const Fields& b, std::span<const quadrature::BoundaryNode> nodes, double k) {
  double acc = 0.0;
  for (size_t i = 0; i < nodes.size(); ++i) {
    const auto& nd = nodes[i];
    const double rn = dot(nd.position, nd.normal);
    const double ra = nd.position.x * a.ux[i] + nd.position.y * a.uy[i];
    const double rb = nd.position.x * b.ux[i] + nd.position.y * b.uy[i];
    const double na = nd.normal.x * a.ux[i] + nd.normal.y * a.uy[i];
    const double nb = nd.normal.x * b.ux[i] + nd.normal.y * b.uy[i];
    const double grad = a.ux[i] * b.ux[i] + a.uy[i] * b.uy[i];
    acc += nd.weight * (ra * nb + rb * na - rn * grad + k * k * rn * a.u[i] * b.u[i]);
  }
  return acc / (2.0 * k * k);
}

double green_integral(const Fields& a, double ka, const Fields& b, double kb,
                      std::span<const quadrature::BoundaryNode> nodes, double* scale) {
  double acc = 0.0;
  double mag = 0.0;
  for (size_t i = 0; i < nodes.size(); ++i) {
    const auto& nd = nodes[i];
    const double na = nd.normal.x * a.ux[i] + nd.normal.y * a.uy[i];
    const double nb = nd.normal.x * b.ux[i] + nd.normal.y * b.uy[i];
    const double t1 = a.u[i] * nb;
    const double t2 = b.u[i] * na;
    acc += nd.weight * (t1 - t2);
    mag += nd.weight * (std::abs(t1) + std::abs(t2));
  }
  if (scale) *scale = mag;
  return acc / (ka * ka - kb * kb);
}

std::vector<quadrature::BoundaryNode> wall_nodes(const BilliardShape& shape, double k, double points_per_wavelength) {
  return quadrature::outer_wall_nodes(quadrature::QuarterIntersection(shape), k, points_per_wavelength);
}

}  // namespace qecho::billiard::detail
