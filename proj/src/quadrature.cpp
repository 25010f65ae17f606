#include "qecho/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

#include "qecho/error.hpp"

namespace qecho::quadrature {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kOrder = 16;

Rule1D compute_gauss_legendre(int n) {
  Rule1D rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0;
      double p1 = x;
      for (int j = 2; j <= n; ++j) {
        const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // Recompute derivative at the converged node.
    double p0 = 1.0;
    double p1 = x;
    for (int j = 2; j <= n; ++j) {
      const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
      p0 = p1;
      p1 = p2;
    }
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  return rule;
}

}  // namespace

const Rule1D& gauss_legendre(int n) {
  require(n >= 1, "Gauss-Legendre order must be positive");
  static std::mutex mu;
  static std::map<int, Rule1D> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, compute_gauss_legendre(n)).first;
  return it->second;
}

Rule1D composite_gauss(double a, double b, int panels, int order) {
  const Rule1D& ref = gauss_legendre(order);
  Rule1D out;
  out.nodes.reserve(static_cast<size_t>(panels) * order);
  out.weights.reserve(static_cast<size_t>(panels) * order);
  const double h = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    const double mid = a + (p + 0.5) * h;
    for (int i = 0; i < order; ++i) {
      out.nodes.push_back(mid + 0.5 * h * ref.nodes[i]);
      out.weights.push_back(0.5 * h * ref.weights[i]);
    }
  }
  return out;
}

QuarterIntersection::QuarterIntersection(const geometry::BilliardShape& a, const geometry::BilliardShape& b)
    : a_(a), b_(b) {
  std::vector<double> cuts = {0.0, 0.5 * kPi};
  for (double t : a.radial_breakpoints()) cuts.push_back(t);
  if (!(a == b)) {
    for (double t : b.radial_breakpoints()) cuts.push_back(t);
    // Angles where the two walls cross.
    const int scan = 2048;
    auto diff = [&](double phi) { return a.radial_extent(phi) - b.radial_extent(phi); };
    double prev_phi = 0.0;
    double prev = diff(prev_phi);
    for (int i = 1; i <= scan; ++i) {
      const double phi = 0.5 * kPi * i / scan;
      const double cur = diff(phi);
      if (prev * cur < 0.0 && std::abs(prev) > 1e-14 && std::abs(cur) > 1e-14) {
        double lo = prev_phi;
        double hi = phi;
        double flo = prev;
        for (int it = 0; it < 200 && hi - lo > 1e-16; ++it) {
          const double mid = 0.5 * (lo + hi);
          const double fm = diff(mid);
          if ((fm < 0.0) == (flo < 0.0)) {
            lo = mid;
            flo = fm;
          } else {
            hi = mid;
          }
        }
        cuts.push_back(0.5 * (lo + hi));
      }
      prev_phi = phi;
      prev = cur;
    }
  }
  std::sort(cuts.begin(), cuts.end());
  for (double c : cuts) {
    if (pieces_.empty() || c - pieces_.back() > 1e-13) pieces_.push_back(c);
  }
  if (pieces_.back() < 0.5 * kPi) pieces_.back() = 0.5 * kPi;
}

double QuarterIntersection::radius(double phi) const {
  return std::min(a_.radial_extent(phi), b_.radial_extent(phi));
}

double QuarterIntersection::radius_derivative(double phi) const {
  // Analytic derivative of whichever wall is active.
  const double ra = a_.radial_extent(phi);
  const double rb = b_.radial_extent(phi);
  const geometry::BilliardShape& s = ra <= rb ? a_ : b_;
  const double cp = std::cos(phi);
  const double sp = std::sin(phi);
  return std::visit(
      [&](const auto& p) -> double {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, geometry::Stadium>) {
          const double c = 0.5 * p.l;
          if (p.r * cp <= c * sp) return -p.r * cp / (sp * sp);
          const double root = std::sqrt(p.r * p.r - c * c * sp * sp);
          return -c * sp - c * c * sp * cp / root;
        } else if constexpr (std::is_same_v<T, geometry::Rectangle>) {
          const double ha = 0.5 * p.a;
          const double hb = 0.5 * p.b;
          if (hb * cp >= ha * sp) return ha * sp / (cp * cp);
          return -hb * cp / (sp * sp);
        } else {
          return 0.0;
        }
      },
      s.params());
}

double QuarterIntersection::max_radius() const {
  double m = 0.0;
  for (int i = 0; i <= 512; ++i) m = std::max(m, radius(0.5 * kPi * i / 512));
  return m;
}

std::vector<BoundaryNode> outer_wall_nodes(const QuarterIntersection& dom, double k, double points_per_wavelength) {
  require(k > 0.0 && points_per_wavelength > 0.0, "boundary rule needs positive k and density");
  std::vector<BoundaryNode> out;
  const auto& cuts = dom.pieces();
  for (size_t p = 0; p + 1 < cuts.size(); ++p) {
    const double a = cuts[p];
    const double b = cuts[p + 1];
    // Arc length estimate of this piece.
    double len = 0.0;
    const int probe = 64;
    for (int i = 0; i < probe; ++i) {
      const double phi = a + (i + 0.5) * (b - a) / probe;
      const double R = dom.radius(phi);
      const double dR = dom.radius_derivative(phi);
      len += std::hypot(R, dR) * (b - a) / probe;
    }
    const int panels =
        std::max(1, static_cast<int>(std::ceil(len * k / (2.0 * kPi) * points_per_wavelength / kOrder)));
    const Rule1D rule = composite_gauss(a, b, panels, kOrder);
    for (size_t i = 0; i < rule.nodes.size(); ++i) {
      const double phi = rule.nodes[i];
      const double cp = std::cos(phi);
      const double sp = std::sin(phi);
      const double R = dom.radius(phi);
      const double dR = dom.radius_derivative(phi);
      // Tangent for counter-clockwise traversal; outward normal is (t_y, -t_x).
      const double tx = dR * cp - R * sp;
      const double ty = dR * sp + R * cp;
      const double speed = std::hypot(tx, ty);
      out.push_back({{R * cp, R * sp}, {ty / speed, -tx / speed}, speed * rule.weights[i]});
    }
  }
  return out;
}

std::vector<AreaNode> area_nodes(const QuarterIntersection& dom, double k, double points_per_wavelength) {
  require(k > 0.0 && points_per_wavelength > 0.0, "area rule needs positive k and density");
  std::vector<AreaNode> out;
  const auto& cuts = dom.pieces();
  const double per_length = k / (2.0 * kPi) * points_per_wavelength / kOrder;
  for (size_t p = 0; p + 1 < cuts.size(); ++p) {
    const double a = cuts[p];
    const double b = cuts[p + 1];
    double rmax = 0.0;
    for (int i = 0; i <= 64; ++i) rmax = std::max(rmax, dom.radius(a + (b - a) * i / 64.0));
    const int ang_panels = std::max(1, static_cast<int>(std::ceil(rmax * (b - a) * per_length)));
    const Rule1D ang = composite_gauss(a, b, ang_panels, kOrder);
    for (size_t i = 0; i < ang.nodes.size(); ++i) {
      const double phi = ang.nodes[i];
      const double R = dom.radius(phi);
      const int rad_panels = std::max(1, static_cast<int>(std::ceil(R * per_length)));
      const Rule1D rad = composite_gauss(0.0, R, rad_panels, kOrder);
      const double cp = std::cos(phi);
      const double sp = std::sin(phi);
      for (size_t j = 0; j < rad.nodes.size(); ++j) {
        const double rho = rad.nodes[j];
        out.push_back({rho * cp, rho * sp, ang.weights[i] * rad.weights[j] * rho});
      }
    }
  }
  return out;
}

}  // namespace qecho::quadrature
