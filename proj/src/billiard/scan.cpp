#include <boost/math/tools/minima.hpp>
#include <cmath>
#include <cstdint>

#include "plane_waves.hpp"
#include "qecho/error.hpp"
#include "qecho/format.hpp"
#include "qecho/parallel.hpp"

namespace qecho::billiard {

double boundary_singular_value(const BilliardShape& shape, SymmetryClass cls, double k, const ScanConfig& cfg) {
  require(k > 0.0, "wavenumber must be positive");
  const WaveBasis basis = make_basis(shape, k, cfg.basis_factor, cfg.evanescent_fraction, cfg.evanescent_alphas);
  const int n = basis.size();
  const auto wall = detail::wall_nodes(shape, k, cfg.boundary_points_per_wavelength);
  const auto area = quadrature::area_nodes(quadrature::QuarterIntersection(shape), k, cfg.interior_points_per_wavelength);
  std::vector<quadrature::BoundaryNode> inner;
  inner.reserve(area.size());
  for (const auto& a : area) inner.push_back({{a.x, a.y}, {0.0, 0.0}, a.weight});

  const auto mb = static_cast<Eigen::Index>(wall.size());
  const auto mi = static_cast<Eigen::Index>(inner.size());
  Eigen::MatrixXd a(mb + mi, n);
  a.topRows(mb) = detail::basis_matrices(cls, k, basis, wall, false).value;
  a.bottomRows(mi) = detail::basis_matrices(cls, k, basis, inner, false).value;
  for (Eigen::Index i = 0; i < mb; ++i) a.row(i) *= std::sqrt(wall[static_cast<size_t>(i)].weight);
  for (Eigen::Index i = 0; i < mi; ++i) a.row(mb + i) *= std::sqrt(inner[static_cast<size_t>(i)].weight);

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  qr.setThreshold(1e-13);
  const Eigen::Index r = qr.rank();
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(a.rows(), r);
  Eigen::BDCSVD<Eigen::MatrixXd> svd(q.topRows(mb));
  return svd.singularValues().minCoeff();
}

double refine_singular_minimum(const BilliardShape& shape, SymmetryClass cls, double lo, double hi,
                               const ScanConfig& cfg) {
  require(lo < hi, "bracket must be ordered");
  std::uintmax_t iters = 200;
  const auto res = boost::math::tools::brent_find_minima(
      [&](double k) { return boundary_singular_value(shape, cls, k, cfg); }, lo, hi, 40, iters);
  if (!(res.second < cfg.threshold) || res.first <= lo || res.first >= hi) {
    fail(ErrorKind::NoMinimum, "no singular-value minimum below " + format_sig(cfg.threshold, 3) + " in [" +
                                   format_sig(lo, 12) + ", " + format_sig(hi, 12) + "]");
  }
  return res.first;
}

std::vector<double> boundary_svd_scan(const BilliardShape& shape, SymmetryClass cls, double k_lo, double k_hi,
                                      const ScanConfig& cfg) {
  require(k_lo > 0.0 && k_hi > k_lo, "scan window must be positive and ordered");
  require(cfg.step > 0.0, "scan step must be positive");
  const int n = static_cast<int>(std::ceil((k_hi - k_lo) / cfg.step));
  std::vector<double> ks(static_cast<size_t>(n) + 1);
  std::vector<double> sv(ks.size());
  for (size_t i = 0; i < ks.size(); ++i) ks[i] = k_lo + (k_hi - k_lo) * static_cast<double>(i) / n;
  parallel_for(ks.size(), [&](size_t i) { sv[i] = boundary_singular_value(shape, cls, ks[i], cfg); });

  std::vector<size_t> minima;
  for (size_t i = 1; i + 1 < ks.size(); ++i) {
    if (sv[i] < sv[i - 1] && sv[i] <= sv[i + 1]) minima.push_back(i);
  }
  std::vector<double> found(minima.size());
  std::vector<char> ok(minima.size(), 0);
  parallel_for(minima.size(), [&](size_t j) {
    const size_t i = minima[j];
    try {
      found[j] = refine_singular_minimum(shape, cls, ks[i - 1], ks[i + 1], cfg);
      ok[j] = 1;
    } catch (const Error&) {
      ok[j] = 0;
    }
  });
  std::vector<double> out;
  for (size_t j = 0; j < found.size(); ++j) {
    if (ok[j]) out.push_back(found[j]);
  }
  return out;
}

}  // namespace qecho::billiard
