#pragma once

// Parity-adapted waves phi_j(r) = f_x(k cos(t_j) x) f_y(k sin(t_j) y) with
// f = cos for an even and sin for an odd factor. Real plane waves use
// t_j = (j + 1/2) (pi/2) / N; evanescent waves use t_j + i alpha and contribute
// their real and imaginary parts, scaled to O(1) on the quarter bounding box.

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "qecho/billiard.hpp"
#include "qecho/quadrature.hpp"

namespace qecho::billiard::detail {

struct BasisMatrices {
  Eigen::MatrixXd value;
  Eigen::MatrixXd dx;
  Eigen::MatrixXd dy;
};

// Rows are points, columns are the trial functions at wavenumber k.
BasisMatrices basis_matrices(SymmetryClass cls, double k, const WaveBasis& basis,
                             std::span<const quadrature::BoundaryNode> nodes, bool with_gradient);

struct Fields {
  Eigen::VectorXd u;
  Eigen::VectorXd ux;
  Eigen::VectorXd uy;
};

Fields fields(const EigenState& s, std::span<const quadrature::BoundaryNode> nodes);

// Values only, at arbitrary points (no domain check).
void accumulate_values(const EigenState& s, std::span<const double> x, std::span<const double> y,
                       std::span<double> out);

// Quarter-domain integral of u v for equal wavenumbers k from boundary data.
double rellich_integral(const Fields& a, const Fields& b, std::span<const quadrature::BoundaryNode> nodes, double k);

// Quarter-domain integral of u v for k_a != k_b; `scale` receives the summed
// magnitude of the boundary terms.
double green_integral(const Fields& a, double ka, const Fields& b, double kb,
                      std::span<const quadrature::BoundaryNode> nodes, double* scale);

// entries(m, n) = <b_m | a_n>, without any alignment of degenerate subspaces.
Eigen::MatrixXd overlap_entries(const std::vector<EigenState>& a, const std::vector<EigenState>& b,
                                const OverlapConfig& config);

// Boundary rule on the outer wall of a single shape's quarter.
std::vector<quadrature::BoundaryNode> wall_nodes(const BilliardShape& shape, double k, double points_per_wavelength);

}  // namespace qecho::billiard::detail
