#pragma once

// High-lying Dirichlet eigenstates of desymmetrized billiards, overlaps between
// eigenbases of deformed shapes, and level tracking along a deformation path.
// Units: hbar = 2m = 1, so E = k^2.

#include <Eigen/Dense>
#include <span>
#include <utility>
#include <vector>

#include "qecho/geometry.hpp"

namespace qecho::billiard {

using geometry::BilliardShape;
using geometry::SymmetryClass;
using geometry::Vec2;

// Trial functions: real plane waves on a quarter fan of directions, plus
// evanescent waves at complex angles t + i*alpha for each listed alpha.
struct WaveBasis {
  int plane_waves = 0;
  int evanescent_angles = 0;
  std::vector<double> evanescent_alphas;
  // Support function h(u) = u . support_centre + support_radius |u| of the quarter
  // domain (u in the first quadrant); each evanescent wave is divided by its
  // maximum growth exp(k h) so that it peaks at O(1) on the wall.
  Vec2 support_centre;
  double support_radius = 0.0;

  int size() const;
};

struct SolverConfig {
  // Plane waves per quarter-boundary wavelength.
  double basis_factor = 3.0;
  // Evanescent angles per alpha, relative to the plane-wave count. They carry
  // the fine structure near points where the wall curvature jumps, so only
  // stadium shapes get them.
  double evanescent_fraction = 0.17;
  std::vector<double> evanescent_alphas = {0.4, 0.7, 1.0};
  // Boundary quadrature density, in points per wavelength.
  double boundary_points_per_wavelength = 10.0;
  // Each generalized eigenproblem is trusted for |k - k0| * sqrt(A) below this,
  // with A the fundamental-domain area.
  double subwindow_half_width = 0.13;
  // Offset, in the same units, of the solve that refines each level.
  double refine_offset = 0.013;
  double rank_cutoff = 1e-14;
  // States whose boundary tension exceeds quality_factor * k^2 are rejected.
  double quality_factor = 1e-8;
  double completeness_tolerance = 2.0;
  // Integrable shapes get sqrt(expected) extra slack in the Weyl audit.
  bool integrable_allowance = true;
  bool require_complete = true;
};

struct EigenState {
  double k = 0.0;
  SymmetryClass cls;
  // Amplitudes of the trial functions of `basis` at wavenumber k.
  WaveBasis basis;
  Eigen::VectorXd coefficients;
  BilliardShape shape = BilliardShape::circle(1.0);
  // Mean squared boundary value of the normalized state.
  double quality = 0.0;
};

struct EigenBasis {
  BilliardShape shape = BilliardShape::circle(1.0);
  SymmetryClass cls;
  double k_lo = 0.0;
  double k_hi = 0.0;
  std::vector<EigenState> states;
  double weyl_expected = 0.0;
  int weyl_found = 0;
  double weyl_tolerance = 0.0;
  bool complete = true;
  int rejected = 0;
  // Largest gaps between found levels, reported when the audit fails.
  std::vector<std::pair<double, double>> suspect_intervals;

  std::vector<double> wavenumbers() const;
};

int basis_size(const BilliardShape& shape, double k, double basis_factor);
WaveBasis make_basis(const BilliardShape& shape, double k, double basis_factor, double evanescent_fraction,
                     const std::vector<double>& evanescent_alphas);

EigenBasis solve_window(const BilliardShape& shape, SymmetryClass cls, double k_center, double half_width,
                        const SolverConfig& config = {});

// The same state on apply_perturbation(shape, Dilation{s}): psi(x / s) / s.
EigenState dilated(const EigenState& state, double s);

// psi at each point of the full plane; zero outside the state's domain.
std::vector<double> eval_wavefunction(const EigenState& state, std::span<const Vec2> points);

struct OverlapConfig {
  double boundary_points_per_wavelength = 16.0;
  double area_points_per_wavelength = 16.0;
  // Refined rule density relative to the base rule.
  double refinement_factor = 1.5;
  double tolerance = 1e-7;
};

// <B|A> over the intersection of the two domains.
double overlap(const EigenState& a, const EigenState& b, const OverlapConfig& config = {});

// The same integral by interior quadrature only; independent of the boundary
// identities used by overlap().
double overlap_interior(const EigenState& a, const EigenState& b, const OverlapConfig& config = {});

struct OverlapMatrix {
  // entries(m, n) = <m' in B | n in A>.
  Eigen::MatrixXd entries;
  std::vector<double> k_a;
  std::vector<double> k_b;
  std::vector<double> row_sumsq;
  std::vector<double> col_sumsq;
};

OverlapMatrix overlap_matrix(const EigenBasis& a, const EigenBasis& b, const OverlapConfig& config = {});

struct ScanConfig {
  double basis_factor = 2.0;
  double evanescent_fraction = 0.17;
  std::vector<double> evanescent_alphas = {0.4, 0.7, 1.0};
  double boundary_points_per_wavelength = 10.0;
  double interior_points_per_wavelength = 1.5;
  double step = 0.005;
  // Minima above this are not reported as eigenvalues.
  double threshold = 1e-3;
};

// Smallest generalized singular value of the boundary trace relative to the interior.
double boundary_singular_value(const BilliardShape& shape, SymmetryClass cls, double k, const ScanConfig& config = {});
// Local minima of boundary_singular_value over [k_lo, k_hi], refined.
std::vector<double> boundary_svd_scan(const BilliardShape& shape, SymmetryClass cls, double k_lo, double k_hi,
                                      const ScanConfig& config = {});
// Refines a single minimum inside [lo, hi]; throws no-minimum if the bracket has none below threshold.
double refine_singular_minimum(const BilliardShape& shape, SymmetryClass cls, double lo, double hi,
                               const ScanConfig& config = {});

// Assignment maximizing the summed score; score is rows x cols with rows <= cols.
// Returns the column chosen for each row.
std::vector<int> max_weight_assignment(const Eigen::MatrixXd& score);

struct TrackConfig {
  SolverConfig solver;
  OverlapConfig overlap;
  double min_overlap = 0.5;
  int max_bisection_depth = 6;
  // Extra k range solved on each side of the tracked levels.
  double margin = 0.25;
  double crossing_gap_fraction = 0.2;
  // Throw instead of flagging when bisection runs out.
  bool strict = true;
};

struct AvoidedCrossing {
  int lower = 0;
  int upper = 0;
  size_t step = 0;
  double strength = 0.0;
  double gap = 0.0;
};

struct LevelTrack {
  BilliardShape shape = BilliardShape::circle(1.0);
  SymmetryClass cls;
  geometry::PerturbationFamily family = geometry::PerturbationFamily::Dilation;
  // Requested grid plus any points inserted by bisection, ascending in |path|.
  std::vector<double> strengths;
  std::vector<bool> inserted;
  std::vector<EigenBasis> bases;
  // assignment[i][t]: index into bases[i].states followed by track t.
  std::vector<std::vector<int>> assignment;
  std::vector<std::vector<double>> step_overlap;
  std::vector<std::vector<bool>> ambiguous;
  std::vector<AvoidedCrossing> crossings;
  double mean_spacing = 0.0;

  size_t tracks() const { return assignment.empty() ? 0 : assignment.front().size(); }
  std::vector<double> k_curve(size_t track) const;
  const EigenState& state(size_t step, size_t track) const;
};

// Tracks every state of the unperturbed basis with k in [k_lo, k_hi] along the
// strength grid (first entry is usually 0 / 1 for dilation).
LevelTrack track_levels(const BilliardShape& shape, SymmetryClass cls, geometry::PerturbationFamily family,
                        const std::vector<double>& strengths, double k_lo, double k_hi,
                        const TrackConfig& config = {});

}  // namespace qecho::billiard
