#pragma once

// One-dimensional traps along the vertical axis: Fourier-grid eigensolver,
// split-step propagator and the H1/H2 pairs that feed the spectroscopy code.
// Units: hbar = 1, mass configurable (default 1).

#include <Eigen/Dense>
#include <complex>
#include <vector>

namespace qecho::trap1d {

using cvec = std::vector<std::complex<double>>;

// Periodic uniform grid: x_i = x_min + i h, h = (x_max - x_min) / n.
struct Grid1D {
  double x_min = -10.0;
  double x_max = 10.0;
  int n = 512;

  double h() const { return (x_max - x_min) / n; }
  double x(int i) const { return x_min + i * h(); }
  std::vector<double> points() const;
  void validate() const;
};

enum class Variant { Gaussian, Evanescent, Harmonic };

struct Trap1DModel {
  Variant variant = Variant::Gaussian;
  // Gaussian: V = -U exp(-2 x^2 / w^2). Evanescent: V = U exp(-kappa x).
  // Harmonic: V = m omega^2 (x - x0)^2 / 2.
  double U = 1.0;
  double w = 1.0;
  double kappa = 1.0;
  double omega = 1.0;
  double x0 = 0.0;
  double g = 0.0;
  double mass = 1.0;
  // H2 sees (1 + eta) times the optical part; gravity is common to both.
  double eta = 1e-3;

  void validate() const;
  double optical(double x) const;
  double gravity(double x) const { return mass * g * x; }
  double potential(double x, double optical_scale = 1.0) const { return optical_scale * optical(x) + gravity(x); }
  double potential_second_derivative(double x) const;
  std::vector<double> sample(const Grid1D& grid, double optical_scale = 1.0) const;
};

const char* to_string(Variant v);
Variant parse_variant(const std::string& name);

struct Spectrum1D {
  Grid1D grid;
  double mass = 1.0;
  std::vector<double> potential;
  std::vector<double> energies;
  // Columns are eigenfunctions with h * sum |psi|^2 = 1.
  Eigen::MatrixXd states;

  int size() const { return static_cast<int>(energies.size()); }
};

// Lowest n_states eigenpairs of p^2/2m + V on the grid. The kinetic operator is
// the exact discrete Fourier one, the same the split-step propagator uses.
Spectrum1D eigensolve(const std::vector<double>& potential, const Grid1D& grid, int n_states, double mass = 1.0);

// h * sum a_i b_i.
double inner(const Grid1D& grid, const Eigen::VectorXd& a, const Eigen::VectorXd& b);
std::complex<double> inner(const Grid1D& grid, const cvec& a, const cvec& b);

struct TrapPair {
  Spectrum1D h1;
  Spectrum1D h2;
  // overlap(m, n) = <psi2_m | psi1_n>.
  Eigen::MatrixXd overlap;
};

// Overlaps of two spectra on the same grid; eigenvector signs follow a fixed
// convention (first significant value positive) so the output is deterministic.
Eigen::MatrixXd overlap_matrix(const Spectrum1D& a, const Spectrum1D& b);
TrapPair make_pair(Spectrum1D h1, Spectrum1D h2);
// H2 may retain more states than H1 so that the overlap columns of the highest
// H1 states stay complete when eta deepens the trap.
TrapPair build_pair(const Trap1DModel& model, const Grid1D& grid, int n_states, int n_states_h2 = 0);

// Fourth-order split-step evolution exp(-i H t) psi built from Strang steps of
// size at most dt. Throws step-size if dt > 0.1 / e_max.
cvec propagate(const cvec& psi, const std::vector<double>& potential, const Grid1D& grid, double t, double dt,
               double e_max, double mass = 1.0);

cvec to_complex(const Eigen::VectorXd& v);

// Echo amplitude <e^{-iH2 t2} e^{-iH1 t1} psi | e^{-iH1 t2} e^{-iH2 t1} psi> by
// direct propagation of the two interferometer arms.
std::complex<double> simulate_echo(const Eigen::VectorXd& psi, const std::vector<double>& v1,
                                   const std::vector<double>& v2, const Grid1D& grid, double t1, double t2,
                                   double dt, double e_max, double mass = 1.0);

// 2 pi / sqrt(V''(x_min) / m) at the minimum of V1 (gravity included).
double oscillation_period(const Trap1DModel& model);
// Classical bounce period at the given energy, 2 int dx / v between turning points.
double bounce_period(const Trap1DModel& model, double energy);
double potential_minimum(const Trap1DModel& model);

// Physical Gaussian trap in scaled units: energies in hbar * omega with omega the
// small-oscillation frequency 2 sqrt(U/m) / w, lengths in sqrt(hbar / (m omega)).
struct PhysicalTrap {
  double depth_microkelvin = 30.0;
  double waist_micrometre = 50.0;
  double mass_amu = 84.911789738;
  double g = 9.80665;
};
Trap1DModel scaled_gaussian(const PhysicalTrap& trap, double eta);

}  // namespace qecho::trap1d
