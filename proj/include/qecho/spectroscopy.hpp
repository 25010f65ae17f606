#pragma once

// Ramsey and echo pulse-sequence observables for a pair of Hamiltonians given by
// their spectra and the overlap matrix between the two eigenbases. Pulses are
// ideal and instantaneous; hbar = 1, so energies double as angular frequencies.

#include <Eigen/Dense>
#include <complex>
#include <string>
#include <vector>

namespace qecho::spectroscopy {

using cplx = std::complex<double>;

struct SpectralPair {
  std::vector<double> e1;
  std::vector<double> e2;
  // overlap(m, n) = <m' | n>, m over the H2 basis, n over the H1 basis.
  Eigen::MatrixXd overlap;
  // Hyperfine splitting; cancels in the echo and enters Ramsey signals only
  // through the microwave detuning, so it is never added to e2.
  double hf_offset = 0.0;
  // Index in the H2 basis of the continuation of each H1 state (n' = n);
  // identity when empty.
  std::vector<int> partner;
  // Initial states whose column deficiency exceeds this raise a truncation error.
  double truncation_tolerance = 0.01;

  int size1() const { return static_cast<int>(e1.size()); }
  int size2() const { return static_cast<int>(e2.size()); }
  int partner_of(int n) const { return partner.empty() ? n : partner[static_cast<size_t>(n)]; }
  void validate() const;
};

double column_deficiency(const SpectralPair& pair, int n);
// Truncation error when column n cannot serve as an initial state.
void check_initial_state(const SpectralPair& pair, int n);

// e^{i E1_n tau} sum_m |O_mn|^2 e^{-i (E2_m - delta_mw) tau}, with delta_mw the
// microwave detuning from the hyperfine line.
cplx ramsey_amplitude(const SpectralPair& pair, int n, double delta_mw, double tau);
double ramsey_p2(const SpectralPair& pair, int n, double delta_mw, double tau);
// |<n(0)|n(tau)>|, independent of the detuning.
double ramsey_contrast(const SpectralPair& pair, int n, double tau);

struct Detuning {
  double value = 0.0;
  // The amplitude is below 0.1 and its phase is not meaningful.
  bool ambiguous = false;
};
Detuning generalized_detuning(const SpectralPair& pair, int n, double delta_mw, double tau);

// <e^{-iH2 t2} e^{-iH1 t1} n | e^{-iH1 t2} e^{-iH2 t1} n>. At t1 = t2 the
// detuning and the hyperfine offset drop out.
cplx echo_amplitude(const SpectralPair& pair, int n, double tau1, double tau2);
inline cplx echo_amplitude(const SpectralPair& pair, int n, double tau) { return echo_amplitude(pair, n, tau, tau); }
// The same for a list of initial states at once.
std::vector<cplx> echo_amplitudes(const SpectralPair& pair, const std::vector<int>& states, double tau1, double tau2);

// (1 - Re A) / 2 at t1 = t2 = tau.
double echo_p2(const SpectralPair& pair, int n, double tau);
// Two-time variant; the detuning phase e^{i delta_mw (t2 - t1)} multiplies A.
double echo_p2(const SpectralPair& pair, int n, double tau1, double tau2, double delta_mw);

struct ThermalWeights {
  double temperature = 0.0;
  std::vector<double> weights;
  // Boltzmann mass of the retained states relative to the full supplied spectrum.
  double coverage = 1.0;
  // Set when the supplied spectrum itself looks too short for the temperature.
  std::string warning;

  int size() const { return static_cast<int>(weights.size()); }
};

// Lowest states holding at least `coverage` of the Boltzmann weight of `energies`.
ThermalWeights thermal_weights(const std::vector<double>& energies, double temperature, double coverage = 0.99);
// Exactly the first `count` states.
ThermalWeights thermal_weights_fixed(const std::vector<double>& energies, double temperature, int count);

// signals[n][t] weighted by weights[n].
std::vector<double> thermal_average(const std::vector<std::vector<double>>& signals, const ThermalWeights& weights);

// (1 - sum_n w_n |O_{n'n}|^4) / 2.
double long_time_echo(const SpectralPair& pair, const ThermalWeights& weights);

// Ensemble signals on a tau grid for the weighted initial states.
std::vector<double> ensemble_echo(const SpectralPair& pair, const ThermalWeights& weights,
                                  const std::vector<double>& taus);
// |sum_n w_n z_n(tau)|, the fringe contrast of the ensemble Ramsey signal.
std::vector<double> ensemble_ramsey_contrast(const SpectralPair& pair, const ThermalWeights& weights,
                                             const std::vector<double>& taus);

}  // namespace qecho::spectroscopy
