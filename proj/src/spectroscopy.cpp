#include "qecho/spectroscopy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "qecho/error.hpp"
#include "qecho/parallel.hpp"

namespace qecho::spectroscopy {

void SpectralPair::validate() const {
  require(!e1.empty() && !e2.empty(), "spectral pair: empty spectrum");
  require(overlap.rows() == size2() && overlap.cols() == size1(), "spectral pair: overlap shape mismatch");
  if (!partner.empty()) {
    require(static_cast<int>(partner.size()) == size1(), "spectral pair: partner list size mismatch");
    for (int p : partner) require(p >= 0 && p < size2(), "spectral pair: partner index out of range");
  }
}

double column_deficiency(const SpectralPair& pair, int n) { return 1.0 - pair.overlap.col(n).squaredNorm(); }

void check_initial_state(const SpectralPair& pair, int n) {
  require(n >= 0 && n < pair.size1(), "initial state index out of range");
  const double d = column_deficiency(pair, n);
  if (d > pair.truncation_tolerance) {
    fail(ErrorKind::Truncation, "state " + std::to_string(n) + " has overlap column deficiency " + std::to_string(d));
  }
}

cplx ramsey_amplitude(const SpectralPair& pair, int n, double delta_mw, double tau) {
  check_initial_state(pair, n);
  const double e1 = pair.e1[static_cast<size_t>(n)];
  cplx acc = 0.0;
  for (int m = 0; m < pair.size2(); ++m) {
    const double o = pair.overlap(m, n);
    acc += o * o * std::polar(1.0, -(pair.e2[static_cast<size_t>(m)] - e1 - delta_mw) * tau);
  }
  return acc;
}

double ramsey_p2(const SpectralPair& pair, int n, double delta_mw, double tau) {
  return std::clamp(0.5 * (1.0 + ramsey_amplitude(pair, n, delta_mw, tau).real()), 0.0, 1.0);
}

double ramsey_contrast(const SpectralPair& pair, int n, double tau) {
  return std::abs(ramsey_amplitude(pair, n, 0.0, tau));
}

Detuning generalized_detuning(const SpectralPair& pair, int n, double delta_mw, double tau) {
  const int p = pair.partner_of(n);
  const double anchor = pair.e2[static_cast<size_t>(p)] - pair.e1[static_cast<size_t>(n)] - delta_mw;
  if (tau == 0.0) return {anchor, false};
  const cplx z = ramsey_amplitude(pair, n, delta_mw, tau);
  const double raw = -std::arg(z) / tau;
  // Branches are spaced by 2 pi / tau; take the one nearest the diagonal term.
  const double period = 2.0 * std::numbers::pi / std::abs(tau);
  const double value = raw + period * std::round((anchor - raw) / period);
  return {value, std::abs(z) < 0.1};
}

std::vector<cplx> echo_amplitudes(const SpectralPair& pair, const std::vector<int>& states, double tau1,
                                  double tau2) {
  pair.validate();
  for (int n : states) check_initial_state(pair, n);
  const Eigen::Index m2 = pair.size2();
  const Eigen::Index m1 = pair.size1();
  const auto k = static_cast<Eigen::Index>(states.size());
  const Eigen::MatrixXd& o = pair.overlap;

  Eigen::MatrixXcd b(m2, k);
  for (Eigen::Index c = 0; c < k; ++c) {
    const int n = states[static_cast<size_t>(c)];
    for (Eigen::Index m = 0; m < m2; ++m) b(m, c) = o(m, n) * std::polar(1.0, -pair.e2[static_cast<size_t>(m)] * tau1);
  }
  Eigen::MatrixXcd c1 = o.transpose().cast<cplx>() * b;
  for (Eigen::Index j = 0; j < m1; ++j) c1.row(j) *= std::polar(1.0, -pair.e1[static_cast<size_t>(j)] * tau2);
  Eigen::MatrixXcd d = o.cast<cplx>() * c1;
  for (Eigen::Index l = 0; l < m2; ++l) d.row(l) *= std::polar(1.0, pair.e2[static_cast<size_t>(l)] * tau2);

  std::vector<cplx> out(static_cast<size_t>(k));
  for (Eigen::Index c = 0; c < k; ++c) {
    const int n = states[static_cast<size_t>(c)];
    cplx acc = 0.0;
    for (Eigen::Index l = 0; l < m2; ++l) acc += o(l, n) * d(l, c);
    out[static_cast<size_t>(c)] = std::polar(1.0, pair.e1[static_cast<size_t>(n)] * tau1) * acc;
  }
  return out;
}

cplx echo_amplitude(const SpectralPair& pair, int n, double tau1, double tau2) {
  return echo_amplitudes(pair, {n}, tau1, tau2).front();
}

double echo_p2(const SpectralPair& pair, int n, double tau) {
  return std::clamp(0.5 * (1.0 - echo_amplitude(pair, n, tau).real()), 0.0, 1.0);
}

double echo_p2(const SpectralPair& pair, int n, double tau1, double tau2, double delta_mw) {
  const cplx a = echo_amplitude(pair, n, tau1, tau2) * std::polar(1.0, delta_mw * (tau2 - tau1));
  return std::clamp(0.5 * (1.0 - a.real()), 0.0, 1.0);
}

namespace {

std::vector<double> boltzmann(const std::vector<double>& energies, double temperature) {
  require(!energies.empty(), "thermal weights: empty spectrum");
  require(temperature > 0.0, "thermal weights: temperature must be positive");
  const double e0 = *std::min_element(energies.begin(), energies.end());
  std::vector<double> b(energies.size());
  for (size_t i = 0; i < energies.size(); ++i) b[i] = std::exp(-(energies[i] - e0) / temperature);
  return b;
}

ThermalWeights normalize(const std::vector<double>& b, int count, double temperature) {
  double total = 0.0;
  for (double x : b) total += x;
  ThermalWeights out;
  out.temperature = temperature;
  double kept = 0.0;
  for (int i = 0; i < count; ++i) kept += b[static_cast<size_t>(i)];
  out.weights.resize(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) out.weights[static_cast<size_t>(i)] = b[static_cast<size_t>(i)] / kept;
  out.coverage = kept / total;
  if (b.back() / total > 1e-4) {
    out.warning = "highest supplied state still carries " + std::to_string(b.back() / total) + " of the weight";
  } else if (out.coverage < 0.99) {
    out.warning = "retained states cover only " + std::to_string(out.coverage) + " of the weight";
  }
  return out;
}

}  // namespace

ThermalWeights thermal_weights(const std::vector<double>& energies, double temperature, double coverage) {
  require(coverage > 0.0 && coverage <= 1.0, "thermal weights: coverage must lie in (0, 1]");
  const std::vector<double> b = boltzmann(energies, temperature);
  double total = 0.0;
  for (double x : b) total += x;
  double acc = 0.0;
  int count = 0;
  while (count < static_cast<int>(b.size()) && acc < coverage * total) acc += b[static_cast<size_t>(count++)];
  return normalize(b, count, temperature);
}

ThermalWeights thermal_weights_fixed(const std::vector<double>& energies, double temperature, int count) {
  require(count >= 1 && count <= static_cast<int>(energies.size()), "thermal weights: count out of range");
  return normalize(boltzmann(energies, temperature), count, temperature);
}

std::vector<double> thermal_average(const std::vector<std::vector<double>>& signals, const ThermalWeights& weights) {
  require(signals.size() == weights.weights.size(), "thermal average: one signal per weight required");
  require(!signals.empty(), "thermal average: no signals");
  std::vector<double> out(signals.front().size(), 0.0);
  for (size_t n = 0; n < signals.size(); ++n) {
    require(signals[n].size() == out.size(), "thermal average: signals differ in length");
    for (size_t t = 0; t < out.size(); ++t) out[t] += weights.weights[n] * signals[n][t];
  }
  return out;
}

double long_time_echo(const SpectralPair& pair, const ThermalWeights& weights) {
  pair.validate();
  require(weights.size() <= pair.size1(), "long-time echo: more weights than states");
  double acc = 0.0;
  for (int n = 0; n < weights.size(); ++n) {
    const double o = pair.overlap(pair.partner_of(n), n);
    acc += weights.weights[static_cast<size_t>(n)] * o * o * o * o;
  }
  return 0.5 * (1.0 - acc);
}

std::vector<double> ensemble_echo(const SpectralPair& pair, const ThermalWeights& weights,
                                  const std::vector<double>& taus) {
  std::vector<int> states(static_cast<size_t>(weights.size()));
  for (int i = 0; i < weights.size(); ++i) states[static_cast<size_t>(i)] = i;
  std::vector<double> out(taus.size());
  parallel_for(taus.size(), [&](size_t t) {
    const std::vector<cplx> a = echo_amplitudes(pair, states, taus[t], taus[t]);
    double acc = 0.0;
    for (size_t n = 0; n < a.size(); ++n) acc += weights.weights[n] * std::clamp(0.5 * (1.0 - a[n].real()), 0.0, 1.0);
    out[t] = acc;
  });
  return out;
}

std::vector<double> ensemble_ramsey_contrast(const SpectralPair& pair, const ThermalWeights& weights,
                                             const std::vector<double>& taus) {
  std::vector<double> out(taus.size());
  parallel_for(taus.size(), [&](size_t t) {
    cplx acc = 0.0;
    for (int n = 0; n < weights.size(); ++n) {
      acc += weights.weights[static_cast<size_t>(n)] * ramsey_amplitude(pair, n, 0.0, taus[t]);
    }
    out[t] = std::abs(acc);
  });
  return out;
}

}  // namespace qecho::spectroscopy
