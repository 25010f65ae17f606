#include "qecho/trap1d.hpp"

#include <fftw3.h>

#include <algorithm>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <mutex>
#include <numbers>

#include "qecho/error.hpp"

namespace qecho::trap1d {

using cplx = std::complex<double>;

std::vector<double> Grid1D::points() const {
  std::vector<double> out(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) out[static_cast<size_t>(i)] = x(i);
  return out;
}

void Grid1D::validate() const {
  require(std::isfinite(x_min) && std::isfinite(x_max) && x_max > x_min, "grid: x_max must exceed x_min");
  require(n >= 256, "grid: at least 256 points required");
  require(n % 2 == 0, "grid: point count must be even");
}

const char* to_string(Variant v) {
  switch (v) {
    case Variant::Gaussian:
      return "gaussian";
    case Variant::Evanescent:
      return "evanescent";
    case Variant::Harmonic:
      return "harmonic";
  }
  return "?";
}

Variant parse_variant(const std::string& name) {
  if (name == "gaussian") return Variant::Gaussian;
  if (name == "evanescent") return Variant::Evanescent;
  if (name == "harmonic") return Variant::Harmonic;
  fail(ErrorKind::InvalidParameter, "unknown trap model '" + name + "'");
}

void Trap1DModel::validate() const {
  require(mass > 0.0, "trap: mass must be positive");
  require(std::isfinite(eta) && eta > -1.0, "trap: eta must exceed -1");
  switch (variant) {
    case Variant::Gaussian:
      require(U > 0.0 && w > 0.0, "gaussian trap: U and w must be positive");
      // Without a local minimum there is nothing to hold atoms against gravity.
      require(mass * std::abs(g) * w < U * 2.0 * std::exp(-0.5), "gaussian trap: gravity exceeds the trap force");
      break;
    case Variant::Evanescent:
      require(U > 0.0 && kappa > 0.0 && g > 0.0, "evanescent trap: U, kappa and g must be positive");
      break;
    case Variant::Harmonic:
      require(omega > 0.0, "harmonic trap: omega must be positive");
      break;
  }
}

double Trap1DModel::optical(double x) const {
  switch (variant) {
    case Variant::Gaussian:
      return -U * std::exp(-2.0 * x * x / (w * w));
    case Variant::Evanescent:
      return U * std::exp(-kappa * x);
    case Variant::Harmonic:
      return 0.5 * mass * omega * omega * (x - x0) * (x - x0);
  }
  return 0.0;
}

double Trap1DModel::potential_second_derivative(double x) const {
  switch (variant) {
    case Variant::Gaussian: {
      const double w2 = w * w;
      return U * std::exp(-2.0 * x * x / w2) * (4.0 / w2 - 16.0 * x * x / (w2 * w2));
    }
    case Variant::Evanescent:
      return U * kappa * kappa * std::exp(-kappa * x);
    case Variant::Harmonic:
      return mass * omega * omega;
  }
  return 0.0;
}

std::vector<double> Trap1DModel::sample(const Grid1D& grid, double optical_scale) const {
  std::vector<double> v(static_cast<size_t>(grid.n));
  for (int i = 0; i < grid.n; ++i) v[static_cast<size_t>(i)] = potential(grid.x(i), optical_scale);
  return v;
}

namespace {

double wavenumber(int j, const Grid1D& grid) {
  const int n = grid.n;
  const int jj = j <= n / 2 ? j : j - n;
  return 2.0 * std::numbers::pi * jj / (n * grid.h());
}

// First row of the circulant kinetic matrix, (1/N) sum_j k_j^2/2m cos(k_j d h).
std::vector<double> kinetic_row(const Grid1D& grid, double mass) {
  const int n = grid.n;
  std::vector<double> row(static_cast<size_t>(n), 0.0);
  for (int d = 0; d < n; ++d) {
    double acc = 0.0;
    for (int j = 0; j < n; ++j) {
      const double k = wavenumber(j, grid);
      acc += k * k * std::cos(2.0 * std::numbers::pi * static_cast<double>((static_cast<long long>(j) * d) % n) / n);
    }
    row[static_cast<size_t>(d)] = acc / (2.0 * mass * n);
  }
  return row;
}

void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
  const double cut = 1e-4 * v.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v[i]) > cut) {
      if (v[i] < 0.0) v = -v;
      return;
    }
  }
}

std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}

// In-place forward/backward transforms on one buffer. FFTW_ESTIMATE keeps the
// plan, and so the floating-point result, independent of timing.
class Fft {
 public:
  explicit Fft(int n) : n_(n), buf_(static_cast<size_t>(n)) {
    std::lock_guard lock(plan_mutex());
    auto* p = reinterpret_cast<fftw_complex*>(buf_.data());
    fwd_ = fftw_plan_dft_1d(n, p, p, FFTW_FORWARD, FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft_1d(n, p, p, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  ~Fft() {
    std::lock_guard lock(plan_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
  }
  Fft(const Fft&) = delete;
  Fft& operator=(const Fft&) = delete;

  cvec& data() { return buf_; }
  void forward() { fftw_execute(fwd_); }
  void backward() {
    fftw_execute(bwd_);
    const double s = 1.0 / n_;
    for (auto& z : buf_) z *= s;
  }

 private:
  int n_;
  cvec buf_;
  fftw_plan fwd_;
  fftw_plan bwd_;
};

}  // namespace

Spectrum1D eigensolve(const std::vector<double>& potential, const Grid1D& grid, int n_states, double mass) {
  grid.validate();
  require(static_cast<int>(potential.size()) == grid.n, "eigensolve: potential size differs from grid");
  require(n_states >= 1 && n_states < grid.n / 2, "eigensolve: state count out of range");
  require(mass > 0.0, "eigensolve: mass must be positive");

  const int n = grid.n;
  const std::vector<double> row = kinetic_row(grid, mass);
  Eigen::MatrixXd h(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) h(i, j) = row[static_cast<size_t>(std::abs(i - j))];
    h(i, i) += potential[static_cast<size_t>(i)];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
  if (es.info() != Eigen::Success) fail(ErrorKind::Convergence, "eigensolve: dense eigensolver failed");

  Spectrum1D out;
  out.grid = grid;
  out.mass = mass;
  out.potential = potential;
  out.energies.assign(es.eigenvalues().data(), es.eigenvalues().data() + n_states);
  out.states = es.eigenvectors().leftCols(n_states) / std::sqrt(grid.h());

  const double rim = std::min(potential.front(), potential.back());
  const double spread = out.energies.back() - out.energies.front();
  for (int s = 0; s < n_states; ++s) {
    const double e = out.energies[static_cast<size_t>(s)];
    if (e >= rim) {
      fail(ErrorKind::InsufficientBoundStates, "eigensolve: state " + std::to_string(s) + " lies above the grid rim");
    }
    auto v = out.states.col(s);
    fix_sign(v);
    const double edge = std::max(std::abs(v[0]), std::abs(v[n - 1]));
    if (edge > 1e-8) {
      fail(ErrorKind::GridLeakage, "eigensolve: state " + std::to_string(s) + " reaches the grid edge (amplitude " +
                                       std::to_string(edge) + ")");
    }
    // Residual relative to |E|, floored by the retained spread for states near E = 0.
    const double res = (h * v - e * v).norm() / v.norm();
    if (res > 1e-8 * std::max(std::abs(e), 1e-3 * spread)) {
      fail(ErrorKind::Convergence, "eigensolve: residual too large for state " + std::to_string(s));
    }
  }
  return out;
}

double inner(const Grid1D& grid, const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return grid.h() * a.dot(b); }

cplx inner(const Grid1D& grid, const cvec& a, const cvec& b) {
  cplx acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) acc += std::conj(a[i]) * b[i];
  return grid.h() * acc;
}

Eigen::MatrixXd overlap_matrix(const Spectrum1D& a, const Spectrum1D& b) {
  require(a.grid.n == b.grid.n && a.grid.x_min == b.grid.x_min && a.grid.x_max == b.grid.x_max,
          "overlap: spectra live on different grids");
  return a.grid.h() * b.states.transpose() * a.states;
}

TrapPair make_pair(Spectrum1D h1, Spectrum1D h2) {
  TrapPair out;
  out.overlap = overlap_matrix(h1, h2);
  out.h1 = std::move(h1);
  out.h2 = std::move(h2);
  return out;
}

TrapPair build_pair(const Trap1DModel& model, const Grid1D& grid, int n_states, int n_states_h2) {
  model.validate();
  const int n2 = n_states_h2 > 0 ? n_states_h2 : n_states;
  return make_pair(eigensolve(model.sample(grid, 1.0), grid, n_states, model.mass),
                   eigensolve(model.sample(grid, 1.0 + model.eta), grid, n2, model.mass));
}

cvec to_complex(const Eigen::VectorXd& v) {
  cvec out(static_cast<size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) out[static_cast<size_t>(i)] = v[i];
  return out;
}

cvec propagate(const cvec& psi, const std::vector<double>& potential, const Grid1D& grid, double t, double dt,
               double e_max, double mass) {
  grid.validate();
  require(psi.size() == static_cast<size_t>(grid.n) && potential.size() == psi.size(),
          "propagate: size mismatch with grid");
  require(t >= 0.0 && dt > 0.0 && e_max > 0.0, "propagate: t >= 0, dt > 0 and e_max > 0 required");
  if (dt > 0.1 / e_max) fail(ErrorKind::StepSize, "propagate: dt exceeds 0.1 / E_max");
  if (t == 0.0) return psi;

  const int steps = static_cast<int>(std::ceil(t / dt));
  const double tau = t / steps;
  // Yoshida triple jump of Strang steps: weights w1, w0, w1.
  const double cbrt2 = std::cbrt(2.0);
  const double w1 = 1.0 / (2.0 - cbrt2);
  const double w0 = -cbrt2 / (2.0 - cbrt2);

  const int n = grid.n;
  auto phase = [&](const std::vector<double>& v, double s) {
    cvec out(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) out[static_cast<size_t>(i)] = std::polar(1.0, -v[static_cast<size_t>(i)] * s);
    return out;
  };
  std::vector<double> kin(static_cast<size_t>(n));
  for (int j = 0; j < n; ++j) {
    const double k = wavenumber(j, grid);
    kin[static_cast<size_t>(j)] = k * k / (2.0 * mass);
  }
  const cvec v_edge = phase(potential, 0.5 * w1 * tau);
  const cvec v_mid = phase(potential, 0.5 * (w0 + w1) * tau);
  const cvec v_join = phase(potential, w1 * tau);
  const cvec k1 = phase(kin, w1 * tau);
  const cvec k0 = phase(kin, w0 * tau);

  Fft fft(n);
  cvec& z = fft.data();
  z = psi;
  auto mul = [&](const cvec& f) {
    for (int i = 0; i < n; ++i) z[static_cast<size_t>(i)] *= f[static_cast<size_t>(i)];
  };
  auto kick = [&](const cvec& f) {
    fft.forward();
    mul(f);
    fft.backward();
  };
  mul(v_edge);
  for (int s = 0; s < steps; ++s) {
    kick(k1);
    mul(v_mid);
    kick(k0);
    mul(v_mid);
    kick(k1);
    mul(s + 1 < steps ? v_join : v_edge);
  }
  return z;
}

cplx simulate_echo(const Eigen::VectorXd& psi, const std::vector<double>& v1, const std::vector<double>& v2,
                   const Grid1D& grid, double t1, double t2, double dt, double e_max, double mass) {
  const cvec start = to_complex(psi);
  const cvec a = propagate(propagate(start, v1, grid, t1, dt, e_max, mass), v2, grid, t2, dt, e_max, mass);
  const cvec b = propagate(propagate(start, v2, grid, t1, dt, e_max, mass), v1, grid, t2, dt, e_max, mass);
  return inner(grid, a, b);
}

double potential_minimum(const Trap1DModel& model) {
  model.validate();
  switch (model.variant) {
    case Variant::Harmonic:
      return model.x0 - model.g / (model.omega * model.omega);
    case Variant::Evanescent:
      return std::log(model.U * model.kappa / (model.mass * model.g)) / model.kappa;
    case Variant::Gaussian: {
      // The local minimum sits within half a waist of the centre for any
      // admissible tilt; the bracket excludes the outer gravity slope.
      auto v = [&](double x) { return model.potential(x); };
      const auto r = boost::math::tools::brent_find_minima(v, -0.5 * model.w, 0.5 * model.w, 52);
      if (model.potential_second_derivative(r.first) <= 0.0) {
        fail(ErrorKind::NoMinimum, "gaussian trap: no potential minimum");
      }
      return r.first;
    }
  }
  fail(ErrorKind::NoMinimum, "trap has no minimum");
}

double oscillation_period(const Trap1DModel& model) {
  const double x = potential_minimum(model);
  const double curv = model.potential_second_derivative(x);
  if (!(curv > 0.0)) fail(ErrorKind::NoMinimum, "trap minimum has non-positive curvature");
  return 2.0 * std::numbers::pi / std::sqrt(curv / model.mass);
}

double bounce_period(const Trap1DModel& model, double energy) {
  const double xm = potential_minimum(model);
  const double vmin = model.potential(xm);
  require(energy > vmin, "bounce period: energy below the potential minimum");
  auto f = [&](double x) { return model.potential(x) - energy; };
  boost::math::tools::eps_tolerance<double> tol(50);
  auto turning = [&](double dir) {
    double step = 1e-3 + std::abs(xm) * 1e-3;
    double far = xm + dir * step;
    while (f(far) < 0.0) {
      step *= 2.0;
      far = xm + dir * step;
      if (step > 1e8) fail(ErrorKind::NoMinimum, "bounce period: orbit is unbounded");
    }
    std::uintmax_t iters = 200;
    const auto r = dir < 0 ? boost::math::tools::toms748_solve(f, far, xm, tol, iters)
                           : boost::math::tools::toms748_solve(f, xm, far, tol, iters);
    return 0.5 * (r.first + r.second);
  };
  const double a = turning(-1.0);
  const double b = turning(1.0);
  boost::math::quadrature::tanh_sinh<double> integrator;
  auto inv_speed = [&](double x) {
    const double ke = energy - model.potential(x);
    return ke > 0.0 ? 1.0 / std::sqrt(2.0 * ke / model.mass) : 0.0;
  };
  return 2.0 * integrator.integrate(inv_speed, a, b);
}

Trap1DModel scaled_gaussian(const PhysicalTrap& trap, double eta) {
  constexpr double kB = 1.380649e-23;
  constexpr double hbar = 1.054571817e-34;
  constexpr double amu = 1.66053906660e-27;
  const double m = trap.mass_amu * amu;
  const double u = trap.depth_microkelvin * 1e-6 * kB;
  const double w = trap.waist_micrometre * 1e-6;
  const double omega = 2.0 * std::sqrt(u / m) / w;
  const double len = std::sqrt(hbar / (m * omega));
  Trap1DModel out;
  out.variant = Variant::Gaussian;
  out.U = u / (hbar * omega);
  out.w = w / len;
  out.g = m * trap.g * len / (hbar * omega);
  out.mass = 1.0;
  out.eta = eta;
  return out;
}

}  // namespace qecho::trap1d
