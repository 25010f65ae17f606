#pragma once

// Experiment runners behind the command-line tool. Each run turns a resolved
// config into named CSV tables; nothing touches the disk except the cache and
// write_outputs.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "qecho/billiard.hpp"
#include "qecho/spectroscopy.hpp"
#include "qecho/store.hpp"
#include "qecho/trap1d.hpp"

namespace qecho::experiments {

using json = nlohmann::json;

struct Table {
  // Header lines, written with a leading "# ".
  std::vector<std::string> meta;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  void add_row(const std::vector<double>& values);
  std::string csv() const;
};

struct RunResult {
  // File name -> table, written in name order.
  std::map<std::string, Table> tables;
  // Completeness or truncation diagnostics; any entry makes the run fail.
  std::vector<std::string> flags;
  std::vector<std::string> cache_keys;
};

struct Context {
  // nullptr disables caching.
  const store::Cache* cache = nullptr;
};

RunResult run(const std::string& experiment, const json& config, const Context& ctx = {});

// Writes every table plus manifest.json into dir. Each file goes to a temporary
// name first and is renamed into place.
void write_outputs(const std::filesystem::path& dir, const std::string& experiment, const json& config,
                   const RunResult& result, double seconds);

// Building blocks shared with the acceptance suite.

geometry::BilliardShape shape_of(const json& j);
billiard::SolverConfig solver_of(const json& j);
trap1d::Trap1DModel model_of(const json& j);
trap1d::Grid1D grid_of(const json& j);

// solve_window through the cache when one is given.
billiard::EigenBasis solve_cached(const Context& ctx, const geometry::BilliardShape& shape,
                                  geometry::SymmetryClass cls, double k_center, double half_width,
                                  const billiard::SolverConfig& solver, std::vector<std::string>* keys = nullptr);
trap1d::Spectrum1D eigensolve_cached(const Context& ctx, const trap1d::Trap1DModel& model,
                                     const trap1d::Grid1D& grid, double optical_scale, int n_states,
                                     std::vector<std::string>* keys = nullptr);

// |<m(lambda_i) | n(0)>| with m the state holding the same rank in k as n had at
// lambda = 0 (the adiabatic continuation, levels of one class never cross).
// Entry [i][t] for step i and track t.
std::vector<std::vector<double>> adiabatic_overlaps(const billiard::LevelTrack& track,
                                                   const billiard::OverlapConfig& config = {});
// Track holding rank r (ascending k) at step i.
size_t track_at_rank(const billiard::LevelTrack& track, size_t step, size_t rank);
size_t rank_of(const billiard::LevelTrack& track, size_t step, size_t t);

// First x where y drops below level, linearly interpolated; NaN when it never does.
double first_crossing_below(const std::vector<double>& x, const std::vector<double>& y, double level);
// First x where y rises above level; NaN when it never does.
double first_crossing_above(const std::vector<double>& x, const std::vector<double>& y, double level);
// Indices of strict interior local minima.
std::vector<size_t> local_minima(const std::vector<double>& y);

spectroscopy::SpectralPair spectral_pair(const trap1d::TrapPair& pair, double truncation_tolerance);

// Billiard pair: H1 states in [k_lo, k_hi], H2 the perturbed shape over the same
// window shifted by the expected mean level shift and widened by margin. Energies
// are k^2; partners come from the maximum-weight assignment on |O|^2.
struct BilliardPair {
  billiard::EigenBasis h1;
  billiard::EigenBasis h2;
  billiard::OverlapMatrix overlap;
  spectroscopy::SpectralPair spectral;
};
BilliardPair billiard_pair(const Context& ctx, const geometry::BilliardShape& shape, geometry::SymmetryClass cls,
                           const geometry::Perturbation& pert, double k_lo, double k_hi, double margin,
                           const billiard::SolverConfig& solver, std::vector<std::string>* keys = nullptr);

struct LongTimeEcho {
  double formula = 0.0;
  double time_average = 0.0;
  double plateau = 0.0;
  double t_mix = 0.0;
  std::vector<double> taus;
  std::vector<double> p2;
};
// Ensemble echo on [0, tau_max] and its average over [t_mix, 10 t_mix], where
// t_mix is the first time P2 reaches 0.9 of the plateau (the mean over the
// second half of the range).
LongTimeEcho long_time_echo_check(const spectroscopy::SpectralPair& pair, const spectroscopy::ThermalWeights& w,
                                  double tau_max, int count);

}  // namespace qecho::experiments
