#include "qecho/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>

#include "qecho/acceptance.hpp"
#include "qecho/config.hpp"
#include "qecho/error.hpp"
#include "qecho/format.hpp"
#include "qecho/parallel.hpp"

namespace qecho::experiments {

namespace {

constexpr const char* kVersion = "1.0.0";

double num(const json& j, const char* key) {
  const json& v = j.at(key);
  if (!v.is_number()) fail(ErrorKind::Config, std::string("config key '") + key + "' must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) fail(ErrorKind::Config, std::string("config key '") + key + "' must be finite");
  return d;
}

int integer(const json& j, const char* key) {
  const double d = num(j, key);
  if (d != std::floor(d) || std::abs(d) > 1e9) {
    fail(ErrorKind::Config, std::string("config key '") + key + "' must be an integer");
  }
  return static_cast<int>(d);
}

std::vector<double> numbers(const json& j, const char* key) {
  const json& v = j.at(key);
  if (!v.is_array()) fail(ErrorKind::Config, std::string("config key '") + key + "' must be an array");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) fail(ErrorKind::Config, std::string("config key '") + key + "' must hold numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

std::string text(const json& j, const char* key) {
  const json& v = j.at(key);
  if (!v.is_string()) fail(ErrorKind::Config, std::string("config key '") + key + "' must be a string");
  return v.get<std::string>();
}

std::string fmt(double v) { return format_exact(v); }

json describe_solver(const billiard::SolverConfig& s) {
  return {{"basis_factor", s.basis_factor},
          {"evanescent_fraction", s.evanescent_fraction},
          {"evanescent_alphas", s.evanescent_alphas},
          {"boundary_points_per_wavelength", s.boundary_points_per_wavelength},
          {"subwindow_half_width", s.subwindow_half_width},
          {"refine_offset", s.refine_offset},
          {"rank_cutoff", s.rank_cutoff},
          {"quality_factor", s.quality_factor},
          {"completeness_tolerance", s.completeness_tolerance},
          {"integrable_allowance", s.integrable_allowance},
          {"require_complete", s.require_complete}};
}

json describe_model(const trap1d::Trap1DModel& m) {
  return {{"variant", trap1d::to_string(m.variant)},
          {"U", m.U},
          {"w", m.w},
          {"kappa", m.kappa},
          {"omega", m.omega},
          {"x0", m.x0},
          {"g", m.g},
          {"mass", m.mass}};
}

json describe_grid(const trap1d::Grid1D& g) { return {{"x_min", g.x_min}, {"x_max", g.x_max}, {"n", g.n}}; }

std::vector<std::string> header(const json& config) { return {"config " + config::hash(config)}; }

billiard::TrackConfig tracking_of(const json& j) {
  billiard::TrackConfig tc;
  tc.solver = solver_of(j.at("solver"));
  const json& t = j.at("tracking");
  tc.max_bisection_depth = integer(t, "max_bisection_depth");
  tc.margin = num(t, "margin");
  tc.min_overlap = num(t, "min_overlap");
  tc.crossing_gap_fraction = num(t, "crossing_gap_fraction");
  tc.strict = false;
  return tc;
}

std::string track_flags(const billiard::LevelTrack& lt, size_t step, size_t t) {
  std::string f;
  if (lt.ambiguous[step][t]) f = "ambiguous";
  if (lt.inserted[step]) f += f.empty() ? "inserted" : "|inserted";
  return f;
}

void note_ambiguous(const billiard::LevelTrack& lt, RunResult& out) {
  for (size_t i = 0; i < lt.strengths.size(); ++i) {
    for (size_t t = 0; t < lt.tracks(); ++t) {
      if (lt.ambiguous[i][t]) {
        out.flags.push_back("track " + std::to_string(t) + " ambiguous at strength " + fmt(lt.strengths[i]));
      }
    }
  }
}

// Experiments --------------------------------------------------------------

RunResult run_eigensolve(const json& cfg, const Context& ctx) {
  RunResult out;
  const auto shape = shape_of(cfg.at("shape"));
  const auto cls = geometry::parse_symmetry(text(cfg, "symmetry"));
  billiard::SolverConfig solver = solver_of(cfg.at("solver"));
  solver.require_complete = false;
  const billiard::EigenBasis basis =
      solve_cached(ctx, shape, cls, num(cfg, "k_center"), num(cfg, "half_width"), solver, &out.cache_keys);

  Table levels;
  levels.meta = header(cfg);
  levels.meta.push_back("shape " + shape.describe() + " class " + geometry::to_string(cls));
  levels.meta.push_back("weyl expected " + fmt(basis.weyl_expected) + " found " + std::to_string(basis.weyl_found) +
                        " tolerance " + fmt(basis.weyl_tolerance) + " complete " + (basis.complete ? "1" : "0"));
  levels.columns = {"index", "k", "quality"};
  for (size_t i = 0; i < basis.states.size(); ++i) {
    levels.add_row({static_cast<double>(i), basis.states[i].k, basis.states[i].quality});
  }
  out.tables["levels.csv"] = levels;
  if (!basis.complete) {
    out.flags.push_back("Weyl audit: found " + std::to_string(basis.weyl_found) + " levels, expected " +
                        fmt(basis.weyl_expected));
  }

  const json& d = cfg.at("density");
  const int nx = integer(d, "nx");
  const int ny = integer(d, "ny");
  if (nx > 0 && ny > 0 && !basis.states.empty()) {
    require(nx >= 2 && ny >= 2, "density grid needs at least 2 points per axis");
    const double target = num(d, "state_k");
    size_t best = 0;
    for (size_t i = 1; i < basis.states.size(); ++i) {
      if (std::abs(basis.states[i].k - target) < std::abs(basis.states[best].k - target)) best = i;
    }
    const geometry::Vec2 h = shape.half_extent();
    std::vector<geometry::Vec2> pts;
    pts.reserve(static_cast<size_t>(nx) * static_cast<size_t>(ny));
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) pts.push_back({-h.x + 2.0 * h.x * i / (nx - 1), -h.y + 2.0 * h.y * j / (ny - 1)});
    }
    const std::vector<double> psi = billiard::eval_wavefunction(basis.states[best], pts);
    Table dens;
    dens.meta = header(cfg);
    dens.meta.push_back("state index " + std::to_string(best) + " k " + fmt(basis.states[best].k));
    dens.columns = {"x", "y", "density"};
    for (size_t p = 0; p < pts.size(); ++p) dens.add_row({pts[p].x, pts[p].y, psi[p] * psi[p]});
    out.tables["density.csv"] = dens;
  }
  return out;
}

RunResult run_overlap_scan(const json& cfg, const Context&) {
  RunResult out;
  const auto shape = shape_of(cfg.at("shape"));
  const auto cls = geometry::parse_symmetry(text(cfg, "symmetry"));
  const auto family = geometry::parse_family(text(cfg, "family"));
  const auto strengths = numbers(cfg, "strengths");
  const auto tc = tracking_of(cfg);
  const auto lt = billiard::track_levels(shape, cls, family, strengths, num(cfg, "k_lo"), num(cfg, "k_hi"), tc);
  note_ambiguous(lt, out);
  const auto ov = adiabatic_overlaps(lt, tc.overlap);
  const double lo = num(cfg, "report_lo");
  const double hi = num(cfg, "report_hi");

  Table t;
  t.meta = header(cfg);
  t.meta.push_back("family " + geometry::to_string(family) + " shape " + shape.describe() + " class " +
                   geometry::to_string(cls));
  t.columns = {"strength", "state_id", "k_unpert", "k_pert", "overlap_abs", "displacement"};
  for (size_t i = 0; i < lt.strengths.size(); ++i) {
    const double disp = geometry::equivalent_displacement(shape, geometry::make_perturbation(family, lt.strengths[i]));
    for (size_t tr = 0; tr < lt.tracks(); ++tr) {
      const double k0 = lt.state(0, tr).k;
      if (k0 < lo || k0 > hi) continue;
      const size_t m = track_at_rank(lt, i, rank_of(lt, 0, tr));
      t.add_row({lt.strengths[i], static_cast<double>(tr), k0, lt.state(i, m).k, ov[i][tr], disp});
    }
  }
  out.tables["overlap_scan.csv"] = t;
  return out;
}

RunResult run_level_tracking(const json& cfg, const Context&) {
  RunResult out;
  const auto shape = shape_of(cfg.at("shape"));
  const auto cls = geometry::parse_symmetry(text(cfg, "symmetry"));
  const auto family = geometry::parse_family(text(cfg, "family"));
  const auto tc = tracking_of(cfg);
  const auto lt =
      billiard::track_levels(shape, cls, family, numbers(cfg, "strengths"), num(cfg, "k_lo"), num(cfg, "k_hi"), tc);
  note_ambiguous(lt, out);

  Table track;
  track.meta = header(cfg);
  track.meta.push_back("family " + geometry::to_string(family) + " mean spacing " + fmt(lt.mean_spacing));
  track.columns = {"strength", "track_id", "k", "flags"};
  for (size_t i = 0; i < lt.strengths.size(); ++i) {
    for (size_t t = 0; t < lt.tracks(); ++t) {
      track.rows.push_back({fmt(lt.strengths[i]), std::to_string(t), fmt(lt.state(i, t).k), track_flags(lt, i, t)});
    }
  }
  out.tables["level_track.csv"] = track;

  Table cross;
  cross.meta = header(cfg);
  cross.columns = {"lower", "upper", "strength", "gap", "gap_over_spacing"};
  for (const auto& c : lt.crossings) {
    cross.add_row({static_cast<double>(c.lower), static_cast<double>(c.upper), c.strength, c.gap, c.gap / lt.mean_spacing});
  }
  out.tables["crossings.csv"] = cross;

  const double target = num(cfg, "initial_k");
  size_t init = 0;
  for (size_t t = 1; t < lt.tracks(); ++t) {
    if (std::abs(lt.state(0, t).k - target) < std::abs(lt.state(0, init).k - target)) init = t;
  }
  const size_t nt = lt.tracks();
  std::vector<double> elem(lt.strengths.size() * nt);
  parallel_for(elem.size(), [&](size_t idx) {
    const size_t i = idx / nt;
    const size_t t = idx % nt;
    elem[idx] = std::abs(billiard::overlap(lt.state(0, init), lt.state(i, t), tc.overlap));
  });
  Table nb;
  nb.meta = header(cfg);
  nb.meta.push_back("initial track " + std::to_string(init) + " k " + fmt(lt.state(0, init).k));
  nb.columns = {"strength", "track_id", "k", "overlap_abs"};
  for (size_t i = 0; i < lt.strengths.size(); ++i) {
    for (size_t t = 0; t < nt; ++t) nb.add_row({lt.strengths[i], static_cast<double>(t), lt.state(i, t).k, elem[i * nt + t]});
  }
  out.tables["neighbors.csv"] = nb;
  return out;
}

RunResult run_echo_trap(const json& cfg, const Context& ctx) {
  RunResult out;
  const trap1d::Trap1DModel base = model_of(cfg.at("model"));
  const trap1d::Grid1D grid = grid_of(cfg.at("grid"));
  const int n1 = integer(cfg, "n_states");
  const int n2 = n1 + integer(cfg, "extra_h2_states");
  const double temperature = num(cfg, "temperature");
  const double coverage = num(cfg, "coverage");
  const double tol = num(cfg, "truncation_tolerance");
  const json& tau_cfg = cfg.at("tau");
  const int count = integer(tau_cfg, "count");
  require(count >= 2, "tau grid needs at least two points");
  std::vector<int> columns;
  for (double c : numbers(cfg, "state_columns")) columns.push_back(static_cast<int>(c));

  const double t_osc = trap1d::oscillation_period(base);
  const double tau_max = num(tau_cfg, "max_periods") * t_osc;
  std::vector<double> taus(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) taus[static_cast<size_t>(i)] = tau_max * i / (count - 1);

  const trap1d::Spectrum1D h1 = eigensolve_cached(ctx, base, grid, 1.0, n1, &out.cache_keys);
  const json& perts = cfg.at("perturbations");
  require(perts.is_array() && !perts.empty(), "perturbations must be a non-empty array");
  for (const auto& p : perts) {
    if (!p.is_object() || p.size() != 2 || !p.contains("label") || !p.contains("eta")) {
      fail(ErrorKind::Config, "each perturbation needs exactly 'label' and 'eta'");
    }
    const std::string label = text(p, "label");
    const double eta = num(p, "eta");
    trap1d::Trap1DModel model = base;
    model.eta = eta;
    model.validate();
    const trap1d::Spectrum1D h2 = eigensolve_cached(ctx, base, grid, 1.0 + eta, n2, &out.cache_keys);
    const spectroscopy::SpectralPair pair = spectral_pair(trap1d::make_pair(h1, h2), tol);
    const auto w = spectroscopy::thermal_weights(h1.energies, temperature, coverage);
    if (!w.warning.empty()) out.flags.push_back(label + ": " + w.warning);
    double worst = 0.0;
    for (int n = 0; n < w.size(); ++n) worst = std::max(worst, spectroscopy::column_deficiency(pair, n));
    for (int c : columns) require(c >= 0 && c < w.size(), "state column " + std::to_string(c) + " outside the ensemble");

    std::vector<std::string> meta = header(cfg);
    meta.push_back("eta " + fmt(eta) + " T_osc " + fmt(t_osc) + " temperature " + fmt(temperature));
    meta.push_back("ensemble states " + std::to_string(w.size()) + " coverage " + fmt(w.coverage) +
                   " max column deficiency " + fmt(worst));

    const auto p2 = spectroscopy::ensemble_echo(pair, w, taus);
    const auto contrast = spectroscopy::ensemble_ramsey_contrast(pair, w, taus);
    std::vector<std::vector<double>> state_p2(columns.size(), std::vector<double>(taus.size()));
    std::vector<std::vector<double>> state_c(columns.size(), std::vector<double>(taus.size()));
    parallel_for(taus.size(), [&](size_t t) {
      const auto a = spectroscopy::echo_amplitudes(pair, columns, taus[t], taus[t]);
      for (size_t c = 0; c < columns.size(); ++c) {
        state_p2[c][t] = std::clamp(0.5 * (1.0 - a[c].real()), 0.0, 1.0);
        state_c[c][t] = spectroscopy::ramsey_contrast(pair, columns[c], taus[t]);
      }
    });

    Table echo;
    echo.meta = meta;
    echo.columns = {"tau", "p2_ensemble"};
    Table ramsey;
    ramsey.meta = meta;
    ramsey.columns = {"tau", "contrast_ensemble"};
    for (int c : columns) {
      echo.columns.push_back("p2_state_" + std::to_string(c));
      ramsey.columns.push_back("contrast_state_" + std::to_string(c));
    }
    for (size_t t = 0; t < taus.size(); ++t) {
      std::vector<double> er = {taus[t], p2[t]};
      std::vector<double> rr = {taus[t], contrast[t]};
      for (size_t c = 0; c < columns.size(); ++c) {
        er.push_back(state_p2[c][t]);
        rr.push_back(state_c[c][t]);
      }
      echo.add_row(er);
      ramsey.add_row(rr);
    }
    out.tables["echo_" + label + ".csv"] = echo;
    out.tables["ramsey_" + label + ".csv"] = ramsey;
  }
  return out;
}

RunResult run_echo_billiard(const json& cfg, const Context& ctx) {
  RunResult out;
  const auto shape = shape_of(cfg.at("shape"));
  const auto cls = geometry::parse_symmetry(text(cfg, "symmetry"));
  const auto family = geometry::parse_family(text(cfg, "family"));
  const auto solver = solver_of(cfg.at("solver"));
  const double tol = num(cfg, "truncation_tolerance");
  const json& tau_cfg = cfg.at("tau");
  const int count = integer(tau_cfg, "count");

  Table summary;
  summary.meta = header(cfg);
  summary.columns = {"strength", "states", "p2_formula", "p2_time_average", "t_mix", "plateau", "max_deficiency"};
  const auto strengths = numbers(cfg, "strengths");
  for (size_t s = 0; s < strengths.size(); ++s) {
    const auto pert = geometry::make_perturbation(family, strengths[s]);
    BilliardPair bp = billiard_pair(ctx, shape, cls, pert, num(cfg, "k_lo"), num(cfg, "k_hi"), num(cfg, "margin"),
                                    solver, &out.cache_keys);
    bp.spectral.truncation_tolerance = tol;
    const auto w = spectroscopy::thermal_weights_fixed(bp.spectral.e1, num(cfg, "temperature"), bp.spectral.size1());
    double worst = 0.0;
    for (int n = 0; n < w.size(); ++n) worst = std::max(worst, spectroscopy::column_deficiency(bp.spectral, n));
    if (worst > tol) out.flags.push_back("strength " + fmt(strengths[s]) + ": column deficiency " + fmt(worst));
    const auto& e1 = bp.spectral.e1;
    const double spacing = (e1.back() - e1.front()) / static_cast<double>(e1.size() - 1);
    const double tau_max = num(tau_cfg, "heisenberg_times") * 2.0 * std::numbers::pi / spacing;
    const LongTimeEcho lte = long_time_echo_check(bp.spectral, w, tau_max, count);
    summary.add_row({strengths[s], static_cast<double>(w.size()), lte.formula, lte.time_average, lte.t_mix, lte.plateau,
                     worst});
    Table curve;
    curve.meta = header(cfg);
    curve.meta.push_back("strength " + fmt(strengths[s]) + " family " + geometry::to_string(family));
    curve.columns = {"tau", "p2_ensemble"};
    for (size_t t = 0; t < lte.taus.size(); ++t) curve.add_row({lte.taus[t], lte.p2[t]});
    out.tables["echo_" + std::to_string(s) + ".csv"] = curve;
  }
  out.tables["long_time.csv"] = summary;
  return out;
}

RunResult run_dephasing_free(const json& cfg, const Context& ctx) {
  RunResult out;
  const double eps = num(cfg, "relative_change");
  const int n = integer(cfg, "n_states");
  const int n_thermal = std::max(n, integer(cfg, "thermal_states"));
  const double tau = num(cfg, "tau");
  const auto temperatures = numbers(cfg, "temperatures");

  Table shifts;
  shifts.meta = header(cfg);
  shifts.columns = {"model", "n", "e1", "e2", "shift"};
  Table summary;
  summary.meta = header(cfg);
  summary.columns = {"model", "mean_shift", "std_shift", "normalized_spread", "expected_shift"};
  Table contrast;
  contrast.meta = header(cfg);
  contrast.meta.push_back("tau " + fmt(tau));
  contrast.columns = {"model", "temperature", "states", "coverage", "contrast"};

  for (const char* name : {"evanescent", "gaussian"}) {
    const json& sub = cfg.at(name);
    const trap1d::Trap1DModel model = model_of(sub.at("model"));
    const trap1d::Grid1D grid = grid_of(sub.at("grid"));
    const trap1d::Spectrum1D h1 = eigensolve_cached(ctx, model, grid, 1.0, n_thermal, &out.cache_keys);
    const trap1d::Spectrum1D h2 = eigensolve_cached(ctx, model, grid, 1.0 + eps, n_thermal, &out.cache_keys);
    std::vector<double> d(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      d[static_cast<size_t>(i)] = h2.energies[static_cast<size_t>(i)] - h1.energies[static_cast<size_t>(i)];
      shifts.rows.push_back({name, std::to_string(i), fmt(h1.energies[static_cast<size_t>(i)]),
                             fmt(h2.energies[static_cast<size_t>(i)]), fmt(d[static_cast<size_t>(i)])});
    }
    const double mean = std::accumulate(d.begin(), d.end(), 0.0) / n;
    double var = 0.0;
    for (double x : d) var += (x - mean) * (x - mean);
    const double sd = std::sqrt(var / n);
    const double expected = model.variant == trap1d::Variant::Evanescent
                                ? model.mass * model.g / model.kappa * std::log1p(eps)
                                : std::numeric_limits<double>::quiet_NaN();
    summary.rows.push_back({name, fmt(mean), fmt(sd), fmt(sd / std::abs(mean)), fmt(expected)});

    const spectroscopy::SpectralPair pair = spectral_pair(trap1d::make_pair(h1, h2), 0.01);
    for (double temp : temperatures) {
      const auto w = spectroscopy::thermal_weights(h1.energies, temp, 0.99);
      if (!w.warning.empty()) out.flags.push_back(std::string(name) + " T=" + fmt(temp) + ": " + w.warning);
      const double c = spectroscopy::ensemble_ramsey_contrast(pair, w, {tau}).front();
      contrast.rows.push_back({name, fmt(temp), std::to_string(w.size()), fmt(w.coverage), fmt(c)});
    }
  }
  out.tables["shifts.csv"] = shifts;
  out.tables["summary.csv"] = summary;
  out.tables["contrast.csv"] = contrast;
  return out;
}

RunResult run_verify(const json& cfg) {
  RunResult out;
  std::vector<int> ids;
  for (double c : numbers(cfg, "criteria")) ids.push_back(static_cast<int>(c));
  if (ids.empty()) {
    for (const auto& c : acceptance::criteria()) ids.push_back(c.id);
  }
  Table t;
  t.columns = {"id", "name", "pass", "seconds", "detail"};
  for (int id : ids) {
    const auto r = acceptance::run_criterion(id);
    t.rows.push_back({std::to_string(r.id), r.name, r.pass ? "1" : "0", format_sig(r.seconds, 4), r.detail});
    if (!r.pass) out.flags.push_back("criterion " + std::to_string(r.id) + " failed: " + r.detail);
  }
  out.tables["acceptance.csv"] = t;
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

void write_atomic(const std::filesystem::path& path, const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) fail(ErrorKind::IoFailure, "cannot write " + tmp.string());
    f << content;
    if (!f) fail(ErrorKind::IoFailure, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) fail(ErrorKind::IoFailure, "cannot rename " + tmp.string() + ": " + ec.message());
}

}  // namespace

void Table::add_row(const std::vector<double>& values) {
  std::vector<std::string> r;
  r.reserve(values.size());
  for (double v : values) r.push_back(fmt(v));
  rows.push_back(std::move(r));
}

std::string Table::csv() const {
  std::string s;
  for (const auto& m : meta) s += "# " + m + "\n";
  for (size_t i = 0; i < columns.size(); ++i) s += (i ? "," : "") + columns[i];
  s += "\n";
  for (const auto& r : rows) {
    for (size_t i = 0; i < r.size(); ++i) s += (i ? "," : "") + csv_field(r[i]);
    s += "\n";
  }
  return s;
}

geometry::BilliardShape shape_of(const json& j) {
  try {
    return store::shape_from(j);
  } catch (const json::exception& e) {
    fail(ErrorKind::Config, std::string("bad shape: ") + e.what());
  }
}

billiard::SolverConfig solver_of(const json& j) {
  billiard::SolverConfig s;
  s.basis_factor = num(j, "basis_factor");
  s.boundary_points_per_wavelength = num(j, "boundary_points_per_wavelength");
  s.quality_factor = num(j, "quality_factor");
  s.completeness_tolerance = num(j, "completeness_tolerance");
  require(s.basis_factor > 0.0 && s.boundary_points_per_wavelength > 0.0 && s.quality_factor > 0.0,
          "solver settings must be positive");
  return s;
}

trap1d::Trap1DModel model_of(const json& j) {
  trap1d::Trap1DModel m;
  m.variant = trap1d::parse_variant(text(j, "variant"));
  m.U = num(j, "U");
  m.w = num(j, "w");
  m.kappa = num(j, "kappa");
  m.omega = num(j, "omega");
  m.x0 = num(j, "x0");
  m.g = num(j, "g");
  m.mass = num(j, "mass");
  m.eta = 0.0;
  m.validate();
  return m;
}

trap1d::Grid1D grid_of(const json& j) {
  trap1d::Grid1D g{num(j, "x_min"), num(j, "x_max"), integer(j, "n")};
  g.validate();
  return g;
}

billiard::EigenBasis solve_cached(const Context& ctx, const geometry::BilliardShape& shape,
                                  geometry::SymmetryClass cls, double k_center, double half_width,
                                  const billiard::SolverConfig& solver, std::vector<std::string>* keys) {
  const json desc = {{"shape", store::describe(shape)},
                     {"class", geometry::to_string(cls)},
                     {"k_center", k_center},
                     {"half_width", half_width},
                     {"solver", describe_solver(solver)}};
  if (keys) keys->push_back("eigenbasis/" + store::key_of(store::canonical(desc)));
  if (ctx.cache) {
    if (auto e = ctx.cache->get("eigenbasis", desc)) return store::eigenbasis_from(*e);
  }
  billiard::EigenBasis b = billiard::solve_window(shape, cls, k_center, half_width, solver);
  if (ctx.cache) ctx.cache->put(store::to_entry(b, desc));
  return b;
}

trap1d::Spectrum1D eigensolve_cached(const Context& ctx, const trap1d::Trap1DModel& model, const trap1d::Grid1D& grid,
                                     double optical_scale, int n_states, std::vector<std::string>* keys) {
  const json desc = {{"model", describe_model(model)},
                     {"grid", describe_grid(grid)},
                     {"optical_scale", optical_scale},
                     {"n_states", n_states}};
  if (keys) keys->push_back("spectrum1d/" + store::key_of(store::canonical(desc)));
  if (ctx.cache) {
    if (auto e = ctx.cache->get("spectrum1d", desc)) return store::spectrum_from(*e);
  }
  trap1d::Spectrum1D s = trap1d::eigensolve(model.sample(grid, optical_scale), grid, n_states, model.mass);
  if (ctx.cache) ctx.cache->put(store::to_entry(s, desc));
  return s;
}

size_t rank_of(const billiard::LevelTrack& lt, size_t step, size_t t) {
  const double k = lt.state(step, t).k;
  size_t r = 0;
  for (size_t u = 0; u < lt.tracks(); ++u) {
    const double ku = lt.state(step, u).k;
    if (ku < k || (ku == k && u < t)) ++r;
  }
  return r;
}

size_t track_at_rank(const billiard::LevelTrack& lt, size_t step, size_t rank) {
  for (size_t u = 0; u < lt.tracks(); ++u) {
    if (rank_of(lt, step, u) == rank) return u;
  }
  fail(ErrorKind::InvalidParameter, "rank outside the tracked block");
}

std::vector<std::vector<double>> adiabatic_overlaps(const billiard::LevelTrack& lt,
                                                   const billiard::OverlapConfig& config) {
  const size_t steps = lt.strengths.size();
  const size_t nt = lt.tracks();
  std::vector<std::vector<double>> out(steps, std::vector<double>(nt, 0.0));
  parallel_for(steps * nt, [&](size_t idx) {
    const size_t i = idx / nt;
    const size_t t = idx % nt;
    const size_t m = track_at_rank(lt, i, rank_of(lt, 0, t));
    out[i][t] = std::abs(billiard::overlap(lt.state(0, t), lt.state(i, m), config));
  });
  return out;
}

double first_crossing_below(const std::vector<double>& x, const std::vector<double>& y, double level) {
  for (size_t i = 0; i < y.size(); ++i) {
    if (y[i] < level) {
      if (i == 0) return x[0];
      return x[i - 1] + (x[i] - x[i - 1]) * (y[i - 1] - level) / (y[i - 1] - y[i]);
    }
  }
  return std::numeric_limits<double>::quiet_NaN();
}

double first_crossing_above(const std::vector<double>& x, const std::vector<double>& y, double level) {
  std::vector<double> neg(y.size());
  for (size_t i = 0; i < y.size(); ++i) neg[i] = -y[i];
  return first_crossing_below(x, neg, -level);
}

std::vector<size_t> local_minima(const std::vector<double>& y) {
  std::vector<size_t> out;
  for (size_t i = 1; i + 1 < y.size(); ++i) {
    if (y[i] < y[i - 1] && y[i] < y[i + 1]) out.push_back(i);
  }
  return out;
}

spectroscopy::SpectralPair spectral_pair(const trap1d::TrapPair& pair, double truncation_tolerance) {
  spectroscopy::SpectralPair p;
  p.e1 = pair.h1.energies;
  p.e2 = pair.h2.energies;
  p.overlap = pair.overlap;
  p.truncation_tolerance = truncation_tolerance;
  p.validate();
  return p;
}

BilliardPair billiard_pair(const Context& ctx, const geometry::BilliardShape& shape, geometry::SymmetryClass cls,
                           const geometry::Perturbation& pert, double k_lo, double k_hi, double margin,
                           const billiard::SolverConfig& solver, std::vector<std::string>* keys) {
  require(k_hi > k_lo && margin > 0.0, "billiard pair needs an ordered window and a positive margin");
  BilliardPair bp;
  bp.h1 = solve_cached(ctx, shape, cls, 0.5 * (k_lo + k_hi), 0.5 * (k_hi - k_lo), solver, keys);
  const geometry::BilliardShape moved = geometry::apply_perturbation(shape, pert);
  // Leading Weyl term: k^2 A stays put on average.
  const double f = std::sqrt(shape.area() / moved.area());
  bp.h2 = solve_cached(ctx, moved, cls, 0.5 * f * (k_lo + k_hi), 0.5 * f * (k_hi - k_lo) + margin, solver, keys);
  require(!bp.h1.states.empty() && bp.h2.states.size() >= bp.h1.states.size(), "billiard pair windows too small");

  const json desc = {{"a", store::describe(bp.h1.shape)}, {"b", store::describe(bp.h2.shape)},
                     {"class", geometry::to_string(cls)}, {"ka", bp.h1.wavenumbers()},
                     {"kb", bp.h2.wavenumbers()}};
  if (keys) keys->push_back("overlap/" + store::key_of(store::canonical(desc)));
  std::optional<store::Entry> hit;
  if (ctx.cache) hit = ctx.cache->get("overlap", desc);
  if (hit) {
    bp.overlap = store::overlap_from(*hit);
  } else {
    bp.overlap = billiard::overlap_matrix(bp.h1, bp.h2);
    if (ctx.cache) ctx.cache->put(store::to_entry(bp.overlap, desc));
  }

  auto& sp = bp.spectral;
  for (const auto& s : bp.h1.states) sp.e1.push_back(s.k * s.k);
  for (const auto& s : bp.h2.states) sp.e2.push_back(s.k * s.k);
  sp.overlap = bp.overlap.entries;
  sp.partner = billiard::max_weight_assignment(bp.overlap.entries.cwiseAbs2().transpose());
  sp.validate();
  return bp;
}

LongTimeEcho long_time_echo_check(const spectroscopy::SpectralPair& pair, const spectroscopy::ThermalWeights& w,
                                  double tau_max, int count) {
  require(count >= 20 && tau_max > 0.0, "long-time echo needs a positive range and at least 20 samples");
  LongTimeEcho r;
  r.formula = spectroscopy::long_time_echo(pair, w);
  r.taus.resize(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) r.taus[static_cast<size_t>(i)] = tau_max * i / (count - 1);
  r.p2 = spectroscopy::ensemble_echo(pair, w, r.taus);
  const size_t half = r.p2.size() / 2;
  r.plateau = std::accumulate(r.p2.begin() + static_cast<long>(half), r.p2.end(), 0.0) /
              static_cast<double>(r.p2.size() - half);
  r.t_mix = first_crossing_above(r.taus, r.p2, 0.9 * r.plateau);
  if (!std::isfinite(r.t_mix) || 10.0 * r.t_mix > tau_max) {
    fail(ErrorKind::InvalidParameter, "tau range too short for the averaging interval [t_mix, 10 t_mix]");
  }
  double acc = 0.0;
  int n = 0;
  for (size_t i = 0; i < r.taus.size(); ++i) {
    if (r.taus[i] >= r.t_mix && r.taus[i] <= 10.0 * r.t_mix) {
      acc += r.p2[i];
      ++n;
    }
  }
  require(n >= 10, "too few samples in the averaging interval");
  r.time_average = acc / n;
  return r;
}

RunResult run(const std::string& experiment, const json& config, const Context& ctx) {
  if (experiment == "eigensolve") return run_eigensolve(config, ctx);
  if (experiment == "overlap-scan") return run_overlap_scan(config, ctx);
  if (experiment == "level-tracking") return run_level_tracking(config, ctx);
  if (experiment == "echo-trap") return run_echo_trap(config, ctx);
  if (experiment == "echo-billiard") return run_echo_billiard(config, ctx);
  if (experiment == "dephasing-free") return run_dephasing_free(config, ctx);
  if (experiment == "verify") return run_verify(config);
  fail(ErrorKind::Config, "unknown experiment '" + experiment + "'");
}

void write_outputs(const std::filesystem::path& dir, const std::string& experiment, const json& config,
                   const RunResult& result, double seconds) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorKind::IoFailure, "cannot create " + dir.string() + ": " + ec.message());
  json files = json::array();
  for (const auto& [name, table] : result.tables) {
    write_atomic(dir / name, table.csv());
    files.push_back(name);
  }
  json manifest = {{"experiment", experiment},
                   {"version", kVersion},
                   {"config", config},
                   {"config_hash", config::hash(config)},
                   {"files", files},
                   {"cache_keys", result.cache_keys},
                   {"flags", result.flags},
                   {"wall_seconds", seconds}};
  write_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

}  // namespace qecho::experiments
