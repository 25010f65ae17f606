#include "qecho/config.hpp"

#include <fstream>
#include <sstream>

#include "qecho/error.hpp"
#include "qecho/store.hpp"

namespace qecho::config {

namespace {

json solver_defaults() {
  return {{"basis_factor", 3.0}, {"boundary_points_per_wavelength", 10.0}, {"quality_factor", 1e-8},
          {"completeness_tolerance", 2.0}};
}

json stadium() { return {{"type", "stadium"}, {"r", 1.0}, {"l", 2.0}, {"a", 2.0}, {"b", 1.0}, {"R", 1.0}}; }

json tracking_defaults() {
  return {{"max_bisection_depth", 3}, {"margin", 0.25}, {"min_overlap", 0.5}, {"crossing_gap_fraction", 0.2}};
}

// Gaussian trap 300 quanta deep with a tilt of 5% of the depth across one waist.
json gaussian_trap() {
  return {{"model",
           {{"variant", "gaussian"},
            {"U", 300.0},
            {"w", 34.64101615137755},
            {"kappa", 1.0},
            {"omega", 1.0},
            {"x0", 0.0},
            {"g", 0.4330127018922193},
            {"mass", 1.0}}},
          {"grid", {{"x_min", -62.35382907247959}, {"x_max", 62.35382907247959}, {"n", 1024}}}};
}

json small_gaussian_trap() {
  return {{"model",
           {{"variant", "gaussian"},
            {"U", 60.0},
            {"w", 15.491933384829668},
            {"kappa", 1.0},
            {"omega", 1.0},
            {"x0", 0.0},
            {"g", 0.19364916731037085},
            {"mass", 1.0}}},
          {"grid", {{"x_min", -27.885480092693403}, {"x_max", 27.885480092693403}, {"n", 512}}}};
}

json evanescent_trap() {
  return {{"model",
           {{"variant", "evanescent"},
            {"U", 100.0},
            {"w", 1.0},
            {"kappa", 1.0},
            {"omega", 1.0},
            {"x0", 0.0},
            {"g", 1.0},
            {"mass", 1.0}}},
          {"grid", {{"x_min", -1.0}, {"x_max", 60.0}, {"n", 512}}}};
}

json with_run(json j) {
  j["run"] = {{"threads", 0}, {"out", "out"}, {"cache", ""}};
  return j;
}

const char* type_name(const json& j) {
  if (j.is_number()) return "number";
  return j.type_name();
}

}  // namespace

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names = {"eigensolve",   "overlap-scan",   "level-tracking", "echo-trap",
                                                 "echo-billiard", "dephasing-free", "verify"};
  return names;
}

json defaults(const std::string& experiment) {
  if (experiment == "eigensolve") {
    return with_run({{"shape", stadium()},
                     {"symmetry", "--"},
                     {"k_center", 100.0},
                     {"half_width", 0.5},
                     {"solver", solver_defaults()},
                     {"density", {{"state_k", 100.0}, {"nx", 321}, {"ny", 161}}}});
  }
  if (experiment == "overlap-scan") {
    return with_run({{"shape", stadium()},
                     {"symmetry", "--"},
                     {"family", "stretch"},
                     {"strengths", json::array({0.0, 0.003, 0.006, 0.009, 0.012, 0.015, 0.018, 0.021, 0.024})},
                     {"k_lo", 99.9},
                     {"k_hi", 100.12},
                     {"report_lo", 99.97},
                     {"report_hi", 100.07},
                     {"solver", solver_defaults()},
                     {"tracking", tracking_defaults()}});
  }
  if (experiment == "level-tracking") {
    return with_run({{"shape", stadium()},
                     {"symmetry", "--"},
                     {"family", "stretch"},
                     {"strengths", json::array({0.0, 0.003, 0.006, 0.009, 0.012, 0.015, 0.018, 0.021, 0.024})},
                     {"k_lo", 99.8},
                     {"k_hi", 100.2},
                     {"initial_k", 100.0},
                     {"solver", solver_defaults()},
                     {"tracking", tracking_defaults()}});
  }
  if (experiment == "echo-trap") {
    json j = gaussian_trap();
    j["perturbations"] = json::array({{{"label", "small"}, {"eta", 1e-3}},
                                      {{"label", "medium"}, {"eta", 0.05}},
                                      {{"label", "large"}, {"eta", 0.5}}});
    j["n_states"] = 110;
    j["extra_h2_states"] = 30;
    j["temperature"] = 20.0;
    j["coverage"] = 0.99;
    j["tau"] = {{"max_periods", 3.0}, {"count", 301}};
    j["state_columns"] = json::array({0, 10, 20});
    j["truncation_tolerance"] = 0.01;
    return with_run(j);
  }
  if (experiment == "echo-billiard") {
    return with_run({{"shape", stadium()},
                     {"symmetry", "--"},
                     {"family", "physical"},
                     {"strengths", json::array({0.0005, 0.001})},
                     {"k_lo", 99.0},
                     {"k_hi", 101.0},
                     {"margin", 1.0},
                     {"temperature", 2000.0},
                     {"tau", {{"heisenberg_times", 12.0}, {"count", 2401}}},
                     {"truncation_tolerance", 0.01},
                     {"solver", solver_defaults()}});
  }
  if (experiment == "dephasing-free") {
    return with_run({{"evanescent", evanescent_trap()},
                     {"gaussian", small_gaussian_trap()},
                     {"relative_change", 1e-3},
                     {"n_states", 20},
                     {"thermal_states", 45},
                     {"temperatures", json::array({0.3, 1.0, 2.5})},
                     {"tau", 50.0}});
  }
  if (experiment == "verify") {
    return with_run({{"criteria", json::array()}});
  }
  fail(ErrorKind::Config, "unknown experiment '" + experiment + "'");
}

json merge(const json& base, const json& overlay, const std::string& path) {
  if (base.is_object()) {
    if (!overlay.is_object()) fail(ErrorKind::Config, "config key '" + path + "' must be an object");
    json out = base;
    for (const auto& [key, value] : overlay.items()) {
      const std::string sub = path.empty() ? key : path + "." + key;
      if (!base.contains(key)) fail(ErrorKind::Config, "unknown config key '" + sub + "'");
      out[key] = merge(base[key], value, sub);
    }
    return out;
  }
  const bool ok = (base.is_number() && overlay.is_number()) || base.type() == overlay.type();
  if (!ok) {
    fail(ErrorKind::Config, "config key '" + path + "' expects " + type_name(base) + ", got " + type_name(overlay));
  }
  return overlay;
}

void apply_override(json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) fail(ErrorKind::Config, "override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json patch = value;
  std::vector<std::string> parts;
  std::stringstream ss(key);
  for (std::string part; std::getline(ss, part, '.');) {
    if (part.empty()) fail(ErrorKind::Config, "override key '" + key + "' has an empty segment");
    parts.push_back(part);
  }
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) patch = json{{*it, patch}};
  config = merge(config, patch);
}

json load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::IoFailure, "cannot read config " + path.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) fail(ErrorKind::Config, "config " + path.string() + " is not valid JSON");
  if (!j.is_object()) fail(ErrorKind::Config, "config " + path.string() + " must hold an object");
  return j;
}

json resolve(const std::string& experiment, const json& file, const std::vector<std::string>& overrides) {
  json j = defaults(experiment);
  if (!file.is_null()) {
    json body = file;
    if (body.contains("experiment")) {
      if (body["experiment"] != experiment) {
        fail(ErrorKind::Config, "config is for experiment '" + body["experiment"].dump() + "', not " + experiment);
      }
      body.erase("experiment");
    }
    j = merge(j, body);
  }
  for (const auto& o : overrides) apply_override(j, o);
  return j;
}

std::string hash(const json& config) {
  json body = config;
  // Output location, cache and thread count never change the data.
  body.erase("run");
  return store::key_of(store::canonical(body));
}

}  // namespace qecho::config
