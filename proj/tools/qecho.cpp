// Command-line front end: one subcommand per experiment.
//
// Exit codes: 0 success, 1 outputs written but a completeness or truncation
// flag fired, 2 usage error, 10 + n for library errors of kind n (see
// qecho::ErrorKind, in declaration order).

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "qecho/config.hpp"
#include "qecho/error.hpp"
#include "qecho/experiments.hpp"

namespace {

struct Options {
  std::string config;
  std::string out;
  std::string cache;
  int threads = 0;
  std::vector<std::string> sets;
};

int run(const std::string& experiment, const Options& opt) {
  using qecho::config::json;
  json file;
  if (!opt.config.empty()) file = qecho::config::load_file(opt.config);
  json cfg = qecho::config::resolve(experiment, file, opt.sets);
  if (!opt.out.empty()) cfg["run"]["out"] = opt.out;
  if (!opt.cache.empty()) cfg["run"]["cache"] = opt.cache;
  if (opt.threads > 0) cfg["run"]["threads"] = opt.threads;

  const int threads = cfg["run"]["threads"].get<int>();
  if (threads > 0) omp_set_num_threads(threads);
  const std::string cache_dir = cfg["run"]["cache"].get<std::string>();
  std::optional<qecho::store::Cache> cache;
  qecho::experiments::Context ctx;
  if (!cache_dir.empty()) {
    cache.emplace(cache_dir);
    ctx.cache = &*cache;
  }

  const auto t0 = std::chrono::steady_clock::now();
  const auto result = qecho::experiments::run(experiment, cfg, ctx);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const std::string out = cfg["run"]["out"].get<std::string>();
  qecho::experiments::write_outputs(out, experiment, cfg, result, seconds);

  for (const auto& [name, table] : result.tables) std::printf("wrote %s/%s\n", out.c_str(), name.c_str());
  for (const auto& f : result.flags) std::fprintf(stderr, "flag: %s\n", f.c_str());
  return result.flags.empty() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Echo spectroscopy experiments: billiard eigenstates, overlaps and trapped-atom echo signals"};
  app.require_subcommand(1);
  Options opt;
  std::string chosen;
  for (const auto& name : qecho::config::experiment_names()) {
    auto* sub = app.add_subcommand(name, "run the " + name + " experiment");
    sub->add_option("--config", opt.config, "JSON config file");
    sub->add_option("--out", opt.out, "output directory");
    sub->add_option("--cache", opt.cache, "cache directory");
    sub->add_option("--threads", opt.threads, "worker threads (0 = runtime default)")->check(CLI::NonNegativeNumber);
    sub->add_option("--set", opt.sets, "override a config key, e.g. --set tau.count=101")->take_all();
    sub->callback([&chosen, name] { chosen = name; });
  }
  app.add_subcommand("defaults", "print the default config of an experiment")
      ->add_option("experiment", chosen, "experiment name")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand("defaults")) {
      std::cout << qecho::config::defaults(chosen).dump(2) << "\n";
      return 0;
    }
    return run(chosen, opt);
  } catch (const qecho::Error& e) {
    std::fprintf(stderr, "error (%s): %s\n", std::string(qecho::to_string(e.kind())).c_str(), e.what());
    if (e.kind() == qecho::ErrorKind::Config) return 2;
    return 10 + static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}
