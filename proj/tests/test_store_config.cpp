#include <cstring>
#include <functional>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "doctest.h"
#include "qecho/config.hpp"
#include "qecho/error.hpp"
#include "qecho/format.hpp"
#include "qecho/store.hpp"
#include "qecho/trap1d.hpp"

using namespace qecho;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct TempDir {
  fs::path path = fs::temp_directory_path() / ("qecho-test-" + std::to_string(::getpid()));
  TempDir() { fs::remove_all(path); }
  ~TempDir() { fs::remove_all(path); }
};

store::Entry sample_entry() {
  store::Entry e;
  e.kind = "sample";
  e.descriptor = store::canonical({{"r", 1.0}, {"l", 2.0}, {"type", "stadium"}});
  e.arrays["k"] = {99.5, 100.25, -0.0, 1e-300, 3.141592653589793};
  e.arrays["empty"] = {};
  e.labels["class"] = "--";
  return e;
}

int kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return static_cast<int>(e.kind());
  }
  return -1;
}

}  // namespace

TEST_CASE("cache round trip is byte exact") {
  TempDir dir;
  const store::Cache cache(dir.path);
  const auto e = sample_entry();
  const std::string key = cache.put(e);
  const auto got = cache.get("sample", key);
  REQUIRE(got.has_value());
  CHECK(*got == e);
  CHECK(store::encode(*got) == store::encode(e));
  CHECK_FALSE(cache.get("sample", std::string("0000000000000000")).has_value());
}

TEST_CASE("1D spectrum survives the cache") {
  const trap1d::Grid1D grid{-10, 10, 256};
  trap1d::Trap1DModel m;
  m.variant = trap1d::Variant::Harmonic;
  const auto sp = trap1d::eigensolve(m.sample(grid), grid, 6);
  const auto back = store::spectrum_from(store::decode(store::encode(store::to_entry(sp, {{"x", 1}}))));
  CHECK(back.energies == sp.energies);
  CHECK(back.states == sp.states);
  CHECK(back.potential == sp.potential);
}

TEST_CASE("keys follow the exact decimal text") {
  const json a = {{"r", 1.0}};
  const json b = {{"r", 1.0 + 1e-12}};
  CHECK(store::key_of(store::canonical(a)) != store::key_of(store::canonical(b)));
  // Key order does not matter.
  CHECK(store::canonical({{"a", 1}, {"b", 2}}) == store::canonical({{"b", 2}, {"a", 1}}));
  CHECK(store::key_of("x").size() == 16);
  // FNV-1a 64 reference values.
  CHECK(store::fnv1a("", 0) == 0xcbf29ce484222325ULL);
  CHECK(store::fnv1a("a", 1) == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("damaged entries are refused") {
  const auto bytes = store::encode(sample_entry());
  SUBCASE("truncated") {
    for (size_t cut : {size_t{0}, size_t{5}, bytes.size() / 2, bytes.size() - 1}) {
      const std::vector<char> t(bytes.begin(), bytes.begin() + static_cast<long>(cut));
      CHECK(kind_of([&] { store::decode(t); }) == static_cast<int>(ErrorKind::CorruptEntry));
    }
  }
  SUBCASE("flipped payload byte") {
    auto t = bytes;
    t[t.size() / 2] ^= 0x10;
    CHECK(kind_of([&] { store::decode(t); }) == static_cast<int>(ErrorKind::CorruptEntry));
  }
  SUBCASE("other format version") {
    auto t = bytes;
    const std::uint32_t v = store::kFormatVersion + 1;
    std::memcpy(t.data() + 8, &v, 4);
    CHECK(kind_of([&] { store::decode(t); }) == static_cast<int>(ErrorKind::VersionMismatch));
  }
  SUBCASE("truncated file in the cache") {
    TempDir dir;
    const store::Cache cache(dir.path);
    const std::string key = cache.put(sample_entry());
    fs::resize_file(cache.path_of("sample", key), bytes.size() - 3);
    CHECK(kind_of([&] { cache.get("sample", key); }) == static_cast<int>(ErrorKind::CorruptEntry));
  }
}

TEST_CASE("exact number formatting") {
  CHECK(format_exact(1.0) == "1");
  CHECK(format_exact(0.1) == "0.1");
  for (double v : {1.0 / 3.0, 1e-300, 123456.789, -2.5e17}) CHECK(std::stod(format_exact(v)) == v);
}

TEST_CASE("config defaults exist for every experiment") {
  for (const auto& name : config::experiment_names()) {
    const json d = config::defaults(name);
    CHECK(d.contains("run"));
  }
  CHECK_THROWS_AS(config::defaults("nope"), Error);
}

TEST_CASE("config merge and overrides") {
  json c = config::defaults("eigensolve");
  config::apply_override(c, "k_center=80.5");
  CHECK(c["k_center"] == 80.5);
  config::apply_override(c, "shape.l=3");
  CHECK(c["shape"]["l"] == 3);
  config::apply_override(c, "symmetry=+-");
  CHECK(c["symmetry"] == "+-");

  CHECK(kind_of([&] { config::apply_override(c, "k_centre=80"); }) == static_cast<int>(ErrorKind::Config));
  CHECK(kind_of([&] { config::apply_override(c, "shape.l=\"long\""); }) == static_cast<int>(ErrorKind::Config));
  CHECK(kind_of([&] { config::apply_override(c, "novalue"); }) == static_cast<int>(ErrorKind::Config));
  CHECK(kind_of([&] { config::resolve("eigensolve", {{"density", {{"depth", 2}}}}, {}); }) ==
        static_cast<int>(ErrorKind::Config));

  json t = config::defaults("echo-trap");
  config::apply_override(t, "state_columns=[1,2,3,4]");
  CHECK(t["state_columns"].size() == 4);
}

TEST_CASE("run settings do not change the config hash") {
  const json a = config::resolve("echo-trap", nullptr, {});
  const json b = config::resolve("echo-trap", nullptr, {"run.threads=4", "run.out=\"elsewhere\""});
  const json c = config::resolve("echo-trap", nullptr, {"temperature=21"});
  CHECK(config::hash(a) == config::hash(b));
  CHECK(config::hash(a) != config::hash(c));
}

TEST_CASE("config file must match the experiment") {
  TempDir dir;
  fs::create_directories(dir.path);
  const fs::path p = dir.path / "cfg.json";
  std::ofstream(p) << R"({"experiment": "echo-trap", "temperature": 5})";
  const json f = config::load_file(p);
  CHECK(config::resolve("echo-trap", f, {})["temperature"] == 5);
  CHECK(kind_of([&] { config::resolve("eigensolve", f, {}); }) == static_cast<int>(ErrorKind::Config));
  std::ofstream(p) << "{not json";
  CHECK(kind_of([&] { config::load_file(p); }) == static_cast<int>(ErrorKind::Config));
}
