// Runs acceptance criteria and prints one line per criterion.
// Usage: acceptance [id ...]; no ids runs all. Exit status is the number of failures.

#include <cstdio>
#include <cstdlib>
#include <string>

#include "qecho/acceptance.hpp"

int main(int argc, char** argv) {
  std::vector<int> ids;
  for (int i = 1; i < argc; ++i) ids.push_back(std::atoi(argv[i]));
  if (ids.empty()) {
    for (const auto& c : qecho::acceptance::criteria()) ids.push_back(c.id);
  }
  int failures = 0;
  for (int id : ids) {
    const auto r = qecho::acceptance::run_criterion(id);
    std::printf("[%s] AC%d %s (%.1f s): %s\n", r.pass ? "PASS" : "FAIL", r.id, r.name.c_str(), r.seconds,
                r.detail.c_str());
    std::fflush(stdout);
    if (!r.pass) ++failures;
  }
  return failures;
}
