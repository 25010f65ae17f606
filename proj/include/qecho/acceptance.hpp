#pragma once

// Acceptance suite: one pass/fail result per criterion, tolerances fixed.

#include <string>
#include <vector>

namespace qecho::acceptance {

struct Criterion {
  int id = 0;
  std::string name;
};

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

const std::vector<Criterion>& criteria();

// Errors inside a criterion are reported as a failure with the message as detail.
CriterionResult run_criterion(int id);

}  // namespace qecho::acceptance
