#pragma once

#include <cstddef>
#include <exception>
#include <vector>

namespace qecho {

// OpenMP loop with static scheduling. Exceptions are collected per index and the
// one from the lowest index is rethrown, so failures do not depend on timing.
template <class F>
void parallel_for(std::size_t n, F&& body) {
  std::vector<std::exception_ptr> errors(n);
  const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace qecho
