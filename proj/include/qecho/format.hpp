#pragma once

#include <string>

namespace qecho {

// Shortest decimal text that round-trips to the same double ("1", "0.1",
// "1.000000000001"). Used for cache keys and CSV output.
std::string format_exact(double v);

// Fixed-count significant digits for human-facing CSV columns.
std::string format_sig(double v, int digits = 17);

}  // namespace qecho
