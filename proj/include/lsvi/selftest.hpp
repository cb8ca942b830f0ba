#pragma once

#include <ostream>

namespace lsvi {

/// Deterministic invariant suite on tiny instances: regression equivalence,
/// incremental-vs-rebuilt weights, switch bound, weight-norm bounds,
/// monotonicity and ordering of the value estimates. Prints one line per check
/// and returns the number of failed checks.
int run_selftest(std::ostream& log);

}  // namespace lsvi
