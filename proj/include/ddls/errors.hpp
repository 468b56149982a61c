#pragma once

#include <stdexcept>
#include <string>

namespace ddls {

/// Inputs that cannot describe a valid model (mismatched sizes, bad codebook, ...).
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Ledger updates supplied out of epoch order.
struct OrderingError : std::logic_error {
    using std::logic_error::logic_error;
};

/// A departure request that would make d_q(l) exceed a_q(l).
struct FeasibilityError : std::logic_error {
    using std::logic_error::logic_error;
};

/// The optimizer could not produce a schedule.
struct SolverError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace ddls
