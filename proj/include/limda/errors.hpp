#pragma once

#include <stdexcept>
#include <string>

namespace limda {

/// Bad dimensions, out-of-range parameters, inconsistent configuration.
struct InvalidInput : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// A region or index request that does not fit inside its parent grid.
struct OutOfBounds : InvalidInput {
    using InvalidInput::InvalidInput;
};

/// Raised by rho_full_rank when the Gramian has a (numerically) zero eigenvalue.
struct SingularGramian : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SolverFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A simulated state became non-finite. `index` is the perturbed state index
/// (-1 for the unperturbed run), `step` the time index at which it happened.
struct TrajectoryBlowup : std::runtime_error {
    TrajectoryBlowup(const std::string& what, long index, int step)
        : std::runtime_error(what), index(index), step(step) {}
    long index;
    int step;
};

/// Shallow-water depth reached zero or below.
struct DryState : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// CFL number >= 1.
struct StabilityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Truncated, tampered or checksum-mismatched file (datasets, models, trajectories).
struct CorruptData : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DivergenceError : std::runtime_error {
    DivergenceError(const std::string& what, int epoch) : std::runtime_error(what), epoch(epoch) {}
    int epoch;
};

}  // namespace limda
