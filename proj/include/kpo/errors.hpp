#pragma once

#include <stdexcept>
#include <string>

namespace kpo {

// A requested state does not fit faithfully below the Fock cutoff.
struct TruncationTooSmall : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Operands live on incompatible Hilbert-space dimensions.
struct DimensionMismatch : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// A runtime sanity bound (trace, Hermiticity, positivity) drifted out of band.
// Carries the evolution time at which the check tripped.
struct InvariantViolation : std::runtime_error {
    double time_us;
    InvariantViolation(const std::string& what, double t_us)
        : std::runtime_error(what + " (t = " + std::to_string(t_us) + " us)"),
          time_us(t_us) {}
};

// Eigenbranch tracking lost its branch: best overlap fell below threshold
// even after grid refinement.
struct BranchAmbiguous : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A trajectory does not hold state snapshots across the requested window.
struct WindowNotCovered : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Config file rejected; line is 1-based, 0 when no single line is at fault.
struct ConfigError : std::runtime_error {
    int line;
    ConfigError(const std::string& what, int line_no = 0)
        : std::runtime_error(line_no > 0 ? "line " + std::to_string(line_no) + ": " + what
                                         : what),
          line(line_no) {}
};

}  // namespace kpo
