#pragma once

#include <stdexcept>
#include <string>

namespace stabledmd {

// Failure categories; the CLI maps each to a distinct exit code.

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct FitError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SearchError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct AlignmentError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Thrown by rollouts when a state entry leaves the representable envelope.
// Carries the first step index at which the blow-up was detected.
struct DivergenceError : std::runtime_error {
    DivergenceError(const std::string& what, int step_index)
        : std::runtime_error(what), step(step_index) {}
    int step;
};

}  // namespace stabledmd
