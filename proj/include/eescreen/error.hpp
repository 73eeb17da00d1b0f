#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace eescreen {

// Failure categories. The CLI maps these onto its exit-code contract.
enum class ErrorKind {
    malformed_file,
    dimension_overflow,
    constant_column,
    negative_time,
    non_binary_event,
    all_censored,
    nonpositive_time,
    unsupported_model,
    invalid_argument,
    degenerate_outcome,
    out_of_range,
    empty_grid,
    no_cases,
    no_controls,
    no_comparable_pairs,
    layout_infeasible,
    non_bracketing,
    invalid_config,
    io,
};

inline std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::malformed_file: return "malformed-file";
        case ErrorKind::dimension_overflow: return "dimension-overflow";
        case ErrorKind::constant_column: return "constant-column";
        case ErrorKind::negative_time: return "negative-time";
        case ErrorKind::non_binary_event: return "non-binary-event";
        case ErrorKind::all_censored: return "all-censored";
        case ErrorKind::nonpositive_time: return "nonpositive-time";
        case ErrorKind::unsupported_model: return "unsupported-model";
        case ErrorKind::invalid_argument: return "invalid-argument";
        case ErrorKind::degenerate_outcome: return "degenerate-outcome";
        case ErrorKind::out_of_range: return "out-of-range";
        case ErrorKind::empty_grid: return "empty-grid";
        case ErrorKind::no_cases: return "no-cases";
        case ErrorKind::no_controls: return "no-controls";
        case ErrorKind::no_comparable_pairs: return "no-comparable-pairs";
        case ErrorKind::layout_infeasible: return "layout-infeasible";
        case ErrorKind::non_bracketing: return "non-bracketing";
        case ErrorKind::invalid_config: return "invalid-config";
        case ErrorKind::io: return "io";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
    throw Error(kind, what);
}

}  // namespace eescreen
