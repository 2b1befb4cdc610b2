#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace fdp {

struct NoSolutionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DegenerateDesignError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidSmileError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InfeasiblePricesError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DivisionDegenerateError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SingularSystemError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InfeasibleAtFloorError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct WeightCollapseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MalformedRowError : std::runtime_error {
    MalformedRowError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_number(line) {}
    std::size_t line_number;
};

}  // namespace fdp
