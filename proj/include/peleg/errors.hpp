#pragma once

#include <stdexcept>
#include <string>

namespace peleg {

struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct SingularMatrixError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DegenerateInstanceError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// No pair admits a feasible alternative inside the ball.
struct InfeasibleError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace peleg
