#pragma once

#include <stdexcept>
#include <string>

namespace rankmatch {

// Malformed data: bad dimensions, non-finite values, unreadable files.
struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A structurally impossible request: M larger than a treatment group,
// invalid basis parameters, non-PD copula matrix, and the like.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Evaluation point outside the basis domain [0,1]^d.
struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Least-squares design with no usable directions (all basis functions
// vanish on the data).
struct DegenerateFitError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace rankmatch
