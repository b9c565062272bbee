#pragma once

#include <stdexcept>
#include <string>

namespace sbranch {

// Invalid inputs to an operation (preconditions, malformed values).
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A requested computation would exceed a configured size limit.
class CapacityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Violation of an internal calling contract (programming error, not input).
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

}  // namespace sbranch
