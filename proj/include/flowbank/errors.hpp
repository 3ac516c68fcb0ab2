#pragma once

#include <stdexcept>
#include <string>

namespace flowbank {

/// A numerical procedure could not continue: failed factorization after
/// jitter escalation, non-finite intermediate, or a singular flow step.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// Every importance weight in a set underflowed to zero.
class DegenerateWeightsError : public NumericalError {
public:
    explicit DegenerateWeightsError(const std::string& what) : NumericalError(what) {}
};

}  // namespace flowbank
