#pragma once

#include <stdexcept>
#include <string>

namespace bpp {

// Gram-Schmidt input vectors were numerically dependent (residual norm below
// the degeneracy threshold). Callers in the RL path perturb and retry once.
class DegenerateBasisError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Rejection sampling exhausted its batch cap without an accepted proposal.
// Should never fire with a valid envelope bound.
class SamplingFailedError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// An approximator fit finished its epoch budget above tolerance.
class FitFailedError : public std::runtime_error {
public:
    FitFailedError(const std::string& what, double achieved, double required)
        : std::runtime_error(what), achieved_error(achieved), required_error(required) {}
    double achieved_error;
    double required_error;
};

// A gradient tape was used for more than one backward pass.
class StaleTapeError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// A PPO update produced a non-finite loss.
class UpdateAbortedError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace bpp
