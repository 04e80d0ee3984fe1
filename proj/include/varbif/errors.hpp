#pragma once

#include <stdexcept>
#include <string>

namespace varbif {

/// A symmetric pencil whose right-hand matrix failed to factor as positive definite.
class PencilError : public std::runtime_error {
public:
    PencilError(const std::string& what, int pivot)
        : std::runtime_error(what), pivot_(pivot) {}

    /// Zero-based row (in the caller's numbering) where factorization broke down, or -1.
    int pivot() const { return pivot_; }

private:
    int pivot_;
};

/// The state u = 0 is not a critical point where one is required.
class TrivialBranchError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A Lagrangian or constraint model failed a structural check at construction.
class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An operation was called on data that does not satisfy its precondition.
class PreconditionError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

}  // namespace varbif
