#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pidcov {

// Root of every error this library throws. Indices carried in messages are
// 1-based; indices carried in fields are 0-based.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DesignError : public Error {
public:
    using Error::Error;
};

class PartitionError : public DesignError {
public:
    using DesignError::DesignError;
};

class UnobservedVariableError : public DesignError {
public:
    UnobservedVariableError(std::size_t variable, const std::string& what)
        : DesignError(what), variable_(variable) {}
    std::size_t variable() const noexcept { return variable_; }

private:
    std::size_t variable_;
};

class IndexError : public Error {
public:
    using Error::Error;
};

class ConsistencyError : public Error {
public:
    using Error::Error;
};

class NotPSDError : public Error {
public:
    NotPSDError(double min_eigenvalue, const std::string& what)
        : Error(what), min_eigenvalue_(min_eigenvalue) {}
    double min_eigenvalue() const noexcept { return min_eigenvalue_; }

private:
    double min_eigenvalue_;
};

class NotSymmetricError : public Error {
public:
    using Error::Error;
};

class SingularBlockError : public Error {
public:
    SingularBlockError(std::ptrdiff_t block, const std::string& what)
        : Error(what), block_(block) {}
    // -1 when the matrix is not tied to a design block.
    std::ptrdiff_t block() const noexcept { return block_; }

private:
    std::ptrdiff_t block_;
};

class EmDivergenceError : public Error {
public:
    using Error::Error;
};

class InfeasibleCompletionError : public Error {
public:
    using Error::Error;
};

class StepUnderflowError : public Error {
public:
    using Error::Error;
};

class MaxInnerIterError : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class NoFeasiblePointError : public Error {
public:
    using Error::Error;
};

class BoundaryError : public Error {
public:
    using Error::Error;
};

class SpecInfeasibleError : public Error {
public:
    using Error::Error;
};

class DesignInfeasibleError : public Error {
public:
    using Error::Error;
};

class MissingArtifactError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

} // namespace pidcov
