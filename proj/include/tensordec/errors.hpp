#ifndef TENSORDEC_ERRORS_HPP
#define TENSORDEC_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tensordec {

/// Inconsistent shapes, lengths or mode groupings.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// An input violates the mathematical precondition of an operation
/// (rank larger than a mode, rank-deficient whitening matrix, infeasible experiment).
class PreconditionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical procedure hit a degenerate configuration it could not recover from
/// (unpaired eigenvalues after all retries, vanishing power iterates, ...).
class DegeneracyError : public std::runtime_error {
public:
    DegeneracyError(const std::string& what, std::string diagnostics = {})
        : std::runtime_error(what), diagnostics_(std::move(diagnostics)) {}

    const std::string& diagnostics() const noexcept { return diagnostics_; }

private:
    std::string diagnostics_;
};

/// Malformed TNSR/JSON input.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The pivot construction ran out of subspace before producing every vector.
class PivotError : public std::runtime_error {
public:
    PivotError(const std::string& what, std::size_t achieved)
        : std::runtime_error(what), achieved_(achieved) {}

    std::size_t achieved() const noexcept { return achieved_; }

private:
    std::size_t achieved_;
};

}  // namespace tensordec

#endif  // TENSORDEC_ERRORS_HPP
