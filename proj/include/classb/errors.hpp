#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace classb {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class ParseError : public Error {
  public:
    ParseError(const std::string& what, std::size_t offset, std::vector<std::string> expected)
        : Error(what), offset_(offset), expected_(std::move(expected)) {}

    std::size_t offset() const noexcept { return offset_; }
    const std::vector<std::string>& expected() const noexcept { return expected_; }

  private:
    std::size_t offset_;
    std::vector<std::string> expected_;
};

/// Evaluation failed: an unbound variable or an out-of-domain operation.
class EvalError : public Error {
  public:
    enum class Kind { unbound_variable, domain };

    EvalError(Kind kind, const std::string& what, std::string subtree)
        : Error(what), kind_(kind), subtree_(std::move(subtree)) {}

    Kind kind() const noexcept { return kind_; }
    /// Printed form of the offending subexpression (possibly truncated).
    const std::string& subtree() const noexcept { return subtree_; }

  private:
    Kind kind_;
    std::string subtree_;
};

/// Bad caller input: unknown names, parameters out of range, shape mismatch.
class ArgumentError : public Error {
  public:
    using Error::Error;
};

/// A numerical procedure could not deliver: singular matrices, failed bracketing,
/// points leaving the domain, sampler caps.
class NumericalError : public Error {
  public:
    using Error::Error;
};

}  // namespace classb
