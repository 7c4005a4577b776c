#pragma once

#include <stdexcept>
#include <string>

namespace nnc {

// Base of every error the library throws. `exit_code()` is what the CLI
// returns for it: 1 for bad input, 2 for infeasible problems.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual int exit_code() const noexcept { return 1; }
};

// Wrong sequence length (k-mer of the wrong size, too few bases, ...).
class LengthError : public Error {
public:
    using Error::Error;
};

// Malformed pore-model table or dataset line.
class FormatError : public Error {
public:
    FormatError(const std::string& what, std::size_t line)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
    explicit FormatError(const std::string& what) : Error(what), line_(0) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// Argument outside the domain of an operation (duration < 1, broken state path, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

// Non-finite or otherwise unusable numeric input.
class InputError : public Error {
public:
    using Error::Error;
};

// No segmentation / alignment / path exists for the given lengths.
class InfeasibleError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 2; }
};

// A brute-force oracle was asked to enumerate more than its size guard allows.
class CapacityError : public Error {
public:
    using Error::Error;
};

}  // namespace nnc
