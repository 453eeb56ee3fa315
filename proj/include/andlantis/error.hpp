#pragma once

#include <stdexcept>
#include <string>

namespace andlantis {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A fixture or experiment configuration is missing or malformed.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A caller broke an operation's precondition (programming error).
class ContractViolation : public Error {
public:
    using Error::Error;
};

/// A transfer touched an endpoint that is not a live member.
class TransferError : public Error {
public:
    using Error::Error;
};

/// Extracted content no longer matches what the snapshot recorded.
class IntegrityError : public Error {
public:
    using Error::Error;
};

/// Write attempted on a sealed sandbox log or filesystem.
class SealedError : public Error {
public:
    using Error::Error;
};

/// Replaying an interaction record produced a different outcome.
class ReplayMismatch : public Error {
public:
    ReplayMismatch(std::size_t step, const std::string &expected, const std::string &actual)
        : Error("replay diverged at step " + std::to_string(step) + ": expected " + expected +
                ", got " + actual),
          step_(step) {}

    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

} // namespace andlantis
