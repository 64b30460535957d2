#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace ants {

/// Base class for every error raised by the engine.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Malformed file header or layout.
class FormatError : public Error {
  public:
    using Error::Error;
};

/// Well-formed input whose values violate a data invariant (NaN, zero rows, id mismatch).
class DataError : public Error {
  public:
    using Error::Error;
};

/// Vector or matrix dimensions disagree.
class DimError : public Error {
  public:
    using Error::Error;
};

/// Invalid configuration value.
class ConfigError : public Error {
  public:
    using Error::Error;
};

/// Caller-supplied arguments violate an operation's precondition.
class InputError : public Error {
  public:
    using Error::Error;
};

/// Filesystem failure, always carries the offending path in the message.
class IoError : public Error {
  public:
    using Error::Error;
};

/// Transport-level failure of a generation client after its own retries.
class ClientError : public Error {
  public:
    using Error::Error;
};

/// Negative-space generation failed; carries the id of the image (or class) being processed.
class GenerationError : public Error {
  public:
    GenerationError(std::string subject_id, const std::string& what)
        : Error(what), subject_id_(std::move(subject_id)) {}

    [[nodiscard]] const std::string& subject_id() const noexcept { return subject_id_; }

  private:
    std::string subject_id_;
};

} // namespace ants
