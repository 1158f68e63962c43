#pragma once

#include <stdexcept>
#include <string>

namespace pros {

  /// Base of every error raised by the library.
  class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
  };

  /// A caller violated a documented precondition (bad length, bad parameter, ...).
  class InvalidArgument : public Error {
  public:
    using Error::Error;
  };

  /// Reading or writing a file failed, or a file failed validation.
  class IoError : public Error {
  public:
    using Error::Error;
  };

  /// A numerical fit could not be produced (singular design, non-convergence, ...).
  class FitError : public Error {
  public:
    using Error::Error;
  };

  /// A trained model required by a consumer is missing or does not match the request.
  class ModelMismatch : public Error {
  public:
    using Error::Error;
  };

  inline void require(bool condition, const std::string& message) {
    if (!condition) { throw InvalidArgument(message); }
  }

} // namespace pros
