#pragma once

#include <stdexcept>
#include <string>

namespace mlpert {

enum class Errc {
  invalid_level,
  ordering,
  duplicate_level,
  shape,
  not_psd,
  singular,
  insufficient_samples,
  invalid_argument,
  parse,
  io,
};

/// Broad failure class; the CLI maps these onto its exit codes.
enum class ErrorClass { validation, io, numerical };

constexpr ErrorClass error_class(Errc code) {
  switch (code) {
    case Errc::io:
      return ErrorClass::io;
    case Errc::not_psd:
    case Errc::singular:
      return ErrorClass::numerical;
    default:
      return ErrorClass::validation;
  }
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }
  ErrorClass error_class() const noexcept { return mlpert::error_class(code_); }

 private:
  Errc code_;
};

}  // namespace mlpert
