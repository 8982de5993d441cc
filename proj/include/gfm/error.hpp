#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gfm {

enum class ErrorCode {
  InvalidArgument,
  NoConvergence,
  UnknownKind,
  NonPositiveHorizon,
  InfeasibleSpec,
  Uncontrollable,
  DegenerateLinearization,
  AlgebraicLoopDivergence,
  NonFinite,
  Unsettled,
  ConfigInvalid,
  IOError,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries one of the codes above so the
// command line tool can report it in machine-readable form.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace gfm
