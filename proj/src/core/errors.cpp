#include "core/errors.hpp"

namespace atdkit {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument:
      return "invalid-argument";
    case ErrorCode::Config:
      return "config";
    case ErrorCode::Io:
      return "io";
    case ErrorCode::Numeric:
      return "numeric";
    case ErrorCode::Contract:
      return "contract";
    case ErrorCode::Internal:
      return "internal";
  }
  return "unknown";
}

}  // namespace atdkit
