#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace atdkit {

enum class ErrorCode {
  InvalidArgument,
  Config,
  Io,
  Numeric,
  Contract,
  Internal,
};

const char* error_code_name(ErrorCode code);

// Single exception type for the whole core. The C layer maps `code` onto the
// public status enum; everything else sees the message.
class Error : public std::runtime_error {
public:
  Error(ErrorCode code, std::string message)
      : std::runtime_error(std::move(message)), code_(code) {}

  ErrorCode code() const { return code_; }

private:
  ErrorCode code_;
};

namespace detail {
inline void concat_into(std::ostringstream&) {}

template <typename T, typename... Rest>
void concat_into(std::ostringstream& os, const T& head, const Rest&... rest) {
  os << head;
  concat_into(os, rest...);
}

template <typename... Parts>
std::string concat(const Parts&... parts) {
  std::ostringstream os;
  concat_into(os, parts...);
  return os.str();
}
}  // namespace detail

template <typename... Parts>
[[noreturn]] void raise(ErrorCode code, const Parts&... parts) {
  throw Error(code, detail::concat(parts...));
}

template <typename... Parts>
void require(bool ok, ErrorCode code, const Parts&... parts) {
  if (!ok) raise(code, parts...);
}

}  // namespace atdkit
