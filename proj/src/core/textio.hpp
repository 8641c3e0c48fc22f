#pragma once

#include <charconv>
#include <string>

#include "core/errors.hpp"

namespace atdkit {

// Shortest round-trip decimal form; artifacts written through this are
// byte-stable across runs.
inline std::string format_double(double v) {
  char buf[40];
  const auto result = std::to_chars(buf, buf + sizeof(buf), v);
  require(result.ec == std::errc(), ErrorCode::Internal,
          "format_double: conversion failed");
  return std::string(buf, result.ptr);
}

}  // namespace atdkit
