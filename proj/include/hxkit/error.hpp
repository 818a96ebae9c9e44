#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hxkit {

enum class Errc {
  MissingKey,
  MalformedList,
  ListLength,
  UnknownDataType,
  Unsupported,
  InvalidHeader,
  Truncated,
  OutOfRange,
  InvalidArgument,
  ZeroScale,
  DegenerateVariance,
  EmptySupport,
  NonPositiveInput,
  NoBandNear,
  RankDeficient,
  InsufficientData,
  ZeroNorm,
  Io,
};

std::string_view errc_name(Errc code) noexcept;

/// Data error raised by every library operation. The CLI maps it to exit code 2.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

/// Non-fatal conditions collected by operations that accept an optional sink.
using Warnings = std::vector<std::string>;

inline void warn(Warnings* sink, std::string message) {
  if (sink) sink->push_back(std::move(message));
}

}  // namespace hxkit
