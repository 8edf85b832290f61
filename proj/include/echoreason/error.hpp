#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>

namespace echoreason {

enum class Errc {
  InvalidScale,
  InvalidArgument,
  ConfigError,
  DuplicateTool,
  NoCycle,
  BadFrame,
  NotMeasurable,
  NotFeasible,
  UnsupportedKind,
  InvalidChunking,
  EmptyCorpus,
  EmptyQuery,
  MetricsError,
  BackendUnavailable,
  SessionError,
  JudgeError,
  AdapterProtocolError,
  ExecutionFailure,
  FormatError,
  IoError,
  NotFound,
};

std::string_view errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail)
      : std::runtime_error(std::string(errc_name(code)) + ": " + detail), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

// Minimal value-or-error carrier for the protocol boundary, where rejections
// are ordinary outcomes rather than exceptional ones.
template <typename T, typename E>
class Expected {
 public:
  Expected(T value) : storage_(std::in_place_index<0>, std::move(value)) {}
  Expected(E error) : storage_(std::in_place_index<1>, std::move(error)) {}

  bool has_value() const noexcept { return storage_.index() == 0; }
  explicit operator bool() const noexcept { return has_value(); }

  T& value() & { return std::get<0>(storage_); }
  const T& value() const& { return std::get<0>(storage_); }
  T&& value() && { return std::get<0>(std::move(storage_)); }
  const E& error() const { return std::get<1>(storage_); }

  T* operator->() { return &value(); }
  const T* operator->() const { return &value(); }

 private:
  std::variant<T, E> storage_;
};

}  // namespace echoreason
