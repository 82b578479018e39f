#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lmloc {

enum class ErrorCategory {
  usage,   // bad arguments or configuration
  format,  // malformed file contents
  data,    // well-formed input that violates a precondition
  io,      // file system failures
};

std::string_view to_string(ErrorCategory category);

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

[[noreturn]] inline void fail(ErrorCategory category, const std::string& message) {
  throw Error(category, message);
}

}  // namespace lmloc
