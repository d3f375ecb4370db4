#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace afp {

/// Machine-readable failure classes. The CLI maps each to a distinct exit code.
enum class ErrorCategory {
  schema,
  empty_dataset,
  stratification,
  config,
  training,
  input,
  calibration,
  precondition,
  io,
};

std::string_view to_string(ErrorCategory category) noexcept;

/// Process exit code for a category (always nonzero).
int exit_code(ErrorCategory category) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

}  // namespace afp
