#include "afp/error.hpp"

namespace afp {

std::string_view to_string(ErrorCategory category) noexcept {
  switch (category) {
    case ErrorCategory::schema: return "schema";
    case ErrorCategory::empty_dataset: return "empty_dataset";
    case ErrorCategory::stratification: return "stratification";
    case ErrorCategory::config: return "config";
    case ErrorCategory::training: return "training";
    case ErrorCategory::input: return "input";
    case ErrorCategory::calibration: return "calibration";
    case ErrorCategory::precondition: return "precondition";
    case ErrorCategory::io: return "io";
  }
  return "unknown";
}

int exit_code(ErrorCategory category) noexcept {
  return 10 + static_cast<int>(category);
}

}  // namespace afp
