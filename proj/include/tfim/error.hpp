#pragma once

#include <stdexcept>
#include <string>

namespace tfim {

enum class ErrorCategory {
  invalid_size,
  schedule,
  domain,
  memory_guard,
  propagation,
  bp_convergence,
  gate,
  resource,
  comparison,
  undefined_reference,
  incomplete_data,
  incomparable_curves,
  config,
  parse,
  io,
};

inline const char* category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::invalid_size: return "invalid-size";
    case ErrorCategory::schedule: return "schedule";
    case ErrorCategory::domain: return "domain";
    case ErrorCategory::memory_guard: return "memory-guard";
    case ErrorCategory::propagation: return "propagation";
    case ErrorCategory::bp_convergence: return "bp-convergence";
    case ErrorCategory::gate: return "gate";
    case ErrorCategory::resource: return "resource";
    case ErrorCategory::comparison: return "comparison";
    case ErrorCategory::undefined_reference: return "undefined-reference";
    case ErrorCategory::incomplete_data: return "incomplete-data";
    case ErrorCategory::incomparable_curves: return "incomparable-curves";
    case ErrorCategory::config: return "config";
    case ErrorCategory::parse: return "parse";
    case ErrorCategory::io: return "io";
  }
  return "unknown";
}

// Process exit code for a category; 0 is reserved for success.
inline int exit_code(ErrorCategory c) { return 10 + static_cast<int>(c); }

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

}  // namespace tfim
