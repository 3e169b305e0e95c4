#pragma once

#include <stdexcept>
#include <string>

namespace ymh {

/// Failure classes. The integer value doubles as the CLI exit code.
enum class ErrorCategory : int {
  config = 2,
  oracle = 3,
  state = 4,
  io = 5,
  domain = 6,
  input = 7,
  precondition = 8,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}
  ErrorCategory category() const noexcept { return category_; }
  int exit_code() const noexcept { return static_cast<int>(category_); }

 private:
  ErrorCategory category_;
};

#define YMH_DEFINE_ERROR(Name, cat)                                  \
  class Name : public Error {                                        \
   public:                                                           \
    explicit Name(const std::string& what) : Error(cat, what) {}     \
  };

YMH_DEFINE_ERROR(ConfigError, ErrorCategory::config)
YMH_DEFINE_ERROR(OracleUnsupported, ErrorCategory::oracle)
YMH_DEFINE_ERROR(StateError, ErrorCategory::state)
YMH_DEFINE_ERROR(IoError, ErrorCategory::io)
YMH_DEFINE_ERROR(DomainError, ErrorCategory::domain)
YMH_DEFINE_ERROR(InputError, ErrorCategory::input)
YMH_DEFINE_ERROR(PreconditionError, ErrorCategory::precondition)

#undef YMH_DEFINE_ERROR

}  // namespace ymh
