#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qmaxent {

enum class ErrorKind {
  invalid_input,
  domain,
  infeasible,
  boundary,
  non_convergence,
  precondition,
  unsupported,
  inconsistent,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_input: return "invalid-input";
    case ErrorKind::domain: return "domain";
    case ErrorKind::infeasible: return "infeasible";
    case ErrorKind::boundary: return "boundary-or-infeasible";
    case ErrorKind::non_convergence: return "non-convergence";
    case ErrorKind::precondition: return "precondition";
    case ErrorKind::unsupported: return "unsupported";
    case ErrorKind::inconsistent: return "inconsistent-input";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool condition, ErrorKind kind, const std::string& what) {
  if (!condition) fail(kind, what);
}

}  // namespace qmaxent
