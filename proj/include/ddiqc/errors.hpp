#pragma once

#include <stdexcept>
#include <string>

namespace ddiqc {

// Failure categories carried by every library exception. They map 1:1 onto
// the C API status codes and onto CLI exit codes, so each throw site has to
// pick the category deliberately:
//   Argument   - caller passed inconsistent dimensions, bad flags, bad ranges
//   Io         - file system or parse failures (message names file and line)
//   Premise    - a mathematical precondition of the requested analysis fails
//                (instability, small-gain violation, horizon too short, ...)
//   Degenerate - the supplied data cannot support the analysis (empty
//                restricted subspace, Gram matrix not positive definite, ...)
//   Unbounded  - a bracketing search exceeded its cap; the quantity is
//                unbounded on the data as far as we can tell
//   Numeric    - non-finite values or a decomposition that failed internally
enum class ErrorKind {
    Argument,
    Io,
    Premise,
    Degenerate,
    Unbounded,
    Numeric,
};

class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

  private:
    ErrorKind kind_;
};

[[noreturn]] inline void throw_argument(const std::string& msg) { throw Error(ErrorKind::Argument, msg); }
[[noreturn]] inline void throw_io(const std::string& msg) { throw Error(ErrorKind::Io, msg); }
[[noreturn]] inline void throw_premise(const std::string& msg) { throw Error(ErrorKind::Premise, msg); }
[[noreturn]] inline void throw_degenerate(const std::string& msg) { throw Error(ErrorKind::Degenerate, msg); }
[[noreturn]] inline void throw_unbounded(const std::string& msg) { throw Error(ErrorKind::Unbounded, msg); }
[[noreturn]] inline void throw_numeric(const std::string& msg) { throw Error(ErrorKind::Numeric, msg); }

}  // namespace ddiqc
