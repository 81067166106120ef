#pragma once

#include <stdexcept>
#include <string>

namespace qivc {

// Library-wide error with a coarse category so the CLI can map failures to
// exit codes without string matching.
class Error : public std::runtime_error {
 public:
  enum class Kind {
    Input,       // malformed system file, bad CLI usage
    Sort,        // ill-sorted term construction
    Solver,      // backend protocol violation or crash
    Capability,  // backend lacks a required feature (e.g. interpolation)
    Resource,    // timeout or budget exhausted
    Internal,    // broken invariant inside the library
  };

  Error(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
  Kind kind;
};

[[noreturn]] inline void fail_input(const std::string& msg) {
  throw Error(Error::Kind::Input, msg);
}
[[noreturn]] inline void fail_sort(const std::string& msg) {
  throw Error(Error::Kind::Sort, msg);
}
[[noreturn]] inline void fail_solver(const std::string& msg) {
  throw Error(Error::Kind::Solver, msg);
}
[[noreturn]] inline void fail_capability(const std::string& msg) {
  throw Error(Error::Kind::Capability, msg);
}
[[noreturn]] inline void fail_resource(const std::string& msg) {
  throw Error(Error::Kind::Resource, msg);
}
[[noreturn]] inline void fail_internal(const std::string& msg) {
  throw Error(Error::Kind::Internal, msg);
}

}  // namespace qivc
