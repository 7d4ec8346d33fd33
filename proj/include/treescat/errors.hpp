#ifndef TREESCAT_ERRORS_HPP
#define TREESCAT_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace treescat {

enum class ErrorKind {
  InvalidParameter,
  DepthInsufficient,
  OutOfBand,
  BandEdgeSingularity,
  SingularParameter,
  ExceptionalParameter,
  ExceptionalInterval,
  InconclusiveRange,
  DirichletSingular,
  InvalidStructure,
  PreconditionViolated,
  InputFormat,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidParameter: return "invalid-parameter";
    case ErrorKind::DepthInsufficient: return "depth-insufficient";
    case ErrorKind::OutOfBand: return "out-of-band";
    case ErrorKind::BandEdgeSingularity: return "band-edge-singularity";
    case ErrorKind::SingularParameter: return "singular-parameter";
    case ErrorKind::ExceptionalParameter: return "exceptional-parameter";
    case ErrorKind::ExceptionalInterval: return "exceptional-interval";
    case ErrorKind::InconclusiveRange: return "inconclusive-range";
    case ErrorKind::DirichletSingular: return "dirichlet-singular";
    case ErrorKind::InvalidStructure: return "invalid-structure";
    case ErrorKind::PreconditionViolated: return "precondition-violated";
    case ErrorKind::InputFormat: return "input-format";
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

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace treescat

#endif  // TREESCAT_ERRORS_HPP
