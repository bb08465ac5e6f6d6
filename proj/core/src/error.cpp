#include "pinball/error.hpp"

namespace pinball {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidConfiguration: return "invalid-configuration";
    case ErrorKind::Precondition: return "precondition";
    case ErrorKind::Overflow: return "overflow";
    case ErrorKind::SolverFailure: return "solver-failure";
    case ErrorKind::Grazing: return "grazing";
    case ErrorKind::Occlusion: return "occlusion";
    case ErrorKind::Consistency: return "internal-consistency";
    case ErrorKind::OracleFailure: return "oracle-failure";
    case ErrorKind::Coverage: return "coverage";
    case ErrorKind::InsufficientData: return "insufficient-data";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Undefined: return "undefined";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Integrity: return "integrity";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

}  // namespace pinball
