#include "gsci/core.hpp"

namespace gsci {

const char* to_string(Errc code) {
  switch (code) {
    case Errc::WeightSumExceeded: return "WeightSumExceeded";
    case Errc::RowSumExceeded: return "RowSumExceeded";
    case Errc::NegativeWeight: return "NegativeWeight";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::InvalidWeight: return "InvalidWeight";
    case Errc::InactiveNode: return "InactiveNode";
    case Errc::OutOfDomain: return "OutOfDomain";
    case Errc::SpentIncrementNonpositive: return "SpentIncrementNonpositive";
    case Errc::ConvergenceFailure: return "ConvergenceFailure";
    case Errc::SpendingMonotonicityViolation: return "SpendingMonotonicityViolation";
    case Errc::MissingObservation: return "MissingObservation";
    case Errc::StageOverrun: return "StageOverrun";
    case Errc::NotCollecting: return "NotCollecting";
    case Errc::InvalidStartVector: return "InvalidStartVector";
    case Errc::NotPSD: return "NotPSD";
    case Errc::ParseError: return "ParseError";
    case Errc::ValidationError: return "ValidationError";
  }
  return "Unknown";
}

std::string format_set(IndexSet s) {
  std::string out = "{";
  bool first = true;
  for (int i : s.indices()) {
    if (!first) out += ",";
    out += std::to_string(i + 1);
    first = false;
  }
  return out + "}";
}

}  // namespace gsci
