#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace jetfree {

enum class ErrorKind {
  DivisionByZero,
  UnknownVariable,
  UnboundVariable,
  OrderCapExceeded,
  SingularJacobian,
  BasePointMismatch,
  OrderMismatch,
  SingularJet,
  SingularTotalJacobian,
  StepFailure,
  NonRationalDependence,
  CoefficientSingularity,
  NotFreeAtBase,
  PreconditionViolation,
  NoSolution,
  NonTriangular,
  DomainMismatch,
  InvalidSpec,
  InvalidArgument,
  MixedKinds,
  UnknownCoordinate,
  NonRationalLiteral,
  SyntaxError,
};

inline std::string_view to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::DivisionByZero: return "DivisionByZero";
    case ErrorKind::UnknownVariable: return "UnknownVariable";
    case ErrorKind::UnboundVariable: return "UnboundVariable";
    case ErrorKind::OrderCapExceeded: return "OrderCapExceeded";
    case ErrorKind::SingularJacobian: return "SingularJacobian";
    case ErrorKind::BasePointMismatch: return "BasePointMismatch";
    case ErrorKind::OrderMismatch: return "OrderMismatch";
    case ErrorKind::SingularJet: return "SingularJet";
    case ErrorKind::SingularTotalJacobian: return "SingularTotalJacobian";
    case ErrorKind::StepFailure: return "StepFailure";
    case ErrorKind::NonRationalDependence: return "NonRationalDependence";
    case ErrorKind::CoefficientSingularity: return "CoefficientSingularity";
    case ErrorKind::NotFreeAtBase: return "NotFreeAtBase";
    case ErrorKind::PreconditionViolation: return "PreconditionViolation";
    case ErrorKind::NoSolution: return "NoSolution";
    case ErrorKind::NonTriangular: return "NonTriangular";
    case ErrorKind::DomainMismatch: return "DomainMismatch";
    case ErrorKind::InvalidSpec: return "InvalidSpec";
    case ErrorKind::MixedKinds: return "MixedKinds";
    case ErrorKind::UnknownCoordinate: return "UnknownCoordinate";
    case ErrorKind::NonRationalLiteral: return "NonRationalLiteral";
    case ErrorKind::SyntaxError: return "SyntaxError";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

/// Every failure raised by the library. `kind()` is stable and is what the
/// CLI reports; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace jetfree
