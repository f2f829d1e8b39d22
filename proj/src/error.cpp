#include "tlta/error.hpp"

namespace tlta {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidPolygon: return "InvalidPolygon";
    case ErrorCode::OutOfGrid: return "OutOfGrid";
    case ErrorCode::OpOutOfGrid: return "OpOutOfGrid";
    case ErrorCode::NoPerimeter: return "NoPerimeter";
    case ErrorCode::InvalidManifest: return "InvalidManifest";
    case ErrorCode::AlreadyIssued: return "AlreadyIssued";
    case ErrorCode::DuplicateTransaction: return "DuplicateTransaction";
    case ErrorCode::RegistrationDenied: return "RegistrationDenied";
    case ErrorCode::NotRegistered: return "NotRegistered";
    case ErrorCode::UnknownFunction: return "UnknownFunction";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::InvariantBreach: return "InvariantBreach";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace tlta
