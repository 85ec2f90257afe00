#include "gridflow/error.hpp"

namespace gridflow {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::MissingObservable: return "MissingObservable";
    case ErrorCode::InvalidValue: return "InvalidValue";
    case ErrorCode::UnknownUnit: return "UnknownUnit";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::DuplicateResource: return "DuplicateResource";
    case ErrorCode::InvalidDescriptor: return "InvalidDescriptor";
    case ErrorCode::UnknownResource: return "UnknownResource";
    case ErrorCode::ResourceWithdrawn: return "ResourceWithdrawn";
    case ErrorCode::UnknownJob: return "UnknownJob";
    case ErrorCode::UnboundPlaceholder: return "UnboundPlaceholder";
    case ErrorCode::MissingInput: return "MissingInput";
    case ErrorCode::StorageFull: return "StorageFull";
    case ErrorCode::UnknownKey: return "UnknownKey";
    case ErrorCode::IntegrityError: return "IntegrityError";
    case ErrorCode::UnknownRun: return "UnknownRun";
    case ErrorCode::UnknownCheckpoint: return "UnknownCheckpoint";
    case ErrorCode::StructuralError: return "StructuralError";
    case ErrorCode::SyntaxError: return "SyntaxError";
    case ErrorCode::UnsoundWorkflow: return "UnsoundWorkflow";
    case ErrorCode::NotSeriesParallel: return "NotSeriesParallel";
    case ErrorCode::NoResource: return "NoResource";
    case ErrorCode::LicenseViolation: return "LicenseViolation";
    case ErrorCode::ActivityFailed: return "ActivityFailed";
    case ErrorCode::IterationLimit: return "IterationLimit";
    case ErrorCode::GuardEvaluationError: return "GuardEvaluationError";
    case ErrorCode::NothingToResume: return "NothingToResume";
    case ErrorCode::BadParams: return "BadParams";
    case ErrorCode::NoFreeSites: return "NoFreeSites";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::Internal: return "Internal";
  }
  return "Unknown";
}

}  // namespace gridflow
