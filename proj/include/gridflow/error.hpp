#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gridflow {

// One code per failure kind named by the module contracts. The C API maps
// these onto gf_status values and the CLI onto exit codes.
enum class ErrorCode {
  DimensionMismatch,
  MissingObservable,
  InvalidValue,
  UnknownUnit,
  ParseError,
  DuplicateResource,
  InvalidDescriptor,
  UnknownResource,
  ResourceWithdrawn,
  UnknownJob,
  UnboundPlaceholder,
  MissingInput,
  StorageFull,
  UnknownKey,
  IntegrityError,
  UnknownRun,
  UnknownCheckpoint,
  StructuralError,
  SyntaxError,
  UnsoundWorkflow,
  NotSeriesParallel,
  NoResource,
  LicenseViolation,
  ActivityFailed,
  IterationLimit,
  GuardEvaluationError,
  NothingToResume,
  BadParams,
  NoFreeSites,
  IoError,
  Internal,
};

std::string_view error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code), detail_(message) {}

  ErrorCode code() const noexcept { return code_; }
  // Message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace gridflow
