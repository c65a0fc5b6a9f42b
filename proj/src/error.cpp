#include "sjreuse/error.hpp"

namespace sjreuse {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kIo: return "IoError";
    case ErrorCode::kParse: return "ParseError";
    case ErrorCode::kDegenerateInput: return "DegenerateInput";
    case ErrorCode::kEmptyHistogram: return "EmptyHistogram";
    case ErrorCode::kDomainMismatch: return "DomainMismatch";
    case ErrorCode::kOutOfDomain: return "OutOfDomain";
    case ErrorCode::kEmptySample: return "EmptySample";
    case ErrorCode::kFormat: return "FormatError";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::kDuplicateId: return "DuplicateId";
    case ErrorCode::kNotFound: return "NotFound";
    case ErrorCode::kEmptyRepository: return "EmptyRepository";
    case ErrorCode::kCapacity: return "CapacityError";
    case ErrorCode::kLocked: return "Locked";
    case ErrorCode::kInternal: return "InternalError";
  }
  return "Unknown";
}

}  // namespace sjreuse
