#include "arm/error.hpp"

namespace arm {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::duplicate_relation: return "duplicate-relation";
    case ErrorCode::invalid_schema: return "invalid-schema";
    case ErrorCode::unknown_relation: return "unknown-relation";
    case ErrorCode::unknown_column: return "unknown-column";
    case ErrorCode::type_mismatch: return "type-mismatch";
    case ErrorCode::duplicate_key: return "duplicate-key";
    case ErrorCode::transaction_not_active: return "transaction-not-active";
    case ErrorCode::transaction_active: return "transaction-active";
    case ErrorCode::invalid_command: return "invalid-combination";
    case ErrorCode::syntax_error: return "syntax-error";
    case ErrorCode::not_found: return "not-found";
    case ErrorCode::null_link: return "null-link";
    case ErrorCode::conflict: return "conflict";
    case ErrorCode::unknown_owner: return "unknown-owner";
    case ErrorCode::unreachable: return "unreachable";
    case ErrorCode::registration_conflict: return "registration-conflict";
    case ErrorCode::bad_magic: return "bad-magic";
    case ErrorCode::unsupported_version: return "unsupported-version";
    case ErrorCode::truncated_frame: return "truncated-frame";
    case ErrorCode::length_mismatch: return "length-mismatch";
    case ErrorCode::malformed_payload: return "malformed-payload";
    case ErrorCode::protocol_violation: return "protocol-violation";
    case ErrorCode::infeasible: return "infeasible";
    case ErrorCode::invalid_argument: return "invalid-argument";
    case ErrorCode::io_error: return "io-error";
    case ErrorCode::validation_error: return "validation-error";
  }
  return "unknown";
}

}  // namespace arm
