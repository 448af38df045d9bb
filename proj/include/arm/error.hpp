#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace arm {

enum class ErrorCode {
  duplicate_relation,
  invalid_schema,
  unknown_relation,
  unknown_column,
  type_mismatch,
  duplicate_key,
  transaction_not_active,
  transaction_active,
  invalid_command,
  syntax_error,
  not_found,
  null_link,
  conflict,
  unknown_owner,
  unreachable,
  registration_conflict,
  bad_magic,
  unsupported_version,
  truncated_frame,
  length_mismatch,
  malformed_payload,
  protocol_violation,
  infeasible,
  invalid_argument,
  io_error,
  validation_error,
};

std::string_view to_string(ErrorCode code);

// Every failure in the library surfaces as an arm::Error carrying a code.
// Parse-style errors also carry the byte offset of the offending input.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::optional<std::size_t> offset = std::nullopt)
      : std::runtime_error(message), code_(code), offset_(offset) {}

  ErrorCode code() const noexcept { return code_; }
  std::optional<std::size_t> offset() const noexcept { return offset_; }

 private:
  ErrorCode code_;
  std::optional<std::size_t> offset_;
};

}  // namespace arm
