#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace voxbench {

enum class ErrorCode {
  format,
  unsupported_datatype,
  shape,
  io,
  parameter,
  degenerate_mask,
  degenerate_normalization,
  degenerate_reference,
  corrupted_record,
  no_foreground,
  incomplete_coverage,
  contract,
  index,
  lookup,
  conflict,
  configuration,
  cardinality,
  completeness,
  undefined_test,
  validation,
  alignment,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);
  /// Format errors carry the byte offset of the offending header field.
  Error(ErrorCode code, const std::string& message, std::uint64_t byte_offset);

  ErrorCode code() const noexcept { return code_; }
  std::optional<std::uint64_t> byte_offset() const noexcept { return offset_; }

 private:
  ErrorCode code_;
  std::optional<std::uint64_t> offset_;
};

}  // namespace voxbench
