#include "voxbench/error.hpp"

namespace voxbench {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::format: return "format";
    case ErrorCode::unsupported_datatype: return "unsupported-datatype";
    case ErrorCode::shape: return "shape";
    case ErrorCode::io: return "io";
    case ErrorCode::parameter: return "parameter";
    case ErrorCode::degenerate_mask: return "degenerate-mask";
    case ErrorCode::degenerate_normalization: return "degenerate-normalization";
    case ErrorCode::degenerate_reference: return "degenerate-reference";
    case ErrorCode::corrupted_record: return "corrupted-record";
    case ErrorCode::no_foreground: return "no-foreground";
    case ErrorCode::incomplete_coverage: return "incomplete-coverage";
    case ErrorCode::contract: return "contract";
    case ErrorCode::index: return "index";
    case ErrorCode::lookup: return "lookup";
    case ErrorCode::conflict: return "conflict";
    case ErrorCode::configuration: return "configuration";
    case ErrorCode::cardinality: return "cardinality";
    case ErrorCode::completeness: return "completeness";
    case ErrorCode::undefined_test: return "undefined-test";
    case ErrorCode::validation: return "validation";
    case ErrorCode::alignment: return "alignment";
  }
  return "unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + " error: " + message), code_(code) {}

Error::Error(ErrorCode code, const std::string& message, std::uint64_t byte_offset)
    : std::runtime_error(std::string(to_string(code)) + " error at byte " +
                         std::to_string(byte_offset) + ": " + message),
      code_(code),
      offset_(byte_offset) {}

}  // namespace voxbench
