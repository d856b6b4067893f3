#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cbmrag {

// Closed set of failure kinds shared by every module. The service layer maps
// each one to an HTTP status and a machine-readable code.
enum class Errc {
  invalid_argument,
  empty_input,
  remote_unavailable,
  dimension_mismatch,
  unsupported_media_type,
  malformed_response,
  script_exhausted,
  concept_set_mismatch,
  unknown_class_label,
  index_out_of_range,
  out_of_range,
  empty_class,
  inconsistent_concept_set,
  empty_dataset,
  invalid_chunk_params,
  invalid_encoding,
  duplicate_document,
  unknown_store,
  io_failure,
  corrupt_store,
  parse_failure,
  malformed_report,
  unknown_session,
  no_analysis,
  unknown_concept,
  score_out_of_range,
  storage_failure,
  invalid_config,
};

std::string_view to_string(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace cbmrag
