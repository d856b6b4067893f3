#include "cbmrag/error.hpp"

namespace cbmrag {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::empty_input: return "empty_input";
    case Errc::remote_unavailable: return "remote_unavailable";
    case Errc::dimension_mismatch: return "dimension_mismatch";
    case Errc::unsupported_media_type: return "unsupported_media_type";
    case Errc::malformed_response: return "malformed_response";
    case Errc::script_exhausted: return "script_exhausted";
    case Errc::concept_set_mismatch: return "concept_set_mismatch";
    case Errc::unknown_class_label: return "unknown_class_label";
    case Errc::index_out_of_range: return "index_out_of_range";
    case Errc::out_of_range: return "out_of_range";
    case Errc::empty_class: return "empty_class";
    case Errc::inconsistent_concept_set: return "inconsistent_concept_set";
    case Errc::empty_dataset: return "empty_dataset";
    case Errc::invalid_chunk_params: return "invalid_chunk_params";
    case Errc::invalid_encoding: return "invalid_encoding";
    case Errc::duplicate_document: return "duplicate_document";
    case Errc::unknown_store: return "unknown_store";
    case Errc::io_failure: return "io_failure";
    case Errc::corrupt_store: return "corrupt_store";
    case Errc::parse_failure: return "parse_failure";
    case Errc::malformed_report: return "malformed_report";
    case Errc::unknown_session: return "unknown_session";
    case Errc::no_analysis: return "no_analysis";
    case Errc::unknown_concept: return "unknown_concept";
    case Errc::score_out_of_range: return "score_out_of_range";
    case Errc::storage_failure: return "storage_failure";
    case Errc::invalid_config: return "invalid_config";
  }
  return "unknown";
}

}  // namespace cbmrag
