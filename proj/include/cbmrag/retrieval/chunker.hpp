#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace cbmrag::retrieval {

// Offsets and lengths count Unicode code points, not bytes.
struct DocumentChunk {
  std::string doc_id;
  std::size_t chunk_index = 0;
  std::string text;
  std::size_t start = 0;
  std::size_t end = 0;

  bool operator==(const DocumentChunk&) const = default;
};

struct ChunkingParams {
  std::size_t max_chars = 1000;
  std::size_t overlap = 200;
};

// Fixed-stride windows: chunk i starts at i * (max_chars - overlap) and spans
// at most max_chars characters. A window that is neither the last one nor
// already cut by the end of the text is shortened to the last whitespace past
// both its midpoint and the next window's start, so coverage never gaps.
//
// Errors: invalid_chunk_params unless 0 <= overlap < max_chars;
// invalid_encoding when `text` is not valid UTF-8.
std::vector<DocumentChunk> chunk_text(std::string_view text, const ChunkingParams& params = {},
                                      const std::string& doc_id = {});

// Number of code points in valid UTF-8 text.
std::size_t utf8_length(std::string_view text);

}  // namespace cbmrag::retrieval
