#include "cbmrag/retrieval/chunker.hpp"

#include <algorithm>

#include "cbmrag/error.hpp"
#include "cbmrag/util.hpp"

namespace cbmrag::retrieval {

namespace {

bool is_continuation(char c) { return (static_cast<unsigned char>(c) & 0xc0) == 0x80; }

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

}  // namespace

std::size_t utf8_length(std::string_view text) {
  return static_cast<std::size_t>(
      std::count_if(text.begin(), text.end(), [](char c) { return !is_continuation(c); }));
}

std::vector<DocumentChunk> chunk_text(std::string_view text, const ChunkingParams& params,
                                      const std::string& doc_id) {
  if (params.max_chars == 0 || params.overlap >= params.max_chars) {
    throw Error(Errc::invalid_chunk_params,
                "chunking requires 0 <= overlap < max_chars (got max_chars=" +
                    std::to_string(params.max_chars) +
                    ", overlap=" + std::to_string(params.overlap) + ")");
  }
  if (!util::is_valid_utf8(text)) {
    throw Error(Errc::invalid_encoding, "document '" + doc_id + "' is not valid UTF-8");
  }

  // byte offset of every code point, plus a sentinel at the end
  std::vector<std::size_t> offsets;
  offsets.reserve(text.size() + 1);
  for (std::size_t b = 0; b < text.size(); ++b) {
    if (!is_continuation(text[b])) offsets.push_back(b);
  }
  const std::size_t length = offsets.size();
  offsets.push_back(text.size());

  const std::size_t step = params.max_chars - params.overlap;
  std::vector<DocumentChunk> chunks;
  for (std::size_t start = 0; start < length; start += step) {
    std::size_t end = std::min(start + params.max_chars, length);
    const bool final_chunk = start + step >= length;
    if (!final_chunk && end < length) {
      const std::size_t midpoint = start + (end - start) / 2;
      const std::size_t next_start = start + step;
      for (std::size_t p = end - 1; p > midpoint && p >= next_start; --p) {
        const char c = text[offsets[p]];
        if (is_space(c)) {
          end = p;
          break;
        }
      }
    }
    DocumentChunk chunk;
    chunk.doc_id = doc_id;
    chunk.chunk_index = chunks.size();
    chunk.start = start;
    chunk.end = end;
    chunk.text = std::string(text.substr(offsets[start], offsets[end] - offsets[start]));
    chunks.push_back(std::move(chunk));
  }
  return chunks;
}

}  // namespace cbmrag::retrieval
