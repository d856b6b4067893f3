#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cbmrag::util {

using Bytes = std::vector<std::uint8_t>;
using Sha256Digest = std::array<std::uint8_t, 32>;

// SHA-256 over the concatenation of all parts.
Sha256Digest sha256(std::initializer_list<std::span<const std::uint8_t>> parts);
Sha256Digest sha256(std::span<const std::uint8_t> data);
std::string to_hex(std::span<const std::uint8_t> data);

std::span<const std::uint8_t> as_bytes(std::string_view s);

std::string base64_encode(std::span<const std::uint8_t> data);
// Throws Error(invalid_argument) on malformed input.
Bytes base64_decode(std::string_view text);

Bytes read_binary_file(const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);

// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

bool is_valid_utf8(std::string_view text);
std::string trim(std::string_view text);

}  // namespace cbmrag::util
