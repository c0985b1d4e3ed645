#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace personasq::text {

bool is_space(char c) noexcept;

std::string_view trim(std::string_view s) noexcept;

/// Collapses every whitespace run to a single space and trims both ends.
std::string normalize_whitespace(std::string_view s);

std::string to_lower(std::string_view s);

std::string join(std::span<const std::string> parts, std::string_view sep);

/// Substring test after whitespace normalization of both sides.
bool contains_normalized(std::string_view haystack, std::string_view needle);

/// Number of whitespace-separated words.
std::size_t word_count(std::string_view s) noexcept;

}  // namespace personasq::text
