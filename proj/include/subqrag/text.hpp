#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace subqrag::text {

bool is_space(char c) noexcept;

std::string trim(std::string_view s);

// Runs of ASCII whitespace become one space; leading/trailing whitespace is dropped.
std::string collapse_whitespace(std::string_view s);

// Lowercases UTF-8 text. Covers ASCII, Latin-1, Latin Extended-A, Greek and
// basic Cyrillic, plus the "ß" -> "ss" fold. Bytes that are not valid UTF-8
// pass through untouched.
std::string casefold(std::string_view s);

std::vector<std::string> split_whitespace(std::string_view s);

// Splits on '\n' keeping empty lines; a trailing newline does not yield an
// extra empty element.
std::vector<std::string> split_lines(std::string_view s);

bool starts_with(std::string_view s, std::string_view prefix) noexcept;

}  // namespace subqrag::text
