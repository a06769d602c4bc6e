#pragma once

// ASCII string helpers shared across modules.

#include <string>
#include <string_view>
#include <vector>

namespace pvsql::text {

std::string lower(std::string_view s);
std::string upper(std::string_view s);
std::string trim(std::string_view s);
bool iequals(std::string_view a, std::string_view b);
bool icontains(std::string_view haystack, std::string_view needle);
bool istarts_with(std::string_view s, std::string_view prefix);
std::vector<std::string> split(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
std::string replace_all(std::string s, std::string_view from, std::string_view to);

inline bool is_word_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}

// True if `needle` occurs in `haystack` (both compared lowercase) with no word
// character directly before or after the match. Edges of the needle that are
// not word characters need no boundary.
bool contains_word(std::string_view haystack, std::string_view needle);

// Truncates to at most `max_chars` bytes, appending "..." when cut.
std::string ellipsize(std::string_view s, std::size_t max_chars);

}  // namespace pvsql::text
