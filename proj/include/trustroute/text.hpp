#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace trustroute::text {

std::string to_lower(std::string_view s);
std::string_view trim(std::string_view s);
bool iequals(std::string_view a, std::string_view b);
bool icontains(std::string_view haystack, std::string_view needle);
/// Case-insensitive find; npos when absent.
std::size_t ifind(std::string_view haystack, std::string_view needle, std::size_t from = 0);

std::vector<std::string> split_whitespace(std::string_view s);
std::vector<std::string> split_lines(std::string_view s);

/// Lowercased alphanumeric runs. Bytes >= 0x80 count as word characters so
/// UTF-8 words stay intact. Text without any alphanumeric run falls back to
/// its whitespace-separated pieces, so non-blank text always has tokens.
std::vector<std::string> word_tokens(std::string_view s);

/// Items of a "1. foo" / "2) bar" numbered list, in order of appearance.
std::vector<std::string> parse_numbered_list(std::string_view s);

/// Replaces every `{name}` placeholder with its value; unknown names stay.
std::string fill_template(std::string_view tmpl,
                          const std::vector<std::pair<std::string, std::string>>& values);

std::uint64_t fnv1a64(std::string_view s);
std::string hex64(std::uint64_t v);

}  // namespace trustroute::text
