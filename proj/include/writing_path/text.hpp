#pragma once

#include <string>
#include <string_view>
#include <vector>

// Small string helpers shared by the parsers, tokenizer and report writers.
namespace writing_path::text {

std::string_view trim(std::string_view s);

/// ASCII-only case folding; non-ASCII bytes pass through unchanged.
std::string fold_case(std::string_view s);

bool iequals(std::string_view a, std::string_view b);

bool starts_with_icase(std::string_view s, std::string_view prefix);

/// Splits on '\n', dropping a trailing '\r' from each line.
std::vector<std::string> split_lines(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// Decodes UTF-8 into code points.  Invalid bytes decode as U+FFFD so that
/// arbitrary input never throws.
std::vector<char32_t> decode_utf8(std::string_view s);

void append_utf8(std::string& out, char32_t cp);

std::string encode_utf8(const std::vector<char32_t>& cps, std::size_t begin, std::size_t end);

bool is_space(char32_t cp);

/// Letters, digits, underscore and any code point outside the ASCII /
/// Unicode punctuation and space ranges.
bool is_word_char(char32_t cp);

/// Collapses blank lines (lines containing only whitespace) so that the
/// result has no empty lines; trims leading and trailing whitespace.
std::string collapse_blank_lines(std::string_view s);

/// English ordinal: 1 -> "1st", 2 -> "2nd", 11 -> "11th".
std::string ordinal(long n);

}  // namespace writing_path::text
