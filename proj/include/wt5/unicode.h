#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace wt5::unicode {

// All offsets in this toolkit count Unicode scalar values, not bytes.

std::u32string decode(std::string_view utf8);  // throws std::invalid_argument
std::string encode(std::u32string_view text);
void append(std::string& out, char32_t c);

bool is_valid(std::string_view utf8);
std::size_t length(std::string_view utf8);

// Byte position of the `index`-th scalar value; `index == length` gives size().
std::size_t byte_offset(std::string_view utf8, std::size_t index);
// Scalar-value index of a byte position that lies on a character boundary.
std::size_t char_index(std::string_view utf8, std::size_t byte_pos);

std::string substr(std::string_view utf8, std::size_t start, std::size_t end);

bool is_punctuation(char32_t c);    // general category P*
bool is_symbol(char32_t c);         // general category S*
bool is_decimal_digit(char32_t c);  // general category Nd
// Whitespace as understood by Python's str.split(), which the reference
// BLEU tokenizer relies on.
bool is_space(char32_t c);

}  // namespace wt5::unicode
