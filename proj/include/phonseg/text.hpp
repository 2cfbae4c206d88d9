#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace phonseg {

// Splits a UTF-8 string into one string per Unicode scalar value.
std::vector<std::string> utf8_split(std::string_view s);

// Number of Unicode scalar values in a UTF-8 string.
std::size_t utf8_length(std::string_view s);

std::vector<std::string> split_whitespace(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

// FNV-1a, seed folded in up front. Stable across platforms; used wherever a
// hash feeds an observable decision (splits, resume directory names).
std::uint64_t fnv1a64(std::string_view s, std::uint64_t seed = 0);

}  // namespace phonseg
