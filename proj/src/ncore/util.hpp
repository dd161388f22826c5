#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ncore {

std::string to_lower(std::string_view s);

// ASCII-only checks; datastream keys and repo ids are constrained to ASCII.
bool is_ascii_alnum(char c);

std::string trim(std::string_view s);

std::vector<std::string> split(std::string_view s, char sep);

std::string base64_encode(std::string_view bytes);
std::optional<std::string> base64_decode(std::string_view text);

std::string hex_encode(std::string_view bytes);
std::optional<std::string> hex_decode(std::string_view text);

// Random bytes from the OS CSPRNG.
std::string random_bytes(size_t n);

bool starts_with_ci(std::string_view s, std::string_view prefix);

// Percent-encodes everything outside the URI unreserved set.
std::string url_encode_component(std::string_view s);

}  // namespace ncore
