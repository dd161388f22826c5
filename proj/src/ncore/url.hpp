#pragma once

#include <string>
#include <string_view>

namespace ncore {

// Canonicalizes an absolute http(s) URL so that independently harvested
// records describing one web resource collapse onto one resource object:
// lowercase scheme/host, default port dropped, fragment dropped, empty path
// becomes "/", percent-escapes normalized (unreserved bytes decoded, the rest
// uppercased), query pairs sorted by key. Throws Err::UnparseableUrl.
std::string normalize_url(std::string_view raw);

bool is_http_url(std::string_view s);

}  // namespace ncore
