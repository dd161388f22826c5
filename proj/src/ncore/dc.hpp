#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ncore {

// The qualified-Dublin-Core fields the index understands.
const std::vector<std::string>& dc_fields();
bool is_dc_field(std::string_view name);

// dc_fields plus "body", the field inline text/* resource content lands in.
bool is_queryable_field(std::string_view name);

// field name -> values in document order.
using FieldValues = std::map<std::string, std::vector<std::string>>;

// Collects the text of every descendant element whose local name is a DC
// field. Namespace prefixes vary across feeds, so matching ignores them.
// nullopt when the payload is not well-formed XML.
std::optional<FieldValues> extract_dc_fields(std::string_view xml);

// Lowercase ASCII alphanumeric runs; everything else separates tokens.
std::vector<std::string> tokenize(std::string_view text);

}  // namespace ncore
