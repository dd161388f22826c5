#include "ncore/dc.hpp"

#include <algorithm>

#include "ncore/util.hpp"
#include "ncore/xml.hpp"

namespace ncore {

const std::vector<std::string>& dc_fields() {
    static const std::vector<std::string> fields = {
        "title",   "description", "subject",   "identifier", "language",
        "audience", "format",     "type",      "date",       "creator",
        "publisher", "rights",    "educationLevel"};
    return fields;
}

bool is_dc_field(std::string_view name) {
    const auto& fs = dc_fields();
    return std::find(fs.begin(), fs.end(), name) != fs.end();
}

bool is_queryable_field(std::string_view name) { return name == "body" || is_dc_field(name); }

namespace {

void collect(const XmlElement& el, FieldValues& out) {
    std::string local(el.local_name());
    if (is_dc_field(local)) {
        std::string value = trim(el.text);
        if (!value.empty()) out[local].push_back(std::move(value));
    }
    for (const auto& child : el.children) collect(child, out);
}

}  // namespace

std::optional<FieldValues> extract_dc_fields(std::string_view xml) {
    auto root = xml_parse(xml);
    if (!root) return std::nullopt;
    FieldValues out;
    collect(*root, out);
    return out;
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char c : text) {
        if (is_ascii_alnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

}  // namespace ncore
