#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ncore {

// Minimal non-validating XML reader. It exists for two jobs a generic tree
// parser does badly: extracting embedded metadata payloads verbatim (byte
// spans are tracked for every element) and tolerating the namespace prefixes
// OAI responses carry (matching is by local name). No DTD expansion; the
// five predefined entities and numeric character references are resolved in
// text and attribute values.
struct XmlAttr {
    std::string name;
    std::string value;
};

struct XmlElement {
    std::string name;  // qualified name as written, e.g. "oai:record"
    std::vector<XmlAttr> attrs;
    std::vector<XmlElement> children;
    std::string text;  // character data directly inside this element
    size_t begin = 0;  // byte offset of '<'
    size_t end = 0;    // one past the closing '>'

    std::string_view local_name() const;
    const XmlElement* first(std::string_view local) const;
    std::vector<const XmlElement*> all(std::string_view local) const;
    std::optional<std::string> attr(std::string_view name) const;
};

// Parses the first element of the document (prolog, comments, and PIs are
// skipped). Returns nullopt on malformed input; *err gets a diagnostic.
std::optional<XmlElement> xml_parse(std::string_view doc, std::string* err = nullptr);

// True if the payload parses as a single-rooted XML document with nothing but
// whitespace/comments around the root.
bool xml_well_formed(std::string_view doc);

std::string xml_escape(std::string_view text);
std::string xml_escape_attr(std::string_view text);

}  // namespace ncore
