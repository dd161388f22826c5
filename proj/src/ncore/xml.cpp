#include "ncore/xml.hpp"

namespace ncore {

std::string_view XmlElement::local_name() const {
    size_t colon = name.rfind(':');
    return colon == std::string::npos ? std::string_view(name)
                                      : std::string_view(name).substr(colon + 1);
}

const XmlElement* XmlElement::first(std::string_view local) const {
    for (const auto& c : children)
        if (c.local_name() == local) return &c;
    return nullptr;
}

std::vector<const XmlElement*> XmlElement::all(std::string_view local) const {
    std::vector<const XmlElement*> out;
    for (const auto& c : children)
        if (c.local_name() == local) out.push_back(&c);
    return out;
}

std::optional<std::string> XmlElement::attr(std::string_view name_) const {
    for (const auto& a : attrs)
        if (a.name == name_) return a.value;
    return std::nullopt;
}

namespace {

constexpr size_t kMaxDepth = 200;

struct Parser {
    std::string_view s;
    size_t pos = 0;
    std::string err;

    bool eof() const { return pos >= s.size(); }
    char peek() const { return s[pos]; }
    bool has(size_t n) const { return pos + n <= s.size(); }

    bool starts(std::string_view lit) const {
        return s.compare(pos, lit.size(), lit) == 0;
    }

    void skip_ws() {
        while (!eof() && (s[pos] == ' ' || s[pos] == '\t' || s[pos] == '\r' || s[pos] == '\n'))
            ++pos;
    }

    bool fail(std::string msg) {
        if (err.empty()) err = msg + " at offset " + std::to_string(pos);
        return false;
    }

    static bool name_start(char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' || c == ':' ||
               static_cast<unsigned char>(c) >= 0x80;
    }
    static bool name_char(char c) {
        return name_start(c) || (c >= '0' && c <= '9') || c == '-' || c == '.';
    }

    bool read_name(std::string& out) {
        if (eof() || !name_start(peek())) return fail("expected name");
        size_t start = pos;
        while (!eof() && name_char(peek())) ++pos;
        out.assign(s.substr(start, pos - start));
        return true;
    }

    bool decode_entity(std::string& out) {
        // pos is at '&'
        size_t semi = s.find(';', pos);
        if (semi == std::string_view::npos || semi - pos > 12) return fail("unterminated entity");
        std::string_view ent = s.substr(pos + 1, semi - pos - 1);
        if (ent == "amp") out += '&';
        else if (ent == "lt") out += '<';
        else if (ent == "gt") out += '>';
        else if (ent == "quot") out += '"';
        else if (ent == "apos") out += '\'';
        else if (!ent.empty() && ent[0] == '#') {
            uint32_t cp = 0;
            bool ok = false;
            if (ent.size() > 1 && (ent[1] == 'x' || ent[1] == 'X')) {
                for (size_t i = 2; i < ent.size(); ++i) {
                    char c = ent[i];
                    int v = (c >= '0' && c <= '9')   ? c - '0'
                            : (c >= 'a' && c <= 'f') ? c - 'a' + 10
                            : (c >= 'A' && c <= 'F') ? c - 'A' + 10
                                                     : -1;
                    if (v < 0) return fail("bad char reference");
                    cp = cp * 16 + static_cast<uint32_t>(v);
                    ok = true;
                }
            } else {
                for (size_t i = 1; i < ent.size(); ++i) {
                    if (ent[i] < '0' || ent[i] > '9') return fail("bad char reference");
                    cp = cp * 10 + static_cast<uint32_t>(ent[i] - '0');
                    ok = true;
                }
            }
            if (!ok || cp > 0x10FFFF) return fail("bad char reference");
            // UTF-8 encode
            if (cp < 0x80) out += static_cast<char>(cp);
            else if (cp < 0x800) {
                out += static_cast<char>(0xC0 | (cp >> 6));
                out += static_cast<char>(0x80 | (cp & 0x3F));
            } else if (cp < 0x10000) {
                out += static_cast<char>(0xE0 | (cp >> 12));
                out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
                out += static_cast<char>(0x80 | (cp & 0x3F));
            } else {
                out += static_cast<char>(0xF0 | (cp >> 18));
                out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
                out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
                out += static_cast<char>(0x80 | (cp & 0x3F));
            }
        } else {
            return fail("unknown entity");
        }
        pos = semi + 1;
        return true;
    }

    // Comments, PIs, doctype. pos at '<'. Returns false on malformed input,
    // sets *skipped=false when the construct is an element start.
    bool skip_misc(bool* skipped) {
        *skipped = true;
        if (starts("<!--")) {
            size_t close = s.find("-->", pos + 4);
            if (close == std::string_view::npos) return fail("unterminated comment");
            pos = close + 3;
            return true;
        }
        if (starts("<?")) {
            size_t close = s.find("?>", pos + 2);
            if (close == std::string_view::npos) return fail("unterminated PI");
            pos = close + 2;
            return true;
        }
        if (starts("<!DOCTYPE")) {
            // Internal subsets live in [...]; no expansion, just a balanced skip.
            int bracket = 0;
            for (size_t i = pos + 9; i < s.size(); ++i) {
                if (s[i] == '[') ++bracket;
                else if (s[i] == ']') --bracket;
                else if (s[i] == '>' && bracket <= 0) {
                    pos = i + 1;
                    return true;
                }
            }
            return fail("unterminated DOCTYPE");
        }
        *skipped = false;
        return true;
    }

    bool parse_attrs(XmlElement& el) {
        while (true) {
            skip_ws();
            if (eof()) return fail("unterminated start tag");
            if (peek() == '>' || peek() == '/') return true;
            XmlAttr attr;
            if (!read_name(attr.name)) return false;
            skip_ws();
            if (eof() || peek() != '=') return fail("expected '='");
            ++pos;
            skip_ws();
            if (eof() || (peek() != '"' && peek() != '\'')) return fail("expected quote");
            char quote = peek();
            ++pos;
            while (!eof() && peek() != quote) {
                if (peek() == '<') return fail("'<' in attribute value");
                if (peek() == '&') {
                    if (!decode_entity(attr.value)) return false;
                } else {
                    attr.value += peek();
                    ++pos;
                }
            }
            if (eof()) return fail("unterminated attribute");
            ++pos;
            el.attrs.push_back(std::move(attr));
        }
    }

    bool parse_element(XmlElement& el, size_t depth) {
        if (depth > kMaxDepth) return fail("nesting too deep");
        el.begin = pos;
        ++pos;  // '<'
        if (!read_name(el.name)) return false;
        if (!parse_attrs(el)) return false;
        if (peek() == '/') {
            if (!has(2) || s[pos + 1] != '>') return fail("malformed empty-element tag");
            pos += 2;
            el.end = pos;
            return true;
        }
        ++pos;  // '>'
        while (true) {
            if (eof()) return fail("unterminated element <" + el.name + ">");
            if (peek() == '<') {
                if (starts("</")) {
                    pos += 2;
                    std::string close;
                    if (!read_name(close)) return false;
                    if (close != el.name) return fail("mismatched close tag </" + close + ">");
                    skip_ws();
                    if (eof() || peek() != '>') return fail("malformed close tag");
                    ++pos;
                    el.end = pos;
                    return true;
                }
                if (starts("<![CDATA[")) {
                    size_t close = s.find("]]>", pos + 9);
                    if (close == std::string_view::npos) return fail("unterminated CDATA");
                    el.text.append(s.substr(pos + 9, close - pos - 9));
                    pos = close + 3;
                    continue;
                }
                bool skipped = false;
                if (!skip_misc(&skipped)) return false;
                if (skipped) continue;
                XmlElement child;
                if (!parse_element(child, depth + 1)) return false;
                el.children.push_back(std::move(child));
            } else if (peek() == '&') {
                if (!decode_entity(el.text)) return false;
            } else {
                el.text += peek();
                ++pos;
            }
        }
    }

    bool parse_document(XmlElement& root) {
        while (true) {
            skip_ws();
            if (eof()) return fail("no root element");
            if (peek() != '<') return fail("text before root element");
            bool skipped = false;
            if (!skip_misc(&skipped)) return false;
            if (!skipped) break;
        }
        return parse_element(root, 0);
    }
};

}  // namespace

std::optional<XmlElement> xml_parse(std::string_view doc, std::string* err) {
    Parser p{doc};
    XmlElement root;
    if (!p.parse_document(root)) {
        if (err) *err = p.err;
        return std::nullopt;
    }
    return root;
}

bool xml_well_formed(std::string_view doc) {
    Parser p{doc};
    XmlElement root;
    if (!p.parse_document(root)) return false;
    // Only whitespace/comments/PIs may follow the root.
    while (true) {
        p.skip_ws();
        if (p.eof()) return true;
        if (p.peek() != '<') return false;
        bool skipped = false;
        if (!p.skip_misc(&skipped) || !skipped) return false;
    }
}

std::string xml_escape(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (char c : text) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string xml_escape_attr(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (char c : text) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&apos;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace ncore
