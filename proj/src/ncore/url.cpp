#include "ncore/url.hpp"

#include <algorithm>
#include <vector>

#include "ncore/errors.hpp"
#include "ncore/util.hpp"

namespace ncore {

namespace {

bool is_unreserved(unsigned char c) {
    return is_ascii_alnum(static_cast<char>(c)) || c == '-' || c == '.' || c == '_' || c == '~';
}

int hex_val(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

// Decode unreserved escapes, uppercase the hex of everything else.
std::string normalize_escapes(std::string_view comp) {
    static const char* digits = "0123456789ABCDEF";
    std::string out;
    out.reserve(comp.size());
    for (size_t i = 0; i < comp.size(); ++i) {
        if (comp[i] != '%') {
            out.push_back(comp[i]);
            continue;
        }
        if (i + 2 >= comp.size() || hex_val(comp[i + 1]) < 0 || hex_val(comp[i + 2]) < 0)
            fail(Err::UnparseableUrl, "malformed percent-escape");
        unsigned char byte =
            static_cast<unsigned char>(hex_val(comp[i + 1]) * 16 + hex_val(comp[i + 2]));
        if (is_unreserved(byte)) {
            out.push_back(static_cast<char>(byte));
        } else {
            out.push_back('%');
            out.push_back(digits[byte >> 4]);
            out.push_back(digits[byte & 0xf]);
        }
        i += 2;
    }
    return out;
}

}  // namespace

bool is_http_url(std::string_view s) {
    return starts_with_ci(s, "http://") || starts_with_ci(s, "https://");
}

std::string normalize_url(std::string_view raw) {
    size_t scheme_end = raw.find("://");
    if (scheme_end == std::string_view::npos) fail(Err::UnparseableUrl, "missing scheme");
    std::string scheme = to_lower(raw.substr(0, scheme_end));
    if (scheme != "http" && scheme != "https")
        fail(Err::UnparseableUrl, "scheme must be http or https");

    std::string_view rest = raw.substr(scheme_end + 3);
    size_t frag = rest.find('#');
    if (frag != std::string_view::npos) rest = rest.substr(0, frag);

    size_t path_start = rest.find_first_of("/?");
    std::string_view authority =
        path_start == std::string_view::npos ? rest : rest.substr(0, path_start);
    std::string_view path_query =
        path_start == std::string_view::npos ? std::string_view{} : rest.substr(path_start);

    if (authority.empty()) fail(Err::UnparseableUrl, "empty host");

    std::string_view userinfo;
    size_t at = authority.rfind('@');
    if (at != std::string_view::npos) {
        userinfo = authority.substr(0, at + 1);
        authority = authority.substr(at + 1);
    }

    std::string host;
    std::string_view port;
    if (!authority.empty() && authority[0] == '[') {
        size_t close = authority.find(']');
        if (close == std::string_view::npos) fail(Err::UnparseableUrl, "unterminated IPv6 host");
        host = to_lower(authority.substr(0, close + 1));
        if (close + 1 < authority.size()) {
            if (authority[close + 1] != ':') fail(Err::UnparseableUrl, "bad authority");
            port = authority.substr(close + 2);
        }
    } else {
        size_t colon = authority.find(':');
        if (colon == std::string_view::npos) {
            host = to_lower(authority);
        } else {
            host = to_lower(authority.substr(0, colon));
            port = authority.substr(colon + 1);
        }
    }
    if (host.empty()) fail(Err::UnparseableUrl, "empty host");
    for (char c : port)
        if (c < '0' || c > '9') fail(Err::UnparseableUrl, "non-numeric port");

    bool default_port =
        port.empty() || (scheme == "http" && port == "80") || (scheme == "https" && port == "443");

    std::string_view path = path_query;
    std::string_view query;
    size_t qpos = path_query.find('?');
    if (qpos != std::string_view::npos) {
        query = path_query.substr(qpos + 1);
        path = path_query.substr(0, qpos);
    }

    std::string out = scheme;
    out += "://";
    out += userinfo;
    out += host;
    if (!default_port) {
        out += ':';
        out += port;
    }
    out += path.empty() ? std::string("/") : normalize_escapes(path);

    if (qpos != std::string_view::npos && !query.empty()) {
        std::vector<std::string> pairs;
        for (auto& kv : split(query, '&'))
            if (!kv.empty()) pairs.push_back(normalize_escapes(kv));
        std::stable_sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) {
            auto key = [](std::string_view s) { return s.substr(0, s.find('=')); };
            auto ka = key(a), kb = key(b);
            return ka != kb ? ka < kb : a < b;
        });
        if (!pairs.empty()) {
            out += '?';
            for (size_t i = 0; i < pairs.size(); ++i) {
                if (i) out += '&';
                out += pairs[i];
            }
        }
    }
    return out;
}

}  // namespace ncore
