#include "ncore/handle.hpp"

namespace ncore {

std::string_view kind_prefix(Kind k) {
    switch (k) {
        case Kind::Resource: return "res";
        case Kind::Metadata: return "md";
        case Kind::Aggregation: return "agg";
        case Kind::MetadataProvider: return "mdp";
        case Kind::Agent: return "agt";
    }
    return "?";
}

std::string_view kind_name(Kind k) {
    switch (k) {
        case Kind::Resource: return "resource";
        case Kind::Metadata: return "metadata";
        case Kind::Aggregation: return "aggregation";
        case Kind::MetadataProvider: return "metadata_provider";
        case Kind::Agent: return "agent";
    }
    return "?";
}

std::optional<Kind> kind_from_name(std::string_view name) {
    if (name == "resource") return Kind::Resource;
    if (name == "metadata") return Kind::Metadata;
    if (name == "aggregation") return Kind::Aggregation;
    if (name == "metadata_provider") return Kind::MetadataProvider;
    if (name == "agent") return Kind::Agent;
    return std::nullopt;
}

std::string Handle::text() const {
    std::string out = "ncore:";
    out += kind_prefix(kind);
    out += ':';
    out += std::to_string(serial);
    return out;
}

std::optional<Handle> Handle::parse(std::string_view text) {
    constexpr std::string_view scheme = "ncore:";
    if (text.substr(0, scheme.size()) != scheme) return std::nullopt;
    text.remove_prefix(scheme.size());
    size_t colon = text.find(':');
    if (colon == std::string_view::npos) return std::nullopt;
    std::string_view prefix = text.substr(0, colon);
    std::string_view digits = text.substr(colon + 1);
    Kind k;
    if (prefix == "res") k = Kind::Resource;
    else if (prefix == "md") k = Kind::Metadata;
    else if (prefix == "agg") k = Kind::Aggregation;
    else if (prefix == "mdp") k = Kind::MetadataProvider;
    else if (prefix == "agt") k = Kind::Agent;
    else return std::nullopt;
    if (digits.empty() || digits.size() > 20) return std::nullopt;
    // Leading zeros would break round-tripping; reject them.
    if (digits.size() > 1 && digits[0] == '0') return std::nullopt;
    uint64_t serial = 0;
    for (char c : digits) {
        if (c < '0' || c > '9') return std::nullopt;
        uint64_t next = serial * 10 + static_cast<uint64_t>(c - '0');
        if (next < serial) return std::nullopt;  // overflow
        serial = next;
    }
    return Handle{k, serial};
}

}  // namespace ncore
