#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace ncore {

enum class Kind : uint8_t {
    Resource,
    Metadata,
    Aggregation,
    MetadataProvider,
    Agent,
};

std::string_view kind_prefix(Kind k);  // res, md, agg, mdp, agt
std::string_view kind_name(Kind k);    // resource, metadata, ...
std::optional<Kind> kind_from_name(std::string_view name);

// Identity of a digital object: kind + repository-minted serial. Serials come
// from one global counter and are never reused, so the pair is unique for the
// life of the repository. Canonical text form "ncore:<prefix>:<serial>".
struct Handle {
    Kind kind{Kind::Resource};
    uint64_t serial{0};

    auto operator<=>(const Handle&) const = default;

    bool is_aggregation_like() const {
        return kind == Kind::Aggregation || kind == Kind::MetadataProvider;
    }

    std::string text() const;
    static std::optional<Handle> parse(std::string_view text);
};

inline constexpr Handle kNoHandle{Kind::Resource, 0};

}  // namespace ncore

template <>
struct std::hash<ncore::Handle> {
    size_t operator()(const ncore::Handle& h) const noexcept {
        return std::hash<uint64_t>()(h.serial * 8 + static_cast<uint64_t>(h.kind));
    }
};
