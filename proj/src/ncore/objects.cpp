#include "ncore/objects.hpp"

#include "ncore/errors.hpp"
#include "ncore/util.hpp"

namespace ncore {

bool valid_format_key(std::string_view key) {
    if (key.empty() || key.size() > 64) return false;
    for (char c : key)
        if (!((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
              c == '_'))
            return false;
    return true;
}

Handle handle_of(const DigitalObject& obj) {
    return std::visit([](const auto& o) { return o.handle; }, obj);
}

bool is_deleted(const DigitalObject& obj) {
    return std::visit([](const auto& o) { return o.deleted; }, obj);
}

void set_deleted(DigitalObject& obj) {
    std::visit([](auto& o) { o.deleted = true; }, obj);
}

Timestamp modified_of(const DigitalObject& obj) {
    return std::visit([](const auto& o) { return o.modified; }, obj);
}

void touch(DigitalObject& obj, Timestamp t) {
    std::visit([t](auto& o) { o.modified = t; }, obj);
}

namespace {

nlohmann::json common_json(const Handle& h, Timestamp created, Timestamp modified, bool deleted) {
    return {
        {"handle", h.text()},
        {"kind", std::string(kind_name(h.kind))},
        {"created", format_rfc3339(created)},
        {"modified", format_rfc3339(modified)},
        {"deleted", deleted},
    };
}

Handle parse_handle_field(const nlohmann::json& doc, const char* field) {
    auto h = Handle::parse(doc.at(field).get<std::string>());
    if (!h) fail(Err::InvariantViolation, std::string("bad handle in field ") + field);
    return *h;
}

Timestamp parse_ts_field(const nlohmann::json& doc, const char* field) {
    auto t = parse_rfc3339(doc.at(field).get<std::string>());
    if (!t) fail(Err::InvariantViolation, std::string("bad timestamp in field ") + field);
    return *t;
}

std::string b64_field(const nlohmann::json& doc, const std::string& value_desc,
                      const std::string& value) {
    auto decoded = base64_decode(value);
    if (!decoded) fail(Err::InvariantViolation, "invalid base64 in " + value_desc);
    (void)doc;
    return *decoded;
}

}  // namespace

nlohmann::json object_to_json(const DigitalObject& obj) {
    return std::visit(
        [](const auto& o) -> nlohmann::json {
            using T = std::decay_t<decltype(o)>;
            nlohmann::json j = common_json(o.handle, o.created, o.modified, o.deleted);
            if constexpr (std::is_same_v<T, ResourceObject>) {
                if (!o.url.empty()) j["url"] = o.url;
                if (o.content)
                    j["inline"] = {{"media_type", o.content->media_type},
                                   {"data", base64_encode(o.content->data)}};
            } else if constexpr (std::is_same_v<T, MetadataObject>) {
                j["target"] = o.target.text();
                nlohmann::json ds = nlohmann::json::object();
                for (const auto& [key, payload] : o.datastreams) ds[key] = base64_encode(payload);
                j["datastreams"] = ds;
            } else if constexpr (std::is_same_v<T, AggregationObject>) {
                j["label"] = o.label;
                j["owner"] = o.owner.text();
            } else if constexpr (std::is_same_v<T, AgentObject>) {
                j["display_name"] = o.display_name;
                j["public_key"] = base64_encode(o.public_key);
                j["active"] = o.active;
            }
            return j;
        },
        obj);
}

DigitalObject object_from_json(const nlohmann::json& doc) {
    Handle h = parse_handle_field(doc, "handle");
    auto kind = kind_from_name(doc.at("kind").get<std::string>());
    if (!kind || *kind != h.kind) fail(Err::InvariantViolation, "kind/handle mismatch");
    Timestamp created = parse_ts_field(doc, "created");
    Timestamp modified = parse_ts_field(doc, "modified");
    bool deleted = doc.value("deleted", false);

    switch (h.kind) {
        case Kind::Resource: {
            ResourceObject o{h, doc.value("url", std::string{}), std::nullopt, created, modified,
                             deleted};
            if (doc.contains("inline")) {
                const auto& inl = doc.at("inline");
                o.content = InlineContent{
                    inl.at("media_type").get<std::string>(),
                    b64_field(doc, "inline.data", inl.at("data").get<std::string>())};
            }
            return o;
        }
        case Kind::Metadata: {
            MetadataObject o{h, parse_handle_field(doc, "target"), {}, created, modified, deleted};
            for (const auto& [key, value] : doc.at("datastreams").items())
                o.datastreams[key] = b64_field(doc, "datastream " + key, value.get<std::string>());
            return o;
        }
        case Kind::Aggregation:
        case Kind::MetadataProvider:
            return AggregationObject{h, doc.at("label").get<std::string>(),
                                     parse_handle_field(doc, "owner"), created, modified, deleted};
        case Kind::Agent:
            return AgentObject{
                h,
                doc.at("display_name").get<std::string>(),
                b64_field(doc, "public_key", doc.at("public_key").get<std::string>()),
                doc.value("active", true),
                created,
                modified,
                deleted};
    }
    fail(Err::InvariantViolation, "unknown kind");
}

}  // namespace ncore
