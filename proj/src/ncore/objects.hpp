#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>

#include <json.hpp>

#include "ncore/handle.hpp"
#include "ncore/time.hpp"

namespace ncore {

// Datastream keys: [a-zA-Z0-9_]{1,64} ("nsdl_dc", "ADN", "dlese_anno")
bool valid_format_key(std::string_view key);

struct InlineContent {
    std::string media_type;
    std::string data;  // raw bytes
    bool operator==(const InlineContent&) const = default;
};

// Either specifies content by canonical URL (or synthetic urn: identity for
// harvested records lacking one) or contains it inline.
struct ResourceObject {
    Handle handle;
    std::string url;  // empty when inline content is present
    std::optional<InlineContent> content;
    Timestamp created = 0;
    Timestamp modified = 0;
    bool deleted = false;
};

struct MetadataObject {
    Handle handle;
    Handle target;  // the described Resource or Aggregation
    std::map<std::string, std::string> datastreams;  // format key -> payload bytes
    Timestamp created = 0;
    Timestamp modified = 0;
    bool deleted = false;
};

// Covers both Aggregation and MetadataProvider; the handle kind tells them
// apart so the exactly-one-provider rule is checkable by edge-target kind.
struct AggregationObject {
    Handle handle;
    std::string label;
    Handle owner;  // an Agent
    Timestamp created = 0;
    Timestamp modified = 0;
    bool deleted = false;
};

struct AgentObject {
    Handle handle;
    std::string display_name;
    std::string public_key;  // raw verification-key bytes
    bool active = true;
    Timestamp created = 0;
    Timestamp modified = 0;
    bool deleted = false;
};

using DigitalObject =
    std::variant<ResourceObject, MetadataObject, AggregationObject, AgentObject>;

Handle handle_of(const DigitalObject& obj);
bool is_deleted(const DigitalObject& obj);
void set_deleted(DigitalObject& obj);
Timestamp modified_of(const DigitalObject& obj);
void touch(DigitalObject& obj, Timestamp t);

// One JSON document per object, datastreams and binary fields base64-encoded.
// This is the CLI dump/load format and the API body shape.
nlohmann::json object_to_json(const DigitalObject& obj);
DigitalObject object_from_json(const nlohmann::json& doc);

}  // namespace ncore
