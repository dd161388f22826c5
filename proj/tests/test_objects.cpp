#include "doctest.h"

#include "ncore/objects.hpp"

using namespace ncore;

TEST_CASE("object json round trip preserves every field") {
    ResourceObject r;
    r.handle = {Kind::Resource, 3};
    r.url = "http://example.com/a";
    r.created = 100;
    r.modified = 200;
    DigitalObject obj = r;
    DigitalObject back = object_from_json(object_to_json(obj));
    CHECK(std::get<ResourceObject>(back).url == r.url);
    CHECK(handle_of(back) == r.handle);
    CHECK(modified_of(back) == 200);

    ResourceObject ri;
    ri.handle = {Kind::Resource, 4};
    ri.content = InlineContent{"text/plain", std::string("\x00\x01raw", 5)};
    DigitalObject back2 = object_from_json(object_to_json(ri));
    CHECK(std::get<ResourceObject>(back2).content == ri.content);

    MetadataObject m;
    m.handle = {Kind::Metadata, 5};
    m.target = {Kind::Resource, 3};
    m.datastreams["nsdl_dc"] = "<x/>";
    m.deleted = true;
    DigitalObject back3 = object_from_json(object_to_json(m));
    CHECK(std::get<MetadataObject>(back3).datastreams == m.datastreams);
    CHECK(is_deleted(back3));

    AggregationObject a;
    a.handle = {Kind::MetadataProvider, 6};
    a.label = "dlese";
    a.owner = {Kind::Agent, 1};
    DigitalObject back4 = object_from_json(object_to_json(a));
    CHECK(std::get<AggregationObject>(back4).label == "dlese");
    CHECK(std::get<AggregationObject>(back4).handle.kind == Kind::MetadataProvider);

    AgentObject g;
    g.handle = {Kind::Agent, 7};
    g.display_name = "carol";
    g.public_key = std::string(32, '\x07');
    g.active = false;
    DigitalObject back5 = object_from_json(object_to_json(g));
    CHECK(std::get<AgentObject>(back5).public_key == g.public_key);
    CHECK_FALSE(std::get<AgentObject>(back5).active);
}

TEST_CASE("format keys") {
    CHECK(valid_format_key("nsdl_dc"));
    CHECK(valid_format_key("ADN"));
    CHECK(valid_format_key("a"));
    CHECK_FALSE(valid_format_key(""));
    CHECK_FALSE(valid_format_key("has space"));
    CHECK_FALSE(valid_format_key("dash-ed"));
    CHECK_FALSE(valid_format_key(std::string(65, 'a')));
}

TEST_CASE("touch updates modified only") {
    ResourceObject r;
    r.handle = {Kind::Resource, 1};
    r.created = 5;
    r.modified = 5;
    DigitalObject obj = r;
    touch(obj, 9);
    CHECK(modified_of(obj) == 9);
    CHECK(std::get<ResourceObject>(obj).created == 5);
}
