#include "doctest.h"

#include "ncore/atom.hpp"
#include "ncore/xml.hpp"
#include "support/xmlcheck.hpp"

using namespace ncore;
using namespace ncore::test;

TEST_CASE("atom feeds are structurally valid with and without entries") {
    auto empty = atom_feed("urn:feed:1", "Recent changes", 1600000000,
                           "http://lib.example.org/feed", std::nullopt, {});
    CHECK(check_atom_feed(empty).empty());

    std::vector<AtomEntry> entries = {
        {.id = "ncore:res:7",
         .title = "Ocean currents",
         .updated = 1600000100,
         .link = "http://site.org/oceans",
         .summary = "hourly drift data"},
        {.id = "ncore:res:8", .title = "Volcanism", .updated = 1600000200},
    };
    auto feed = atom_feed("urn:feed:1", "Recent changes", 1600000200,
                          "http://lib.example.org/feed",
                          "http://lib.example.org/feed?page=2", entries);
    auto problems = check_atom_feed(feed);
    for (const auto& p : problems) { CAPTURE(p); CHECK(false); }
    CHECK(problems.empty());

    CHECK(feed.find("<id>ncore:res:7</id>") != std::string::npos);
    CHECK(feed.find("rel=\"next\"") != std::string::npos);
    CHECK(feed.find("href=\"http://lib.example.org/feed?page=2\"") !=
          std::string::npos);
    CHECK(feed.find("<summary>hourly drift data</summary>") != std::string::npos);
    // Optional parts stay absent rather than rendering empty elements.
    CHECK(empty.find("rel=\"next\"") == std::string::npos);
    CHECK(feed.find("<updated>2020-09-13T12:28:20Z</updated>") != std::string::npos);
}

TEST_CASE("feed text is escaped, not trusted") {
    std::vector<AtomEntry> entries = {{
        .id = "x&y",
        .title = "<script>alert(1)</script>",
        .updated = 0,
        .link = "http://a/\"quoted\"",
        .summary = "a < b & c",
    }};
    auto feed = atom_feed("urn:f", "Titles & more", 0, "http://a?b=1&c=2",
                          std::nullopt, entries);
    CHECK(check_atom_feed(feed).empty());
    CHECK(feed.find("<script>") == std::string::npos);
    CHECK(feed.find("&lt;script&gt;") != std::string::npos);
    CHECK(feed.find("Titles &amp; more") != std::string::npos);
    // Round-trips through the XML parser with content intact.
    auto doc = xml_parse(feed);
    REQUIRE(doc.has_value());
    const XmlElement* entry = doc->first("entry");
    REQUIRE(entry != nullptr);
    CHECK(entry->first("title")->text == "<script>alert(1)</script>");
    CHECK(entry->first("summary")->text == "a < b & c");
}
