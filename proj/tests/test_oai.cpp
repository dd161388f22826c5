#include "doctest.h"

#include "ncore/crypto.hpp"
#include "ncore/oai_provider.hpp"
#include "support/common.hpp"
#include "support/fixtures.hpp"
#include "support/xmlcheck.hpp"

using namespace ncore;
using namespace ncore::test;

namespace {

// Every response the provider emits has to survive the structural validator.
void expect_clean(const std::string& xml) {
    auto problems = check_oai_response(xml);
    CAPTURE(xml);
    for (const auto& p : problems) {
        CAPTURE(p);
        CHECK(problems.empty());
        return;
    }
    CHECK(problems.empty());
}

constexpr Timestamp kT0 = 1577836800;  // 2020-01-01T00:00:00Z

struct OaiWorld {
    TempDir tmp;
    Timestamp now = kT0;
    std::unique_ptr<Repository> repo;
    Handle admin, prov, md_agg, coll;
    Handle r1, r2, r3;
    Handle md1, md2, md3;

    OaiWorld() {
        RepositoryOptions opt = fast_options(tmp.sub("r"));
        opt.clock = [this] { return now; };
        repo = Repository::open(opt);
        admin = repo->bootstrap_admin("admin", generate_keypair().public_key);
        prov = repo->create_aggregation(admin, true, "metadata provider", admin);
        md_agg = repo->create_aggregation(admin, false, "all metadata", admin);
        coll = repo->create_aggregation(admin, false, "earth science", admin);
        r1 = repo->create_resource(admin, {.url = "http://example.com/1"});
        r2 = repo->create_resource(admin, {.url = "http://example.com/2"});
        r3 = repo->create_resource(admin, {.url = "http://example.com/3"});
        now = kT0 + 1 * 3600;
        md1 = add_md(r1, dc_payload("glaciers", "http://example.com/1"));
        now = kT0 + 2 * 3600;
        md2 = add_md(r2, dc_payload("rivers", "http://example.com/2"));
        now = kT0 + 3 * 3600;
        md3 = add_md(r3, dc_payload("deltas", "http://example.com/3"));
        repo->assert_rel(admin, member_of(r1, coll));
    }

    Handle add_md(Handle target, const std::string& payload) {
        Handle md = repo->create_metadata(
            admin, {.target = target, .datastreams = {{"nsdl_dc", payload}}});
        repo->assert_rel(admin, member_of(md, prov));
        repo->assert_rel(admin, member_of(md, md_agg));
        repo->assert_rel(admin, metadata_for(md, target));
        return md;
    }

    std::unique_ptr<OaiProvider> make_provider(std::size_t batch = 100,
                                               int64_t ttl = 86400) {
        OaiConfig cfg;
        cfg.repo_id = "lib.example.org";
        cfg.repository_name = "Example Library";
        cfg.admin_email = "admin@example.org";
        cfg.base_url = "http://lib.example.org/oai";
        cfg.batch_size = batch;
        cfg.token_ttl_seconds = ttl;
        auto p = std::make_unique<OaiProvider>(*repo, cfg, [this] { return now; });
        p->register_set(md_agg);
        p->register_set(coll);
        return p;
    }

    std::string oai_id(Handle md) const {
        return "oai:lib.example.org:" + md.text();
    }
};

OaiParams params(std::initializer_list<std::pair<std::string, std::string>> kv) {
    OaiParams p;
    for (auto& [k, v] : kv) p.emplace(k, v);
    return p;
}

bool has(const std::string& hay, const std::string& needle) {
    return hay.find(needle) != std::string::npos;
}

std::string token_of(const std::string& xml) {
    auto open = xml.find("<resumptionToken");
    if (open == std::string::npos) return "";
    auto gt = xml.find('>', open);
    if (xml[gt - 1] == '/') return "";
    auto close = xml.find("</resumptionToken>", gt);
    return xml.substr(gt + 1, close - gt - 1);
}

}  // namespace

TEST_CASE("Identify reports repository facts") {
    OaiWorld w;
    auto pp = w.make_provider(); auto& p = *pp;
    auto xml = p.handle_request(params({{"verb", "Identify"}}));
    expect_clean(xml);
    CHECK(has(xml, "<repositoryName>Example Library</repositoryName>"));
    CHECK(has(xml, "<baseURL>http://lib.example.org/oai</baseURL>"));
    CHECK(has(xml, "<protocolVersion>2.0</protocolVersion>"));
    CHECK(has(xml, "<adminEmail>admin@example.org</adminEmail>"));
    // Earliest datestamp is the oldest metadata modification.
    CHECK(has(xml, "<earliestDatestamp>" + format_rfc3339(kT0 + 3600) +
                       "</earliestDatestamp>"));
    CHECK(has(xml, "<deletedRecord>persistent</deletedRecord>"));
}

TEST_CASE("ListMetadataFormats covers global and per-record variants") {
    OaiWorld w;
    w.repo->add_datastream(w.admin, w.md1, "oai_dc",
                           "<oai_dc><title>glaciers</title></oai_dc>");
    auto pp = w.make_provider(); auto& p = *pp;

    auto all = p.handle_request(params({{"verb", "ListMetadataFormats"}}));
    expect_clean(all);
    CHECK(has(all, "<metadataPrefix>nsdl_dc</metadataPrefix>"));
    CHECK(has(all, "<metadataPrefix>oai_dc</metadataPrefix>"));

    auto one = p.handle_request(params(
        {{"verb", "ListMetadataFormats"}, {"identifier", w.oai_id(w.md2)}}));
    expect_clean(one);
    CHECK(has(one, "nsdl_dc"));
    CHECK_FALSE(has(one, "oai_dc"));

    for (const std::string bad :
         {std::string("oai:lib.example.org:ncore:md:9999"),
          std::string("oai:other.org:") + w.md1.text(), std::string("junk"),
          std::string("oai:lib.example.org:") + w.r1.text()}) {
        auto resp = p.handle_request(
            params({{"verb", "ListMetadataFormats"}, {"identifier", bad}}));
        expect_clean(resp);
        CHECK(has(resp, "idDoesNotExist"));
    }
}

TEST_CASE("ListSets names registered aggregations") {
    OaiWorld w;
    auto pp = w.make_provider(); auto& p = *pp;
    auto xml = p.handle_request(params({{"verb", "ListSets"}}));
    expect_clean(xml);
    CHECK(has(xml, "<setSpec>" + OaiProvider::set_spec_of(w.md_agg) + "</setSpec>"));
    CHECK(has(xml, "<setName>all metadata</setName>"));
    CHECK(has(xml, "<setName>earth science</setName>"));
    // setSpec swaps handle colons for underscores.
    CHECK(OaiProvider::set_spec_of(w.md_agg).find(':') == std::string::npos);

    auto tok = p.handle_request(
        params({{"verb", "ListSets"}, {"resumptionToken", "zzz"}}));
    expect_clean(tok);
    CHECK(has(tok, "badResumptionToken"));

    OaiConfig cfg;
    cfg.repo_id = "x";
    cfg.repository_name = "bare";
    cfg.admin_email = "a@b";
    cfg.base_url = "http://x/oai";
    OaiProvider none(*w.repo, cfg);
    auto empty = none.handle_request(params({{"verb", "ListSets"}}));
    expect_clean(empty);
    CHECK(has(empty, "noSetHierarchy"));
}

TEST_CASE("GetRecord returns live, deleted, and impossible records") {
    OaiWorld w;
    auto pp = w.make_provider(); auto& p = *pp;

    auto live = p.handle_request(params(
        {{"verb", "GetRecord"}, {"identifier", w.oai_id(w.md1)},
         {"metadataPrefix", "nsdl_dc"}}));
    expect_clean(live);
    CHECK(has(live, "<identifier>" + w.oai_id(w.md1) + "</identifier>"));
    CHECK(has(live, "<datestamp>" + format_rfc3339(kT0 + 3600) + "</datestamp>"));
    CHECK(has(live, "<dc:title>glaciers</dc:title>"));
    // md1 sits in the provider set, and its target r1 is in the collection.
    CHECK(has(live, "<setSpec>" + OaiProvider::set_spec_of(w.md_agg) + "</setSpec>"));
    CHECK(has(live, "<setSpec>" + OaiProvider::set_spec_of(w.coll) + "</setSpec>"));

    w.now = kT0 + 10 * 3600;
    w.repo->tombstone(w.admin, w.md2);
    auto dead = p.handle_request(params(
        {{"verb", "GetRecord"}, {"identifier", w.oai_id(w.md2)},
         {"metadataPrefix", "nsdl_dc"}}));
    expect_clean(dead);
    CHECK(has(dead, "<header status=\"deleted\">"));
    CHECK(has(dead, format_rfc3339(kT0 + 10 * 3600)));
    CHECK_FALSE(has(dead, "<metadata>"));

    auto wrong = p.handle_request(params(
        {{"verb", "GetRecord"}, {"identifier", w.oai_id(w.md1)},
         {"metadataPrefix", "marcxml"}}));
    expect_clean(wrong);
    CHECK(has(wrong, "cannotDisseminateFormat"));

    auto ghost = p.handle_request(params(
        {{"verb", "GetRecord"}, {"identifier", "oai:lib.example.org:ncore:md:424242"},
         {"metadataPrefix", "nsdl_dc"}}));
    expect_clean(ghost);
    CHECK(has(ghost, "idDoesNotExist"));

    auto missing = p.handle_request(
        params({{"verb", "GetRecord"}, {"identifier", w.oai_id(w.md1)}}));
    expect_clean(missing);
    CHECK(has(missing, "badArgument"));
}

TEST_CASE("ListRecords selects by datestamp window and set") {
    OaiWorld w;
    auto pp = w.make_provider(); auto& p = *pp;

    auto all = p.handle_request(
        params({{"verb", "ListRecords"}, {"metadataPrefix", "nsdl_dc"}}));
    expect_clean(all);
    CHECK(has(all, "glaciers"));
    CHECK(has(all, "rivers"));
    CHECK(has(all, "deltas"));
    // Ascending datestamp order.
    CHECK(all.find("glaciers") < all.find("rivers"));
    CHECK(all.find("rivers") < all.find("deltas"));

    auto from = p.handle_request(params(
        {{"verb", "ListRecords"}, {"metadataPrefix", "nsdl_dc"},
         {"from", format_rfc3339(kT0 + 2 * 3600)}}));
    expect_clean(from);
    CHECK_FALSE(has(from, "glaciers"));
    CHECK(has(from, "rivers"));  // inclusive bound
    CHECK(has(from, "deltas"));

    auto until = p.handle_request(params(
        {{"verb", "ListRecords"}, {"metadataPrefix", "nsdl_dc"},
         {"until", "2020-01-01"}}));
    expect_clean(until);
    CHECK(has(until, "glaciers"));
    CHECK(has(until, "deltas"));  // date-only until spans the whole day

    auto in_set = p.handle_request(params(
        {{"verb", "ListRecords"}, {"metadataPrefix", "nsdl_dc"},
         {"set", OaiProvider::set_spec_of(w.coll)}}));
    expect_clean(in_set);
    CHECK(has(in_set, "glaciers"));
    CHECK_FALSE(has(in_set, "rivers"));

    auto no_set = p.handle_request(params(
        {{"verb", "ListRecords"}, {"metadataPrefix", "nsdl_dc"},
         {"set", "ncore_agg_404"}}));
    expect_clean(no_set);
    CHECK(has(no_set, "noRecordsMatch"));

    auto none = p.handle_request(params(
        {{"verb", "ListRecords"}, {"metadataPrefix", "nsdl_dc"},
         {"from", "2031-01-01"}}));
    expect_clean(none);
    CHECK(has(none, "noRecordsMatch"));

    for (auto bad : {params({{"verb", "ListRecords"}, {"metadataPrefix", "nsdl_dc"},
                             {"from", "2020-01-01"},
                             {"until", "2020-01-02T00:00:00Z"}}),
                     params({{"verb", "ListRecords"}, {"metadataPrefix", "nsdl_dc"},
                             {"from", "2020-02-01"}, {"until", "2020-01-01"}}),
                     params({{"verb", "ListRecords"}, {"metadataPrefix", "nsdl_dc"},
                             {"from", "01/01/2020"}})}) {
        auto resp = p.handle_request(bad);
        expect_clean(resp);
        CHECK(has(resp, "badArgument"));
    }

    auto badfmt = p.handle_request(
        params({{"verb", "ListRecords"}, {"metadataPrefix", "marcxml"}}));
    expect_clean(badfmt);
    CHECK(has(badfmt, "cannotDisseminateFormat"));
}

TEST_CASE("deleted records surface as tombstoned headers in lists") {
    OaiWorld w;
    w.now = kT0 + 5 * 3600;
    w.repo->tombstone(w.admin, w.md1);
    auto pp = w.make_provider(); auto& p = *pp;

    auto xml = p.handle_request(
        params({{"verb", "ListRecords"}, {"metadataPrefix", "nsdl_dc"}}));
    expect_clean(xml);
    CHECK(has(xml, "<header status=\"deleted\">"));
    CHECK_FALSE(has(xml, "glaciers"));
    CHECK(has(xml, w.oai_id(w.md1)));

    auto ids = p.handle_request(
        params({{"verb", "ListIdentifiers"}, {"metadataPrefix", "nsdl_dc"}}));
    expect_clean(ids);
    CHECK(has(ids, "<header status=\"deleted\">"));
    CHECK(has(ids, w.oai_id(w.md2)));
    CHECK_FALSE(has(ids, "<metadata>"));
}

TEST_CASE("paging hands out stable snapshots via resumption tokens") {
    OaiWorld w;
    for (int i = 4; i <= 7; ++i) {
        w.now = kT0 + i * 3600;
        Handle r = w.repo->create_resource(
            w.admin, {.url = "http://example.com/" + std::to_string(i)});
        w.add_md(r, dc_payload("record " + std::to_string(i), ""));
    }
    // 7 records, pages of 3.
    auto pp = w.make_provider(3); auto& p = *pp;

    auto page1 = p.handle_request(
        params({{"verb", "ListRecords"}, {"metadataPrefix", "nsdl_dc"}}));
    expect_clean(page1);
    CHECK(has(page1, "completeListSize=\"7\""));
    CHECK(has(page1, "cursor=\"0\""));
    std::string tok1 = token_of(page1);
    REQUIRE(!tok1.empty());

    // A mutation between pages must not disturb the materialized list.
    w.now = kT0 + 20 * 3600;
    Handle r8 = w.repo->create_resource(w.admin, {.url = "http://example.com/8"});
    w.add_md(r8, dc_payload("record 8", ""));

    auto page2 = p.handle_request(
        params({{"verb", "ListRecords"}, {"resumptionToken", tok1}}));
    expect_clean(page2);
    CHECK(has(page2, "completeListSize=\"7\""));
    CHECK(has(page2, "cursor=\"3\""));
    CHECK_FALSE(has(page2, "record 8"));
    std::string tok2 = token_of(page2);
    REQUIRE(!tok2.empty());

    auto page3 = p.handle_request(
        params({{"verb", "ListRecords"}, {"resumptionToken", tok2}}));
    expect_clean(page3);
    CHECK(has(page3, "cursor=\"6\""));
    // Final page closes the list with an empty token element.
    CHECK(token_of(page3).empty());
    CHECK(has(page3, "<resumptionToken"));

    // Token must travel alone.
    auto mixed = p.handle_request(params({{"verb", "ListRecords"},
                                          {"resumptionToken", tok2},
                                          {"metadataPrefix", "nsdl_dc"}}));
    expect_clean(mixed);
    CHECK(has(mixed, "badArgument"));

    auto garbage = p.handle_request(
        params({{"verb", "ListRecords"}, {"resumptionToken", "!!not-base64!!"}}));
    expect_clean(garbage);
    CHECK(has(garbage, "badResumptionToken"));
}

TEST_CASE("resumption tokens expire with the provider clock") {
    OaiWorld w;
    for (int i = 4; i <= 9; ++i) {
        Handle r = w.repo->create_resource(
            w.admin, {.url = "http://example.com/" + std::to_string(i)});
        w.add_md(r, dc_payload("bulk " + std::to_string(i), ""));
    }
    auto pp = w.make_provider(4, /*ttl=*/60); auto& p = *pp;
    auto page1 = p.handle_request(
        params({{"verb", "ListIdentifiers"}, {"metadataPrefix", "nsdl_dc"}}));
    expect_clean(page1);
    std::string tok = token_of(page1);
    REQUIRE(!tok.empty());

    w.now += 3600;  // far past the 60 second ttl
    auto expired = p.handle_request(
        params({{"verb", "ListIdentifiers"}, {"resumptionToken", tok}}));
    expect_clean(expired);
    CHECK(has(expired, "badResumptionToken"));
}

TEST_CASE("protocol errors are reported without echoing bad arguments") {
    OaiWorld w;
    auto pp = w.make_provider(); auto& p = *pp;

    auto noverb = p.handle_request(params({}));
    expect_clean(noverb);
    CHECK(has(noverb, "badVerb"));
    CHECK(has(noverb, "<request>"));  // attribute-free

    auto badverb = p.handle_request(params({{"verb", "Enumerate"}}));
    expect_clean(badverb);
    CHECK(has(badverb, "badVerb"));

    auto illegal = p.handle_request(
        params({{"verb", "Identify"}, {"metadataPrefix", "nsdl_dc"}}));
    expect_clean(illegal);
    CHECK(has(illegal, "badArgument"));
    CHECK(has(illegal, "<request>"));

    auto repeated = p.handle_request(params({{"verb", "ListRecords"},
                                             {"metadataPrefix", "nsdl_dc"},
                                             {"metadataPrefix", "oai_dc"}}));
    expect_clean(repeated);
    CHECK(has(repeated, "badArgument"));

    auto empty_arg = p.handle_request(
        params({{"verb", "ListRecords"}, {"metadataPrefix", ""}}));
    expect_clean(empty_arg);
    CHECK(has(empty_arg, "badArgument"));

    auto no_prefix = p.handle_request(params({{"verb", "ListRecords"}}));
    expect_clean(no_prefix);
    CHECK(has(no_prefix, "badArgument"));
}

TEST_CASE("embedded payloads drop their XML declarations") {
    CHECK(xml_payload_for_embedding("<?xml version=\"1.0\"?>\n<a/>") == "<a/>");
    CHECK(xml_payload_for_embedding("  <a/>  ") == "<a/>");
    CHECK(xml_payload_for_embedding("<a/>") == "<a/>");
}
