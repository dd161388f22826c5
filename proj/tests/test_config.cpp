#include "doctest.h"

#include <fstream>

#include "ncore/config.hpp"
#include "support/common.hpp"

using namespace ncore;
using namespace ncore::test;

using nlohmann::json;

namespace {

json minimal() { return json{{"data_dir", "/tmp/x"}}; }

std::optional<Err> parse_err(const json& doc) {
    return err_of([&] { ServiceConfig::from_json(doc); });
}

}  // namespace

TEST_CASE("defaults fill everything except data_dir") {
    auto c = ServiceConfig::from_json(minimal());
    CHECK(c.data_dir == "/tmp/x");
    CHECK(c.listen_host == "127.0.0.1");
    CHECK(c.listen_port == 8080);
    CHECK(c.role == "leader");
    CHECK(c.repo_id == "ncore.local");
    CHECK(c.public_view.empty());
    CHECK(c.oai_batch_size == 100);
    CHECK(c.auth_skew_seconds == 300);
    CHECK(c.nonce_window_seconds == 600);
    CHECK(c.checkpoint_interval == 1000);
    CHECK(c.journal.fsync == JournalStore::FsyncPolicy::Always);
    CHECK_FALSE(c.repository_options().follower);

    CHECK(parse_err(json::object()) == Err::ConfigInvalid);
    CHECK(parse_err(json::array()) == Err::ConfigInvalid);
}

TEST_CASE("unknown keys fail loudly at every level") {
    auto doc = minimal();
    doc["data_dirr"] = "/tmp/y";
    CHECK(parse_err(doc) == Err::ConfigInvalid);

    doc = minimal();
    doc["oai"] = {{"batchsize", 10}};
    CHECK(parse_err(doc) == Err::ConfigInvalid);

    doc = minimal();
    doc["auth"] = {{"skew", 10}};
    CHECK(parse_err(doc) == Err::ConfigInvalid);

    doc = minimal();
    doc["journal"] = {{"sync", "always"}};
    CHECK(parse_err(doc) == Err::ConfigInvalid);

    doc = minimal();
    doc["search"] = {{"propagate", json::object()}};
    CHECK(parse_err(doc) == Err::ConfigInvalid);
}

TEST_CASE("listen_addr splits host and port with validation") {
    auto doc = minimal();
    doc["listen_addr"] = "0.0.0.0:9443";
    auto c = ServiceConfig::from_json(doc);
    CHECK(c.listen_host == "0.0.0.0");
    CHECK(c.listen_port == 9443);

    for (const char* bad : {"nocolon", ":8080", "host:", "host:0",
                            "host:65536", "host:abc"}) {
        doc["listen_addr"] = bad;
        CAPTURE(bad);
        CHECK(parse_err(doc) == Err::ConfigInvalid);
    }
}

TEST_CASE("roles gate the leader address requirement") {
    auto doc = minimal();
    doc["role"] = "follower";
    CHECK(parse_err(doc) == Err::ConfigInvalid);  // no leader_addr

    doc["leader_addr"] = "http://10.0.0.1:8080";
    auto c = ServiceConfig::from_json(doc);
    CHECK(c.role == "follower");
    CHECK(c.repository_options().follower);

    doc["role"] = "observer";
    CHECK(parse_err(doc) == Err::ConfigInvalid);
}

TEST_CASE("repo_id is restricted to a DNS-friendly charset") {
    auto doc = minimal();
    for (const char* ok : {"lib.example.org", "a", "x-1.y"}) {
        doc["repo_id"] = ok;
        CHECK(ServiceConfig::from_json(doc).repo_id == ok);
    }
    for (const char* bad : {"", "UPPER", "under_score", "sp ace", "colon:"}) {
        doc["repo_id"] = bad;
        CAPTURE(bad);
        CHECK(parse_err(doc) == Err::ConfigInvalid);
    }
}

TEST_CASE("journal and numeric bounds are enforced") {
    auto doc = minimal();
    doc["journal"] = {{"fsync", "batch"}, {"batch_flush_every", 64},
                      {"entries_per_file", 1024}};
    auto c = ServiceConfig::from_json(doc);
    CHECK(c.journal.fsync == JournalStore::FsyncPolicy::Batch);
    CHECK(c.journal.batch_flush_every == 64);
    CHECK(c.journal.entries_per_file == 1024);

    doc["journal"] = {{"fsync", "sometimes"}};
    CHECK(parse_err(doc) == Err::ConfigInvalid);
    doc["journal"] = {{"batch_flush_every", 0}};
    CHECK(parse_err(doc) == Err::ConfigInvalid);

    doc = minimal();
    doc["checkpoint_interval"] = 0;
    CHECK(parse_err(doc) == Err::ConfigInvalid);
    doc = minimal();
    doc["oai"] = {{"batch_size", 0}};
    CHECK(parse_err(doc) == Err::ConfigInvalid);
    doc = minimal();
    doc["auth"] = {{"nonce_window_seconds", 0}};
    CHECK(parse_err(doc) == Err::ConfigInvalid);
    doc = minimal();
    doc["harvest_poll_seconds"] = -5;
    CHECK(parse_err(doc) == Err::ConfigInvalid);
}

TEST_CASE("search propagation and oai sets parse into maps") {
    auto doc = minimal();
    doc["search"] = {{"propagation",
                      {{"ncore:agg:12", {"subject", "rights"}},
                       {"ncore:agg:40", {"audience"}}}}};
    doc["oai_sets"] = {"ncore:agg:12", "ncore:agg:40"};
    auto c = ServiceConfig::from_json(doc);
    REQUIRE(c.propagation.size() == 2);
    CHECK(c.propagation.at("ncore:agg:12") ==
          std::vector<std::string>{"subject", "rights"});
    CHECK(c.oai_sets == std::vector<std::string>{"ncore:agg:12", "ncore:agg:40"});
}

TEST_CASE("config files are read and validated from disk") {
    TempDir tmp;
    std::string path = tmp.sub("config.json");
    {
        std::ofstream out(path);
        out << R"({"data_dir": "/tmp/z", "listen_addr": "127.0.0.1:9000"})";
    }
    auto c = ServiceConfig::load_file(path);
    CHECK(c.data_dir == "/tmp/z");
    CHECK(c.listen_port == 9000);

    CHECK(err_of([&] { ServiceConfig::load_file(tmp.sub("absent.json")); }) ==
          Err::IoError);

    std::string broken = tmp.sub("broken.json");
    {
        std::ofstream out(broken);
        out << "{not json";
    }
    CHECK(err_of([&] { ServiceConfig::load_file(broken); }) == Err::ConfigInvalid);
}
