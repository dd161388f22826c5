#include "doctest.h"

#include "ncore/errors.hpp"
#include "ncore/url.hpp"

using namespace ncore;

TEST_CASE("url normalization canonicalizes equivalent spellings") {
    CHECK(normalize_url("HTTP://Example.COM") == "http://example.com/");
    CHECK(normalize_url("http://example.com:80/a") == "http://example.com/a");
    CHECK(normalize_url("https://example.com:443/a") == "https://example.com/a");
    CHECK(normalize_url("http://example.com:8080/a") == "http://example.com:8080/a");
    CHECK(normalize_url("http://example.com/a#frag") == "http://example.com/a");
    CHECK(normalize_url("http://example.com/%7euser") == "http://example.com/~user");
    CHECK(normalize_url("http://example.com/a%2fb") == "http://example.com/a%2Fb");
    CHECK(normalize_url("http://example.com/?b=2&a=1") == "http://example.com/?a=1&b=2");
}

TEST_CASE("distinct resources stay distinct") {
    CHECK(normalize_url("http://example.com/a") != normalize_url("http://example.com/b"));
    CHECK(normalize_url("http://example.com/a?x=1") !=
          normalize_url("http://example.com/a"));
}

TEST_CASE("normalization is idempotent") {
    for (const char* raw :
         {"HTTP://Example.COM:80/%7Euser/Path%2FSeg?b=2&a=1#top",
          "https://h.example/x%20y", "http://example.com"}) {
        std::string once = normalize_url(raw);
        CHECK(normalize_url(once) == once);
    }
}

TEST_CASE("non-http identities are rejected") {
    for (const char* raw : {"", "ftp://example.com/", "example.com/a",
                            "http://", "urn:ncore:harvest:s:1"}) {
        CHECK_THROWS_AS(normalize_url(raw), NcoreError);
    }
    CHECK(is_http_url("http://example.com"));
    CHECK(is_http_url("https://example.com"));
    CHECK_FALSE(is_http_url("urn:x"));
}
