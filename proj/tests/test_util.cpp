#include "doctest.h"

#include "ncore/util.hpp"

using namespace ncore;

TEST_CASE("base64 round trip") {
    CHECK(base64_encode("") == "");
    CHECK(base64_encode("f") == "Zg==");
    CHECK(base64_encode("fo") == "Zm8=");
    CHECK(base64_encode("foo") == "Zm9v");
    CHECK(base64_encode("foobar") == "Zm9vYmFy");

    std::vector<std::string> cases = {"", "a", "ab", "abc", "hello world",
                                      std::string("\x00\xff\x7f", 3)};
    for (const std::string& in : cases) {
        auto back = base64_decode(base64_encode(in));
        REQUIRE(back);
        CHECK(*back == in);
    }
}

TEST_CASE("base64 rejects malformed input") {
    CHECK_FALSE(base64_decode("Zg="));       // bad length
    CHECK_FALSE(base64_decode("Zg==Zg=="));  // padding mid-stream
    CHECK_FALSE(base64_decode("Z!=="));
}

TEST_CASE("hex round trip") {
    std::string bytes("\x00\x01\xfe\xff", 4);
    std::string hex = hex_encode(bytes);
    CHECK(hex == "0001feff");
    auto back = hex_decode(hex);
    REQUIRE(back);
    CHECK(*back == bytes);
    CHECK_FALSE(hex_decode("0"));
    CHECK_FALSE(hex_decode("zz"));
}

TEST_CASE("url component encoding leaves unreserved bytes alone") {
    CHECK(url_encode_component("AZaz09._~-") == "AZaz09._~-");
    CHECK(url_encode_component("a b") == "a%20b");
    CHECK(url_encode_component("a&b=c") == "a%26b%3Dc");
    CHECK(url_encode_component("2024-01-01T00:00:00Z") == "2024-01-01T00%3A00%3A00Z");
}

TEST_CASE("trim and split") {
    CHECK(trim("  x  ") == "x");
    CHECK(trim("\t\n") == "");
    CHECK(split("a,b,,c", ',') == std::vector<std::string>{"a", "b", "", "c"});
    CHECK(split("", ',') == std::vector<std::string>{""});
}

TEST_CASE("random bytes have the requested length and vary") {
    std::string a = random_bytes(32), b = random_bytes(32);
    CHECK(a.size() == 32);
    CHECK(a != b);
}
