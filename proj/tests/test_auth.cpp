#include "doctest.h"

#include "ncore/auth.hpp"
#include "ncore/repository.hpp"
#include "support/common.hpp"
#include "support/fixtures.hpp"

using namespace ncore;
using namespace ncore::test;

namespace {

struct Rig {
    TempDir tmp;
    std::unique_ptr<Repository> repo;
    Whiteboard w;
    Timestamp now = 1700000000;
    std::unique_ptr<Authenticator> auth;

    Rig() {
        repo = make_repo(tmp.sub("r"));
        w = build_whiteboard(*repo);
        auth = std::make_unique<Authenticator>(*repo, AuthConfig{},
                                               [this] { return now; });
    }
};

}  // namespace

TEST_CASE("detached signatures verify and reject tampering") {
    Keypair kp = generate_keypair();
    std::string sig = sign_detached("message", kp.secret_key);
    CHECK(sig.size() == kSignatureBytes);
    CHECK(verify_detached("message", sig, kp.public_key));
    CHECK_FALSE(verify_detached("messagE", sig, kp.public_key));
    std::string bad = sig;
    bad[0] ^= 1;
    CHECK_FALSE(verify_detached("message", bad, kp.public_key));
    CHECK_FALSE(verify_detached("message", sig, generate_keypair().public_key));
}

TEST_CASE("signing string layout is fixed") {
    std::string s = signing_string("POST", "/objects", "1700000000", "ab12", "deadbeef");
    CHECK(s == "POST\n/objects\n1700000000\nab12\ndeadbeef");
}

TEST_CASE("a signed request authenticates the agent") {
    Rig rig;
    AuthHeaders h = sign_request(rig.w.carol.handle, rig.w.carol.keys.secret_key, "POST",
                                 "/objects", "{\"kind\":\"resource\"}", rig.now);
    CHECK(rig.auth->authenticate("POST", "/objects", "{\"kind\":\"resource\"}", h) ==
          rig.w.carol.handle);
}

TEST_CASE("any tampering breaks the signature") {
    Rig rig;
    auto fresh = [&] {
        return sign_request(rig.w.carol.handle, rig.w.carol.keys.secret_key, "POST",
                            "/objects", "body", rig.now);
    };
    CHECK(err_of([&] { rig.auth->authenticate("PUT", "/objects", "body", fresh()); }) ==
          Err::BadSignature);
    CHECK(err_of([&] { rig.auth->authenticate("POST", "/other", "body", fresh()); }) ==
          Err::BadSignature);
    CHECK(err_of([&] { rig.auth->authenticate("POST", "/objects", "tampered", fresh()); }) ==
          Err::BadSignature);
    AuthHeaders h = fresh();
    h.signature = "!!!not base64!!!";
    CHECK(err_of([&] { rig.auth->authenticate("POST", "/objects", "body", h); }) ==
          Err::BadSignature);

    // Another agent's key signing carol's handle fails too.
    AuthHeaders forged = sign_request(rig.w.carol.handle, rig.w.editor.keys.secret_key,
                                      "POST", "/objects", "body", rig.now);
    CHECK(err_of([&] { rig.auth->authenticate("POST", "/objects", "body", forged); }) ==
          Err::BadSignature);
}

TEST_CASE("timestamp skew window is enforced on both sides") {
    Rig rig;
    for (long delta : {-301L, 301L, -36000L, 36000L}) {
        AuthHeaders h = sign_request(rig.w.carol.handle, rig.w.carol.keys.secret_key,
                                     "GET", "/status", "", rig.now + delta);
        CAPTURE(delta);
        CHECK(err_of([&] { rig.auth->authenticate("GET", "/status", "", h); }) ==
              Err::StaleTimestamp);
    }
    for (long delta : {-300L, 0L, 300L}) {
        AuthHeaders h = sign_request(rig.w.carol.handle, rig.w.carol.keys.secret_key,
                                     "GET", "/status", "", rig.now + delta);
        CAPTURE(delta);
        CHECK(rig.auth->authenticate("GET", "/status", "", h) == rig.w.carol.handle);
    }
}

TEST_CASE("nonces are single-use within the window") {
    Rig rig;
    AuthHeaders h = sign_request(rig.w.carol.handle, rig.w.carol.keys.secret_key, "GET",
                                 "/status", "", rig.now);
    CHECK(rig.auth->authenticate("GET", "/status", "", h) == rig.w.carol.handle);
    CHECK(err_of([&] { rig.auth->authenticate("GET", "/status", "", h); }) ==
          Err::ReplayedNonce);

    // A failed signature must not burn the nonce.
    AuthHeaders h2 = sign_request(rig.w.carol.handle, rig.w.carol.keys.secret_key, "GET",
                                  "/status", "", rig.now);
    AuthHeaders broken = h2;
    broken.signature = h.signature;  // wrong signature, fresh nonce
    CHECK(err_of([&] { rig.auth->authenticate("GET", "/status", "", broken); }) ==
          Err::BadSignature);
    CHECK(rig.auth->authenticate("GET", "/status", "", h2) == rig.w.carol.handle);

    // Different agents may coincidentally use the same nonce.
    AuthHeaders carol = sign_request(rig.w.carol.handle, rig.w.carol.keys.secret_key,
                                     "GET", "/status", "", rig.now);
    AuthHeaders editor = sign_request(rig.w.editor.handle, rig.w.editor.keys.secret_key,
                                      "GET", "/status", "", rig.now);
    editor.nonce = carol.nonce;
    // Re-sign with the shared nonce.
    editor = sign_request(rig.w.editor.handle, rig.w.editor.keys.secret_key, "GET",
                          "/status", "", rig.now);
    CHECK(rig.auth->authenticate("GET", "/status", "", carol) == rig.w.carol.handle);
    CHECK(rig.auth->authenticate("GET", "/status", "", editor) == rig.w.editor.handle);
}

TEST_CASE("nonce cache prunes outside the window") {
    NonceCache cache(600);
    Handle a{Kind::Agent, 1};
    CHECK(cache.check_and_insert(a, "n1", 1000));
    CHECK_FALSE(cache.check_and_insert(a, "n1", 1100));
    CHECK(cache.size() == 1);
    // 601 seconds later the entry is gone and the nonce usable again.
    CHECK(cache.check_and_insert(a, "n2", 1601));
    CHECK(cache.check_and_insert(a, "n1", 1601));
    CHECK(cache.size() == 2);
}

TEST_CASE("unknown, malformed, and inactive identities are refused") {
    Rig rig;
    AuthHeaders h = sign_request(rig.w.carol.handle, rig.w.carol.keys.secret_key, "GET",
                                 "/status", "", rig.now);

    AuthHeaders missing;
    CHECK(err_of([&] { rig.auth->authenticate("GET", "/status", "", missing); }) ==
          Err::AuthMissing);

    AuthHeaders partial = h;
    partial.signature.clear();
    CHECK(err_of([&] { rig.auth->authenticate("GET", "/status", "", partial); }) ==
          Err::AuthMissing);

    AuthHeaders ghost = h;
    ghost.agent = "ncore:agt:9999";
    CHECK(err_of([&] { rig.auth->authenticate("GET", "/status", "", ghost); }) ==
          Err::UnknownAgent);

    AuthHeaders junk = h;
    junk.agent = "not-a-handle";
    CHECK(err_of([&] { rig.auth->authenticate("GET", "/status", "", junk); }) ==
          Err::UnknownAgent);

    AuthHeaders badnonce = h;
    badnonce.nonce = "short";
    CHECK(err_of([&] { rig.auth->authenticate("GET", "/status", "", badnonce); }) ==
          Err::BadSignature);

    AuthHeaders badts = h;
    badts.timestamp = "yesterday";
    CHECK(err_of([&] { rig.auth->authenticate("GET", "/status", "", badts); }) ==
          Err::StaleTimestamp);

    // Tombstoned agents stop authenticating even with the right key.
    rig.repo->tombstone(rig.w.admin.handle, rig.w.carol.handle);
    AuthHeaders dead = sign_request(rig.w.carol.handle, rig.w.carol.keys.secret_key,
                                    "GET", "/status", "", rig.now);
    CHECK(err_of([&] { rig.auth->authenticate("GET", "/status", "", dead); }) ==
          Err::InactiveAgent);
}
