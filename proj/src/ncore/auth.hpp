#pragma once

#include <map>
#include <mutex>
#include <string>
#include <utility>

#include "ncore/crypto.hpp"
#include "ncore/handle.hpp"
#include "ncore/time.hpp"

namespace ncore {

class Repository;

// Replay defense: remembers (agent, nonce) pairs for the window. The check
// and the insert are one atomic step so one nonce never authenticates twice,
// even under concurrent submission.
class NonceCache {
public:
    explicit NonceCache(int window_seconds) : window_(window_seconds) {}

    // True if the pair was fresh (and is now recorded); false on replay.
    bool check_and_insert(Handle agent, const std::string& nonce, Timestamp now);

    size_t size() const;

private:
    void prune(Timestamp now);

    int window_;
    mutable std::mutex mu_;
    std::map<std::pair<Handle, std::string>, Timestamp> seen_;
    std::multimap<Timestamp, std::pair<Handle, std::string>> by_time_;
};

struct AuthConfig {
    int skew_seconds = 300;
    int nonce_window_seconds = 600;
};

// The four signed-request headers, raw values ("" when absent).
struct AuthHeaders {
    std::string agent;      // X-NCore-Agent
    std::string timestamp;  // X-NCore-Timestamp
    std::string nonce;      // X-NCore-Nonce
    std::string signature;  // X-NCore-Signature
};

// Exact bytes an agent signs: "<method>\n<path>\n<timestamp>\n<nonce>\n<hex
// payload digest>". Path is the request target up to the query string.
std::string signing_string(std::string_view method, std::string_view path,
                           std::string_view timestamp, std::string_view nonce,
                           std::string_view payload_digest_hex);

// Builds headers for a request; used by the CLI, the harvester's tests, and
// anything else acting as a client.
AuthHeaders sign_request(Handle agent, const std::string& secret_key, std::string_view method,
                         std::string_view path, std::string_view body, Timestamp now);

// Server-side verification against the agent registry.
class Authenticator {
public:
    Authenticator(const Repository& repo, AuthConfig cfg, Clock clock);

    // Returns the authenticated agent. Throws AuthMissing, UnknownAgent,
    // InactiveAgent, StaleTimestamp, ReplayedNonce, BadSignature.
    Handle authenticate(std::string_view method, std::string_view path, std::string_view body,
                        const AuthHeaders& headers);

    const AuthConfig& config() const { return cfg_; }

private:
    const Repository& repo_;
    AuthConfig cfg_;
    Clock clock_;
    NonceCache nonces_;
};

}  // namespace ncore
