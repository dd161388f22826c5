#include "ncore/auth.hpp"

#include <algorithm>

#include "ncore/errors.hpp"
#include "ncore/objects.hpp"
#include "ncore/repository.hpp"
#include "ncore/util.hpp"

namespace ncore {

bool NonceCache::check_and_insert(Handle agent, const std::string& nonce, Timestamp now) {
    std::lock_guard<std::mutex> lock(mu_);
    prune(now);
    auto key = std::make_pair(agent, nonce);
    if (seen_.count(key)) return false;
    seen_.emplace(key, now);
    by_time_.emplace(now, key);
    return true;
}

void NonceCache::prune(Timestamp now) {
    Timestamp horizon = now - window_;
    while (!by_time_.empty() && by_time_.begin()->first < horizon) {
        seen_.erase(by_time_.begin()->second);
        by_time_.erase(by_time_.begin());
    }
}

size_t NonceCache::size() const {
    std::lock_guard<std::mutex> lock(mu_);
    return seen_.size();
}

std::string signing_string(std::string_view method, std::string_view path,
                           std::string_view timestamp, std::string_view nonce,
                           std::string_view payload_digest_hex) {
    std::string s;
    s.reserve(method.size() + path.size() + timestamp.size() + nonce.size() +
              payload_digest_hex.size() + 4);
    s.append(method);
    s.push_back('\n');
    s.append(path);
    s.push_back('\n');
    s.append(timestamp);
    s.push_back('\n');
    s.append(nonce);
    s.push_back('\n');
    s.append(payload_digest_hex);
    return s;
}

AuthHeaders sign_request(Handle agent, const std::string& secret_key, std::string_view method,
                         std::string_view path, std::string_view body, Timestamp now) {
    AuthHeaders h;
    h.agent = agent.text();
    h.timestamp = format_rfc3339(now);
    h.nonce = hex_encode(random_bytes(16));
    std::string msg = signing_string(method, path, h.timestamp, h.nonce, sha256_hex(body));
    h.signature = base64_encode(sign_detached(msg, secret_key));
    return h;
}

Authenticator::Authenticator(const Repository& repo, AuthConfig cfg, Clock clock)
    : repo_(repo), cfg_(cfg), clock_(std::move(clock)), nonces_(cfg.nonce_window_seconds) {}

Handle Authenticator::authenticate(std::string_view method, std::string_view path,
                                   std::string_view body, const AuthHeaders& headers) {
    if (headers.agent.empty() || headers.timestamp.empty() || headers.nonce.empty() ||
        headers.signature.empty())
        fail(Err::AuthMissing, "signed request headers required");

    auto agent = Handle::parse(headers.agent);
    if (!agent || agent->kind != Kind::Agent)
        fail(Err::UnknownAgent, "agent header is not an agent handle", headers.agent);

    auto ts = parse_rfc3339(headers.timestamp);
    if (!ts) fail(Err::StaleTimestamp, "unparseable timestamp: " + headers.timestamp);
    Timestamp now = clock_();
    if (*ts < now - cfg_.skew_seconds || *ts > now + cfg_.skew_seconds)
        fail(Err::StaleTimestamp, "timestamp outside the accepted window");

    if (headers.nonce.size() != 32 || !hex_decode(headers.nonce))
        fail(Err::BadSignature, "nonce must be 32 hex characters");
    auto sig = base64_decode(headers.signature);
    if (!sig || sig->size() != kSignatureBytes)
        fail(Err::BadSignature, "signature is not a valid detached signature");

    auto obj = repo_.try_get_object(*agent);
    if (!obj) fail(Err::UnknownAgent, "no such agent", agent->text());
    const auto& a = std::get<AgentObject>(*obj);
    if (a.deleted || !a.active) fail(Err::InactiveAgent, "agent is inactive", agent->text());
    if (a.public_key.size() != kPublicKeyBytes)
        fail(Err::MalformedKey, "registered key is unusable", agent->text());

    std::string msg =
        signing_string(method, path, headers.timestamp, headers.nonce, sha256_hex(body));
    if (!verify_detached(msg, *sig, a.public_key))
        fail(Err::BadSignature, "signature verification failed", agent->text());

    // Only after the signature checks out: a forged request must not be able
    // to burn a nonce the real agent still intends to use.
    if (!nonces_.check_and_insert(*agent, headers.nonce, now))
        fail(Err::ReplayedNonce, "nonce already used inside the window", agent->text());
    return *agent;
}

}  // namespace ncore
