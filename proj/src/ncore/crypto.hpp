#pragma once

#include <string>
#include <string_view>

namespace ncore {

// SHA-256 digest, raw 32 bytes.
std::string sha256(std::string_view data);
// Hex form, used for state hashes and payload digests.
std::string sha256_hex(std::string_view data);

// Streaming SHA-256 for hashing canonical repository state without
// materializing one giant buffer.
class Sha256Stream {
public:
    Sha256Stream();
    void update(std::string_view data);
    std::string finish_hex();

private:
    unsigned char state_[104];  // sized for crypto_hash_sha256_state
    bool done_ = false;
};

// Ed25519 signatures (the default signature scheme).
inline constexpr const char* kSignatureScheme = "ed25519";
inline constexpr size_t kPublicKeyBytes = 32;
inline constexpr size_t kSecretKeyBytes = 64;
inline constexpr size_t kSignatureBytes = 64;

struct Keypair {
    std::string public_key;  // 32 bytes
    std::string secret_key;  // 64 bytes
};

Keypair generate_keypair();
std::string sign_detached(std::string_view message, std::string_view secret_key);
bool verify_detached(std::string_view message, std::string_view signature,
                     std::string_view public_key);

}  // namespace ncore
