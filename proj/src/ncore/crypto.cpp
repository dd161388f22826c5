#include "ncore/crypto.hpp"

#include <sodium.h>

#include <cstring>
#include <stdexcept>

#include "ncore/util.hpp"

namespace ncore {

namespace {
void ensure_sodium() {
    if (sodium_init() < 0) throw std::runtime_error("libsodium init failed");
}
}  // namespace

std::string sha256(std::string_view data) {
    ensure_sodium();
    std::string out(crypto_hash_sha256_BYTES, '\0');
    crypto_hash_sha256(reinterpret_cast<unsigned char*>(out.data()),
                       reinterpret_cast<const unsigned char*>(data.data()), data.size());
    return out;
}

std::string sha256_hex(std::string_view data) {
    return hex_encode(sha256(data));
}

Sha256Stream::Sha256Stream() {
    ensure_sodium();
    static_assert(sizeof(state_) >= sizeof(crypto_hash_sha256_state));
    crypto_hash_sha256_init(reinterpret_cast<crypto_hash_sha256_state*>(state_));
}

void Sha256Stream::update(std::string_view data) {
    crypto_hash_sha256_update(reinterpret_cast<crypto_hash_sha256_state*>(state_),
                              reinterpret_cast<const unsigned char*>(data.data()), data.size());
}

std::string Sha256Stream::finish_hex() {
    if (done_) throw std::logic_error("Sha256Stream already finished");
    done_ = true;
    unsigned char digest[crypto_hash_sha256_BYTES];
    crypto_hash_sha256_final(reinterpret_cast<crypto_hash_sha256_state*>(state_), digest);
    return hex_encode(std::string_view(reinterpret_cast<const char*>(digest), sizeof(digest)));
}

Keypair generate_keypair() {
    ensure_sodium();
    Keypair kp;
    kp.public_key.resize(crypto_sign_PUBLICKEYBYTES);
    kp.secret_key.resize(crypto_sign_SECRETKEYBYTES);
    crypto_sign_keypair(reinterpret_cast<unsigned char*>(kp.public_key.data()),
                        reinterpret_cast<unsigned char*>(kp.secret_key.data()));
    return kp;
}

std::string sign_detached(std::string_view message, std::string_view secret_key) {
    ensure_sodium();
    if (secret_key.size() != crypto_sign_SECRETKEYBYTES)
        throw std::invalid_argument("bad secret key length");
    std::string sig(crypto_sign_BYTES, '\0');
    crypto_sign_detached(reinterpret_cast<unsigned char*>(sig.data()), nullptr,
                         reinterpret_cast<const unsigned char*>(message.data()), message.size(),
                         reinterpret_cast<const unsigned char*>(secret_key.data()));
    return sig;
}

bool verify_detached(std::string_view message, std::string_view signature,
                     std::string_view public_key) {
    ensure_sodium();
    if (signature.size() != crypto_sign_BYTES || public_key.size() != crypto_sign_PUBLICKEYBYTES)
        return false;
    return crypto_sign_verify_detached(
               reinterpret_cast<const unsigned char*>(signature.data()),
               reinterpret_cast<const unsigned char*>(message.data()), message.size(),
               reinterpret_cast<const unsigned char*>(public_key.data())) == 0;
}

}  // namespace ncore
