#pragma once

#include <memory>
#include <optional>
#include <span>

#include "tls13/bytes.hpp"

namespace tls13 {

enum class HashKind { sha256, sha384 };

struct HashAlg {
    HashKind kind;
    const char* name;
    std::size_t output_length;

    bool operator==(const HashAlg& other) const { return kind == other.kind; }
};

const HashAlg& hash_alg(HashKind kind);
std::optional<HashKind> hash_kind_by_name(std::string_view name);

enum class AeadKind { aes_128_gcm, aes_256_gcm, chacha20_poly1305 };

struct AeadDescriptor {
    AeadKind kind;
    const char* name;
    std::size_t key_length;
    std::size_t iv_length;
    std::size_t tag_length;

    bool operator==(const AeadDescriptor& other) const { return kind == other.kind; }
};

const AeadDescriptor& aead_descriptor(AeadKind kind);

// Hash and AEAD bindings for the cipher suites this provider implements
// (the CCM suites are recognised on the wire but not negotiable here).
struct SuiteProfile {
    uint16_t id;
    HashKind hash;
    AeadKind aead;
};

std::optional<SuiteProfile> suite_profile(uint16_t suite_id);

bytes hash(HashKind kind, bytes_view data);
secure_bytes hmac(HashKind kind, bytes_view key, bytes_view message);

// seal returns ciphertext || tag; open returns nullopt on any authentication
// failure (consumed upstream as bad_record_mac).
bytes aead_seal(const AeadDescriptor& aead, bytes_view key, bytes_view nonce, bytes_view aad,
                bytes_view plaintext);
std::optional<bytes> aead_open(const AeadDescriptor& aead, bytes_view key, bytes_view nonce,
                               bytes_view aad, bytes_view ciphertext);

// ---------------------------------------------------------------------------
// Randomness. SeededRng gives byte-reproducible runs for tests and the
// harness; SystemRng is the default everywhere else.

class Rng {
  public:
    virtual ~Rng() = default;
    virtual void fill(std::span<uint8_t> out) = 0;

    bytes random_bytes(std::size_t n) {
        bytes out(n);
        fill(out);
        return out;
    }
};

class SystemRng final : public Rng {
  public:
    void fill(std::span<uint8_t> out) override;
};

class SeededRng final : public Rng {
  public:
    explicit SeededRng(uint64_t seed) : state_(seed) {}
    void fill(std::span<uint8_t> out) override;

  private:
    uint64_t state_;
    uint64_t next();
};

// ---------------------------------------------------------------------------
// (EC)DHE key exchange. One instance holds one ephemeral share.

class KeyExchange {
  public:
    virtual ~KeyExchange() = default;

    virtual uint16_t group() const = 0;
    virtual const bytes& public_share() const = 0;
    // Throws ProtocolError-free std::runtime_error on malformed peer shares;
    // callers map that to handshake_failure.
    virtual secure_bytes agree(bytes_view peer_public) const = 0;

    static bool group_supported(uint16_t group_id);
    static std::unique_ptr<KeyExchange> generate(uint16_t group_id, Rng& rng);
};

// ---------------------------------------------------------------------------
// Signatures

struct SignatureKeyPair {
    uint16_t scheme = 0;
    secure_bytes private_key;
    bytes public_key;
};

bool signature_scheme_supported(uint16_t scheme);
SignatureKeyPair generate_signature_key(uint16_t scheme, Rng& rng);
bytes sign_message(const SignatureKeyPair& key, bytes_view message);
bool verify_signature(uint16_t scheme, bytes_view public_key, bytes_view message,
                      bytes_view signature);

}  // namespace tls13
