#include "tls13/crypto.hpp"

#include <openssl/bn.h>
#include <openssl/core_names.h>
#include <openssl/ec.h>
#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/param_build.h>
#include <openssl/rand.h>

#include <cstring>
#include <stdexcept>

#include "tls13/wire.hpp"

namespace tls13 {

namespace {

struct PkeyDeleter {
    void operator()(EVP_PKEY* p) const { EVP_PKEY_free(p); }
};
using PkeyPtr = std::unique_ptr<EVP_PKEY, PkeyDeleter>;

struct PkeyCtxDeleter {
    void operator()(EVP_PKEY_CTX* p) const { EVP_PKEY_CTX_free(p); }
};
using PkeyCtxPtr = std::unique_ptr<EVP_PKEY_CTX, PkeyCtxDeleter>;

struct MdCtxDeleter {
    void operator()(EVP_MD_CTX* p) const { EVP_MD_CTX_free(p); }
};
using MdCtxPtr = std::unique_ptr<EVP_MD_CTX, MdCtxDeleter>;

struct CipherCtxDeleter {
    void operator()(EVP_CIPHER_CTX* p) const { EVP_CIPHER_CTX_free(p); }
};
using CipherCtxPtr = std::unique_ptr<EVP_CIPHER_CTX, CipherCtxDeleter>;

[[noreturn]] void crypto_fail(const char* what) {
    throw std::runtime_error(std::string("crypto provider: ") + what);
}

const EVP_MD* md_for(HashKind kind) {
    return kind == HashKind::sha256 ? EVP_sha256() : EVP_sha384();
}

const EVP_CIPHER* cipher_for(AeadKind kind) {
    switch (kind) {
        case AeadKind::aes_128_gcm: return EVP_aes_128_gcm();
        case AeadKind::aes_256_gcm: return EVP_aes_256_gcm();
        case AeadKind::chacha20_poly1305: return EVP_chacha20_poly1305();
    }
    crypto_fail("unknown AEAD");
}

}  // namespace

const HashAlg& hash_alg(HashKind kind) {
    static const HashAlg sha256{HashKind::sha256, "sha256", 32};
    static const HashAlg sha384{HashKind::sha384, "sha384", 48};
    return kind == HashKind::sha256 ? sha256 : sha384;
}

std::optional<HashKind> hash_kind_by_name(std::string_view name) {
    if (name == "sha256") return HashKind::sha256;
    if (name == "sha384") return HashKind::sha384;
    return std::nullopt;
}

const AeadDescriptor& aead_descriptor(AeadKind kind) {
    static const AeadDescriptor aes128{AeadKind::aes_128_gcm, "aes_128_gcm", 16, 12, 16};
    static const AeadDescriptor aes256{AeadKind::aes_256_gcm, "aes_256_gcm", 32, 12, 16};
    static const AeadDescriptor chacha{AeadKind::chacha20_poly1305, "chacha20_poly1305", 32, 12,
                                       16};
    switch (kind) {
        case AeadKind::aes_128_gcm: return aes128;
        case AeadKind::aes_256_gcm: return aes256;
        case AeadKind::chacha20_poly1305: return chacha;
    }
    crypto_fail("unknown AEAD");
}

std::optional<SuiteProfile> suite_profile(uint16_t suite_id) {
    switch (suite_id) {
        case suite::aes_128_gcm_sha256:
            return SuiteProfile{suite_id, HashKind::sha256, AeadKind::aes_128_gcm};
        case suite::aes_256_gcm_sha384:
            return SuiteProfile{suite_id, HashKind::sha384, AeadKind::aes_256_gcm};
        case suite::chacha20_poly1305_sha256:
            return SuiteProfile{suite_id, HashKind::sha256, AeadKind::chacha20_poly1305};
        default:
            return std::nullopt;
    }
}

bytes hash(HashKind kind, bytes_view data) {
    bytes out(EVP_MD_size(md_for(kind)));
    unsigned len = 0;
    if (EVP_Digest(data.data(), data.size(), out.data(), &len, md_for(kind), nullptr) != 1) {
        crypto_fail("EVP_Digest failed");
    }
    out.resize(len);
    return out;
}

secure_bytes hmac(HashKind kind, bytes_view key, bytes_view message) {
    secure_bytes out(EVP_MD_size(md_for(kind)));
    unsigned len = 0;
    if (HMAC(md_for(kind), key.data(), static_cast<int>(key.size()), message.data(),
             message.size(), out.data(), &len) == nullptr) {
        crypto_fail("HMAC failed");
    }
    out.resize(len);
    return out;
}

bytes aead_seal(const AeadDescriptor& aead, bytes_view key, bytes_view nonce, bytes_view aad,
                bytes_view plaintext) {
    if (key.size() != aead.key_length || nonce.size() != aead.iv_length) {
        crypto_fail("seal: key/nonce length mismatch");
    }
    CipherCtxPtr ctx(EVP_CIPHER_CTX_new());
    if (!ctx) crypto_fail("ctx alloc");
    if (EVP_EncryptInit_ex(ctx.get(), cipher_for(aead.kind), nullptr, nullptr, nullptr) != 1 ||
        EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_AEAD_SET_IVLEN,
                            static_cast<int>(nonce.size()), nullptr) != 1 ||
        EVP_EncryptInit_ex(ctx.get(), nullptr, nullptr, key.data(), nonce.data()) != 1) {
        crypto_fail("seal init");
    }
    int len = 0;
    if (!aad.empty() &&
        EVP_EncryptUpdate(ctx.get(), nullptr, &len, aad.data(), static_cast<int>(aad.size())) !=
            1) {
        crypto_fail("seal aad");
    }
    bytes out(plaintext.size() + aead.tag_length);
    if (EVP_EncryptUpdate(ctx.get(), out.data(), &len, plaintext.data(),
                          static_cast<int>(plaintext.size())) != 1) {
        crypto_fail("seal update");
    }
    int total = len;
    if (EVP_EncryptFinal_ex(ctx.get(), out.data() + total, &len) != 1) crypto_fail("seal final");
    total += len;
    if (EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_AEAD_GET_TAG,
                            static_cast<int>(aead.tag_length), out.data() + total) != 1) {
        crypto_fail("seal tag");
    }
    out.resize(total + aead.tag_length);
    return out;
}

std::optional<bytes> aead_open(const AeadDescriptor& aead, bytes_view key, bytes_view nonce,
                               bytes_view aad, bytes_view ciphertext) {
    if (key.size() != aead.key_length || nonce.size() != aead.iv_length) {
        crypto_fail("open: key/nonce length mismatch");
    }
    if (ciphertext.size() < aead.tag_length) return std::nullopt;
    std::size_t body_len = ciphertext.size() - aead.tag_length;

    CipherCtxPtr ctx(EVP_CIPHER_CTX_new());
    if (!ctx) crypto_fail("ctx alloc");
    if (EVP_DecryptInit_ex(ctx.get(), cipher_for(aead.kind), nullptr, nullptr, nullptr) != 1 ||
        EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_AEAD_SET_IVLEN,
                            static_cast<int>(nonce.size()), nullptr) != 1 ||
        EVP_DecryptInit_ex(ctx.get(), nullptr, nullptr, key.data(), nonce.data()) != 1) {
        crypto_fail("open init");
    }
    bytes tag(ciphertext.begin() + body_len, ciphertext.end());
    if (EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_AEAD_SET_TAG,
                            static_cast<int>(aead.tag_length), tag.data()) != 1) {
        crypto_fail("open set tag");
    }
    int len = 0;
    if (!aad.empty() &&
        EVP_DecryptUpdate(ctx.get(), nullptr, &len, aad.data(), static_cast<int>(aad.size())) !=
            1) {
        crypto_fail("open aad");
    }
    bytes out(body_len);
    if (EVP_DecryptUpdate(ctx.get(), out.data(), &len, ciphertext.data(),
                          static_cast<int>(body_len)) != 1) {
        return std::nullopt;
    }
    int total = len;
    if (EVP_DecryptFinal_ex(ctx.get(), out.data() + total, &len) != 1) {
        return std::nullopt;  // authentication failure
    }
    out.resize(total + len);
    return out;
}

// ---------------------------------------------------------------------------

void SystemRng::fill(std::span<uint8_t> out) {
    if (!out.empty() && RAND_bytes(out.data(), static_cast<int>(out.size())) != 1) {
        crypto_fail("RAND_bytes failed");
    }
}

uint64_t SeededRng::next() {
    // splitmix64; test-grade determinism, not a cryptographic stream
    state_ += 0x9E3779B97F4A7C15ull;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

void SeededRng::fill(std::span<uint8_t> out) {
    std::size_t i = 0;
    while (i < out.size()) {
        uint64_t word = next();
        for (int b = 0; b < 8 && i < out.size(); ++b, ++i) {
            out[i] = static_cast<uint8_t>(word >> (8 * b));
        }
    }
}

// ---------------------------------------------------------------------------
// Key exchange

namespace {

secure_bytes evp_derive(EVP_PKEY* own, EVP_PKEY* peer) {
    PkeyCtxPtr ctx(EVP_PKEY_CTX_new(own, nullptr));
    if (!ctx || EVP_PKEY_derive_init(ctx.get()) != 1 ||
        EVP_PKEY_derive_set_peer(ctx.get(), peer) != 1) {
        throw std::runtime_error("key agreement setup failed");
    }
    std::size_t len = 0;
    if (EVP_PKEY_derive(ctx.get(), nullptr, &len) != 1) {
        throw std::runtime_error("key agreement sizing failed");
    }
    secure_bytes shared(len);
    if (EVP_PKEY_derive(ctx.get(), shared.data(), &len) != 1) {
        throw std::runtime_error("key agreement failed");
    }
    shared.resize(len);
    return shared;
}

// X25519 / X448 use raw 32- or 56-byte public shares.
class MontgomeryKeyExchange final : public KeyExchange {
  public:
    MontgomeryKeyExchange(uint16_t group_id, Rng& rng) : group_(group_id) {
        int type = group_id == group::x25519 ? EVP_PKEY_X25519 : EVP_PKEY_X448;
        std::size_t priv_len = group_id == group::x25519 ? 32 : 56;
        secure_bytes priv(priv_len);
        rng.fill(priv);
        key_.reset(EVP_PKEY_new_raw_private_key(type, nullptr, priv.data(), priv.size()));
        if (!key_) crypto_fail("raw private key");
        std::size_t pub_len = 0;
        EVP_PKEY_get_raw_public_key(key_.get(), nullptr, &pub_len);
        public_.resize(pub_len);
        if (EVP_PKEY_get_raw_public_key(key_.get(), public_.data(), &pub_len) != 1) {
            crypto_fail("raw public key");
        }
    }

    uint16_t group() const override { return group_; }
    const bytes& public_share() const override { return public_; }

    secure_bytes agree(bytes_view peer_public) const override {
        std::size_t expect = group_ == group::x25519 ? 32 : 56;
        if (peer_public.size() != expect) throw std::runtime_error("bad peer share length");
        int type = group_ == group::x25519 ? EVP_PKEY_X25519 : EVP_PKEY_X448;
        PkeyPtr peer(
            EVP_PKEY_new_raw_public_key(type, nullptr, peer_public.data(), peer_public.size()));
        if (!peer) throw std::runtime_error("bad peer share");
        secure_bytes shared = evp_derive(key_.get(), peer.get());
        // RFC 7748: an all-zero shared secret marks a small-order peer share.
        uint8_t acc = 0;
        for (uint8_t b : shared) acc |= b;
        if (acc == 0) throw std::runtime_error("degenerate shared secret");
        return shared;
    }

  private:
    uint16_t group_;
    PkeyPtr key_;
    bytes public_;
};

// secp256r1 with uncompressed-point shares (0x04 || x || y).
class P256KeyExchange final : public KeyExchange {
  public:
    explicit P256KeyExchange(Rng& rng) {
        // Deterministic under a seeded rng: scalar = bytes mod (n-1) + 1.
        secure_bytes seed(48);
        rng.fill(seed);
        BIGNUM* order = BN_new();
        BIGNUM* priv = BN_new();
        BN_CTX* bn_ctx = BN_CTX_new();
        EC_GROUP* grp = EC_GROUP_new_by_curve_name(NID_X9_62_prime256v1);
        if (!order || !priv || !bn_ctx || !grp) crypto_fail("p256 alloc");
        EC_GROUP_get_order(grp, order, bn_ctx);
        BIGNUM* one = BN_new();
        BN_one(one);
        BIGNUM* reduced = BN_new();
        BIGNUM* seed_bn = BN_bin2bn(seed.data(), static_cast<int>(seed.size()), nullptr);
        BIGNUM* order_minus_one = BN_dup(order);
        BN_sub_word(order_minus_one, 1);
        BN_mod(reduced, seed_bn, order_minus_one, bn_ctx);
        BN_add(priv, reduced, one);

        EC_POINT* pub = EC_POINT_new(grp);
        if (EC_POINT_mul(grp, pub, priv, nullptr, nullptr, bn_ctx) != 1) crypto_fail("p256 mul");
        public_.resize(65);
        if (EC_POINT_point2oct(grp, pub, POINT_CONVERSION_UNCOMPRESSED, public_.data(),
                               public_.size(), bn_ctx) != 65) {
            crypto_fail("p256 point2oct");
        }

        key_ = build_pkey(priv, public_);

        EC_POINT_free(pub);
        BN_free(order);
        BN_free(one);
        BN_free(reduced);
        BN_clear_free(seed_bn);
        BN_free(order_minus_one);
        BN_clear_free(priv);
        BN_CTX_free(bn_ctx);
        EC_GROUP_free(grp);
    }

    uint16_t group() const override { return group::secp256r1; }
    const bytes& public_share() const override { return public_; }

    secure_bytes agree(bytes_view peer_public) const override {
        if (peer_public.size() != 65 || peer_public[0] != 0x04) {
            throw std::runtime_error("bad peer share");
        }
        PkeyPtr peer = peer_pkey(peer_public);
        return evp_derive(key_.get(), peer.get());
    }

  private:
    PkeyPtr key_;
    bytes public_;

    static PkeyPtr build_pkey(const BIGNUM* priv, const bytes& pub) {
        OSSL_PARAM_BLD* bld = OSSL_PARAM_BLD_new();
        OSSL_PARAM_BLD_push_utf8_string(bld, OSSL_PKEY_PARAM_GROUP_NAME, "prime256v1", 0);
        OSSL_PARAM_BLD_push_BN(bld, OSSL_PKEY_PARAM_PRIV_KEY, priv);
        OSSL_PARAM_BLD_push_octet_string(bld, OSSL_PKEY_PARAM_PUB_KEY, pub.data(), pub.size());
        OSSL_PARAM* params = OSSL_PARAM_BLD_to_param(bld);
        PkeyCtxPtr ctx(EVP_PKEY_CTX_new_from_name(nullptr, "EC", nullptr));
        EVP_PKEY* raw = nullptr;
        if (!params || !ctx || EVP_PKEY_fromdata_init(ctx.get()) != 1 ||
            EVP_PKEY_fromdata(ctx.get(), &raw, EVP_PKEY_KEYPAIR, params) != 1) {
            crypto_fail("p256 fromdata");
        }
        OSSL_PARAM_free(params);
        OSSL_PARAM_BLD_free(bld);
        return PkeyPtr(raw);
    }

    static PkeyPtr peer_pkey(bytes_view pub) {
        OSSL_PARAM_BLD* bld = OSSL_PARAM_BLD_new();
        OSSL_PARAM_BLD_push_utf8_string(bld, OSSL_PKEY_PARAM_GROUP_NAME, "prime256v1", 0);
        OSSL_PARAM_BLD_push_octet_string(bld, OSSL_PKEY_PARAM_PUB_KEY, pub.data(), pub.size());
        OSSL_PARAM* params = OSSL_PARAM_BLD_to_param(bld);
        PkeyCtxPtr ctx(EVP_PKEY_CTX_new_from_name(nullptr, "EC", nullptr));
        EVP_PKEY* raw = nullptr;
        bool ok = params && ctx && EVP_PKEY_fromdata_init(ctx.get()) == 1 &&
                  EVP_PKEY_fromdata(ctx.get(), &raw, EVP_PKEY_PUBLIC_KEY, params) == 1;
        OSSL_PARAM_free(params);
        OSSL_PARAM_BLD_free(bld);
        if (!ok) throw std::runtime_error("bad peer share");
        return PkeyPtr(raw);
    }
};

}  // namespace

bool KeyExchange::group_supported(uint16_t group_id) {
    return group_id == group::x25519 || group_id == group::x448 || group_id == group::secp256r1;
}

std::unique_ptr<KeyExchange> KeyExchange::generate(uint16_t group_id, Rng& rng) {
    if (group_id == group::x25519 || group_id == group::x448) {
        return std::make_unique<MontgomeryKeyExchange>(group_id, rng);
    }
    if (group_id == group::secp256r1) {
        return std::make_unique<P256KeyExchange>(rng);
    }
    throw std::runtime_error("unsupported key-exchange group");
}

// ---------------------------------------------------------------------------
// Signatures

namespace {

PkeyPtr ed25519_private(bytes_view raw) {
    PkeyPtr key(EVP_PKEY_new_raw_private_key(EVP_PKEY_ED25519, nullptr, raw.data(), raw.size()));
    if (!key) crypto_fail("ed25519 private key");
    return key;
}

PkeyPtr p256_signing_key(bytes_view raw_priv) {
    BIGNUM* priv = BN_bin2bn(raw_priv.data(), static_cast<int>(raw_priv.size()), nullptr);
    BN_CTX* bn_ctx = BN_CTX_new();
    EC_GROUP* grp = EC_GROUP_new_by_curve_name(NID_X9_62_prime256v1);
    EC_POINT* pub = EC_POINT_new(grp);
    if (!priv || !bn_ctx || !grp || !pub || EC_POINT_mul(grp, pub, priv, nullptr, nullptr, bn_ctx) != 1) {
        crypto_fail("p256 sign key");
    }
    bytes pub_bytes(65);
    EC_POINT_point2oct(grp, pub, POINT_CONVERSION_UNCOMPRESSED, pub_bytes.data(),
                       pub_bytes.size(), bn_ctx);

    OSSL_PARAM_BLD* bld = OSSL_PARAM_BLD_new();
    OSSL_PARAM_BLD_push_utf8_string(bld, OSSL_PKEY_PARAM_GROUP_NAME, "prime256v1", 0);
    OSSL_PARAM_BLD_push_BN(bld, OSSL_PKEY_PARAM_PRIV_KEY, priv);
    OSSL_PARAM_BLD_push_octet_string(bld, OSSL_PKEY_PARAM_PUB_KEY, pub_bytes.data(),
                                     pub_bytes.size());
    OSSL_PARAM* params = OSSL_PARAM_BLD_to_param(bld);
    PkeyCtxPtr ctx(EVP_PKEY_CTX_new_from_name(nullptr, "EC", nullptr));
    EVP_PKEY* raw = nullptr;
    if (!params || !ctx || EVP_PKEY_fromdata_init(ctx.get()) != 1 ||
        EVP_PKEY_fromdata(ctx.get(), &raw, EVP_PKEY_KEYPAIR, params) != 1) {
        crypto_fail("p256 sign fromdata");
    }
    OSSL_PARAM_free(params);
    OSSL_PARAM_BLD_free(bld);
    EC_POINT_free(pub);
    EC_GROUP_free(grp);
    BN_CTX_free(bn_ctx);
    BN_clear_free(priv);
    return PkeyPtr(raw);
}

PkeyPtr p256_verify_key(bytes_view pub) {
    OSSL_PARAM_BLD* bld = OSSL_PARAM_BLD_new();
    OSSL_PARAM_BLD_push_utf8_string(bld, OSSL_PKEY_PARAM_GROUP_NAME, "prime256v1", 0);
    OSSL_PARAM_BLD_push_octet_string(bld, OSSL_PKEY_PARAM_PUB_KEY, pub.data(), pub.size());
    OSSL_PARAM* params = OSSL_PARAM_BLD_to_param(bld);
    PkeyCtxPtr ctx(EVP_PKEY_CTX_new_from_name(nullptr, "EC", nullptr));
    EVP_PKEY* raw = nullptr;
    bool ok = params && ctx && EVP_PKEY_fromdata_init(ctx.get()) == 1 &&
              EVP_PKEY_fromdata(ctx.get(), &raw, EVP_PKEY_PUBLIC_KEY, params) == 1;
    OSSL_PARAM_free(params);
    OSSL_PARAM_BLD_free(bld);
    if (!ok) return PkeyPtr(nullptr);
    return PkeyPtr(raw);
}

}  // namespace

bool signature_scheme_supported(uint16_t scheme) {
    return scheme == sigscheme::ed25519 || scheme == sigscheme::ecdsa_secp256r1_sha256;
}

SignatureKeyPair generate_signature_key(uint16_t scheme, Rng& rng) {
    SignatureKeyPair pair;
    pair.scheme = scheme;
    if (scheme == sigscheme::ed25519) {
        pair.private_key.resize(32);
        rng.fill(pair.private_key);
        PkeyPtr key = ed25519_private(pair.private_key);
        std::size_t len = 0;
        EVP_PKEY_get_raw_public_key(key.get(), nullptr, &len);
        pair.public_key.resize(len);
        EVP_PKEY_get_raw_public_key(key.get(), pair.public_key.data(), &len);
        return pair;
    }
    if (scheme == sigscheme::ecdsa_secp256r1_sha256) {
        // Deterministic under a seeded rng: scalar = bytes mod (n-1) + 1.
        secure_bytes seed(48);
        rng.fill(seed);
        BIGNUM* order = BN_new();
        BN_CTX* bn_ctx = BN_CTX_new();
        EC_GROUP* grp = EC_GROUP_new_by_curve_name(NID_X9_62_prime256v1);
        EC_GROUP_get_order(grp, order, bn_ctx);
        BIGNUM* seed_bn = BN_bin2bn(seed.data(), static_cast<int>(seed.size()), nullptr);
        BIGNUM* order_minus_one = BN_dup(order);
        BN_sub_word(order_minus_one, 1);
        BIGNUM* priv = BN_new();
        BN_mod(priv, seed_bn, order_minus_one, bn_ctx);
        BN_add_word(priv, 1);
        pair.private_key.resize(32);
        BN_bn2binpad(priv, pair.private_key.data(), 32);
        EC_POINT* pub = EC_POINT_new(grp);
        EC_POINT_mul(grp, pub, priv, nullptr, nullptr, bn_ctx);
        pair.public_key.resize(65);
        EC_POINT_point2oct(grp, pub, POINT_CONVERSION_UNCOMPRESSED, pair.public_key.data(), 65,
                           bn_ctx);
        EC_POINT_free(pub);
        BN_free(order);
        BN_clear_free(seed_bn);
        BN_free(order_minus_one);
        BN_clear_free(priv);
        BN_CTX_free(bn_ctx);
        EC_GROUP_free(grp);
        return pair;
    }
    throw std::runtime_error("unsupported signature scheme");
}

bytes sign_message(const SignatureKeyPair& key, bytes_view message) {
    if (key.scheme == sigscheme::ed25519) {
        PkeyPtr pkey = ed25519_private(key.private_key);
        MdCtxPtr ctx(EVP_MD_CTX_new());
        std::size_t len = 0;
        if (EVP_DigestSignInit(ctx.get(), nullptr, nullptr, nullptr, pkey.get()) != 1 ||
            EVP_DigestSign(ctx.get(), nullptr, &len, message.data(), message.size()) != 1) {
            crypto_fail("ed25519 sign");
        }
        bytes sig(len);
        if (EVP_DigestSign(ctx.get(), sig.data(), &len, message.data(), message.size()) != 1) {
            crypto_fail("ed25519 sign");
        }
        sig.resize(len);
        return sig;
    }
    if (key.scheme == sigscheme::ecdsa_secp256r1_sha256) {
        PkeyPtr pkey = p256_signing_key(key.private_key);
        MdCtxPtr ctx(EVP_MD_CTX_new());
        std::size_t len = 0;
        if (EVP_DigestSignInit(ctx.get(), nullptr, EVP_sha256(), nullptr, pkey.get()) != 1 ||
            EVP_DigestSign(ctx.get(), nullptr, &len, message.data(), message.size()) != 1) {
            crypto_fail("ecdsa sign");
        }
        bytes sig(len);
        if (EVP_DigestSign(ctx.get(), sig.data(), &len, message.data(), message.size()) != 1) {
            crypto_fail("ecdsa sign");
        }
        sig.resize(len);
        return sig;
    }
    throw std::runtime_error("unsupported signature scheme");
}

bool verify_signature(uint16_t scheme, bytes_view public_key, bytes_view message,
                      bytes_view signature) {
    if (scheme == sigscheme::ed25519) {
        if (public_key.size() != 32) return false;
        PkeyPtr pkey(EVP_PKEY_new_raw_public_key(EVP_PKEY_ED25519, nullptr, public_key.data(),
                                                 public_key.size()));
        if (!pkey) return false;
        MdCtxPtr ctx(EVP_MD_CTX_new());
        if (EVP_DigestVerifyInit(ctx.get(), nullptr, nullptr, nullptr, pkey.get()) != 1) {
            return false;
        }
        return EVP_DigestVerify(ctx.get(), signature.data(), signature.size(), message.data(),
                                message.size()) == 1;
    }
    if (scheme == sigscheme::ecdsa_secp256r1_sha256) {
        PkeyPtr pkey = p256_verify_key(public_key);
        if (!pkey) return false;
        MdCtxPtr ctx(EVP_MD_CTX_new());
        if (EVP_DigestVerifyInit(ctx.get(), nullptr, EVP_sha256(), nullptr, pkey.get()) != 1) {
            return false;
        }
        return EVP_DigestVerify(ctx.get(), signature.data(), signature.size(), message.data(),
                                message.size()) == 1;
    }
    return false;
}

}  // namespace tls13
