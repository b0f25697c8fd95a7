#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "tls13/bytes.hpp"

namespace tls13 {

namespace version {
inline constexpr uint16_t tls10 = 0x0301;
inline constexpr uint16_t tls12 = 0x0303;
inline constexpr uint16_t tls13 = 0x0304;
}  // namespace version

enum class ContentType : uint8_t {
    change_cipher_spec = 20,
    alert = 21,
    handshake = 22,
    application_data = 23,
};

enum class HandshakeKind : uint8_t {
    client_hello = 1,
    server_hello = 2,
    new_session_ticket = 4,
    end_of_early_data = 5,
    encrypted_extensions = 8,
    certificate = 11,
    certificate_request = 13,
    certificate_verify = 15,
    finished = 20,
    key_update = 24,
    message_hash = 254,
};

const char* handshake_kind_name(HandshakeKind kind);

enum class AlertDescription : uint8_t {
    close_notify = 0,
    unexpected_message = 10,
    bad_record_mac = 20,
    record_overflow = 22,
    handshake_failure = 40,
    bad_certificate = 42,
    unsupported_certificate = 43,
    certificate_revoked = 44,
    certificate_expired = 45,
    certificate_unknown = 46,
    illegal_parameter = 47,
    unknown_ca = 48,
    access_denied = 49,
    decode_error = 50,
    decrypt_error = 51,
    protocol_version = 70,
    insufficient_security = 71,
    internal_error = 80,
    inappropriate_fallback = 86,
    user_canceled = 90,
    missing_extension = 109,
    unsupported_extension = 110,
    unrecognized_name = 112,
    bad_certificate_status_response = 113,
    unknown_psk_identity = 115,
    certificate_required = 116,
    no_application_protocol = 120,
};

enum class AlertLevel : uint8_t { warning = 1, fatal = 2 };

const char* alert_name(AlertDescription desc);

// In TLS 1.3 the legacy severity byte is implied by the description.
AlertLevel alert_level_for(AlertDescription desc);

struct Alert {
    AlertLevel level;
    AlertDescription description;

    bool operator==(const Alert&) const = default;
};

inline Alert make_alert(AlertDescription desc) { return {alert_level_for(desc), desc}; }

bytes encode_alert(const Alert& alert);
Alert decode_alert(bytes_view body);

// Protocol failure carrying the alert the offended endpoint must send.
struct ProtocolError : std::runtime_error {
    AlertDescription alert;
    ProtocolError(AlertDescription a, const std::string& what)
        : std::runtime_error(what), alert(a) {}
};

namespace ext {
inline constexpr uint16_t server_name = 0;
inline constexpr uint16_t max_fragment_length = 1;
inline constexpr uint16_t status_request = 5;
inline constexpr uint16_t supported_groups = 10;
inline constexpr uint16_t signature_algorithms = 13;
inline constexpr uint16_t use_srtp = 14;
inline constexpr uint16_t heartbeat = 15;
inline constexpr uint16_t application_layer_protocol_negotiation = 16;
inline constexpr uint16_t signed_certificate_timestamp = 18;
inline constexpr uint16_t client_certificate_type = 19;
inline constexpr uint16_t server_certificate_type = 20;
inline constexpr uint16_t padding = 21;
inline constexpr uint16_t pre_shared_key = 41;
inline constexpr uint16_t early_data = 42;
inline constexpr uint16_t supported_versions = 43;
inline constexpr uint16_t cookie = 44;
inline constexpr uint16_t psk_key_exchange_modes = 45;
inline constexpr uint16_t certificate_authorities = 47;
inline constexpr uint16_t oid_filters = 48;
inline constexpr uint16_t post_handshake_auth = 49;
inline constexpr uint16_t signature_algorithms_cert = 50;
inline constexpr uint16_t key_share = 51;

const char* name(uint16_t type);
}  // namespace ext

namespace suite {
inline constexpr uint16_t aes_128_gcm_sha256 = 0x1301;
inline constexpr uint16_t aes_256_gcm_sha384 = 0x1302;
inline constexpr uint16_t chacha20_poly1305_sha256 = 0x1303;
inline constexpr uint16_t aes_128_ccm_sha256 = 0x1304;
inline constexpr uint16_t aes_128_ccm_8_sha256 = 0x1305;

bool is_defined(uint16_t id);
const char* name(uint16_t id);
}  // namespace suite

namespace group {
inline constexpr uint16_t secp256r1 = 0x0017;
inline constexpr uint16_t secp384r1 = 0x0018;
inline constexpr uint16_t secp521r1 = 0x0019;
inline constexpr uint16_t x25519 = 0x001D;
inline constexpr uint16_t x448 = 0x001E;
inline constexpr uint16_t ffdhe2048 = 0x0100;
inline constexpr uint16_t ffdhe3072 = 0x0101;
inline constexpr uint16_t ffdhe4096 = 0x0102;
inline constexpr uint16_t ffdhe6144 = 0x0103;
inline constexpr uint16_t ffdhe8192 = 0x0104;

bool is_defined(uint16_t id);
bool is_finite_field(uint16_t id);
const char* name(uint16_t id);
}  // namespace group

namespace sigscheme {
inline constexpr uint16_t rsa_pkcs1_sha256 = 0x0401;
inline constexpr uint16_t rsa_pkcs1_sha384 = 0x0501;
inline constexpr uint16_t rsa_pkcs1_sha512 = 0x0601;
inline constexpr uint16_t ecdsa_secp256r1_sha256 = 0x0403;
inline constexpr uint16_t ecdsa_secp384r1_sha384 = 0x0503;
inline constexpr uint16_t ecdsa_secp521r1_sha512 = 0x0603;
inline constexpr uint16_t rsa_pss_rsae_sha256 = 0x0804;
inline constexpr uint16_t rsa_pss_rsae_sha384 = 0x0805;
inline constexpr uint16_t rsa_pss_rsae_sha512 = 0x0806;
inline constexpr uint16_t ed25519 = 0x0807;
inline constexpr uint16_t ed448 = 0x0808;
// Legacy codepoints, recognised only to reject weak-hash certificates.
inline constexpr uint16_t rsa_pkcs1_md5 = 0x0101;
inline constexpr uint16_t rsa_pkcs1_sha1 = 0x0201;
inline constexpr uint16_t ecdsa_sha1 = 0x0203;

inline bool uses_md5(uint16_t id) { return (id >> 8) == 0x01; }
inline bool uses_sha1(uint16_t id) { return (id >> 8) == 0x02; }
const char* name(uint16_t id);
}  // namespace sigscheme

namespace psk_mode {
inline constexpr uint8_t psk_ke = 0;
inline constexpr uint8_t psk_dhe_ke = 1;
}  // namespace psk_mode

struct Extension {
    uint16_t type = 0;
    bytes body;

    bool operator==(const Extension&) const = default;
};

const Extension* find_extension(const std::vector<Extension>& list, uint16_t type);

// ---------------------------------------------------------------------------
// Handshake message bodies

struct ClientHello {
    uint16_t legacy_version = version::tls12;
    std::array<uint8_t, 32> random{};
    bytes legacy_session_id;
    std::vector<uint16_t> cipher_suites;
    bytes legacy_compression_methods{0x00};
    std::vector<Extension> extensions;

    bool operator==(const ClientHello&) const = default;
};

struct ServerHello {
    uint16_t legacy_version = version::tls12;
    std::array<uint8_t, 32> random{};
    bytes legacy_session_id_echo;
    uint16_t cipher_suite = 0;
    uint8_t legacy_compression_method = 0;
    std::vector<Extension> extensions;

    bool operator==(const ServerHello&) const = default;
};

struct EncryptedExtensions {
    std::vector<Extension> extensions;

    bool operator==(const EncryptedExtensions&) const = default;
};

struct CertificateEntry {
    bytes cert_data;
    std::vector<Extension> extensions;

    bool operator==(const CertificateEntry&) const = default;
};

struct CertificateMsg {
    bytes certificate_request_context;
    std::vector<CertificateEntry> certificate_list;

    bool operator==(const CertificateMsg&) const = default;
};

struct CertificateRequestMsg {
    bytes certificate_request_context;
    std::vector<Extension> extensions;

    bool operator==(const CertificateRequestMsg&) const = default;
};

struct CertificateVerifyMsg {
    uint16_t algorithm = 0;
    bytes signature;

    bool operator==(const CertificateVerifyMsg&) const = default;
};

struct FinishedMsg {
    bytes verify_data;  // Hash.length bytes, unframed

    bool operator==(const FinishedMsg&) const = default;
};

struct NewSessionTicketMsg {
    uint32_t ticket_lifetime = 0;  // seconds, at most 604800
    uint32_t ticket_age_add = 0;
    bytes ticket_nonce;
    bytes ticket;
    std::vector<Extension> extensions;

    bool operator==(const NewSessionTicketMsg&) const = default;
};

struct KeyUpdateMsg {
    uint8_t request_update = 0;  // one bit

    bool operator==(const KeyUpdateMsg&) const = default;
};

struct EndOfEarlyDataMsg {
    bool operator==(const EndOfEarlyDataMsg&) const = default;
};

using HandshakeBody =
    std::variant<ClientHello, ServerHello, EncryptedExtensions, CertificateMsg,
                 CertificateRequestMsg, CertificateVerifyMsg, FinishedMsg, NewSessionTicketMsg,
                 KeyUpdateMsg, EndOfEarlyDataMsg>;

struct HandshakeMessage {
    HandshakeKind kind;
    HandshakeBody body;

    bool operator==(const HandshakeMessage&) const = default;
};

inline constexpr uint32_t max_ticket_lifetime = 604800;  // seven days, in seconds

// NewSessionTicket lifetimes above seven days never go on the wire.
inline constexpr std::array<uint8_t, 32> hello_retry_request_random = {
    0xCF, 0x21, 0xAD, 0x74, 0xE5, 0x9A, 0x61, 0x11, 0xBE, 0x1D, 0x8C, 0x02, 0x1E, 0x65, 0xB8,
    0x91, 0xC2, 0xA2, 0x11, 0x16, 0x7A, 0xBB, 0x8C, 0x5E, 0x07, 0x9E, 0x09, 0xE2, 0xC8, 0xA8,
    0x33, 0x9C};

bool is_hello_retry_request(const ServerHello& sh);

// ---------------------------------------------------------------------------
// Framed codecs. encode produces type || u24 length || body; decode verifies
// the structural constants the consuming endpoint must check at parse time
// and reports how many input bytes one message occupied.

bytes encode_handshake(const HandshakeMessage& msg);

struct DecodedHandshake {
    HandshakeMessage msg;
    std::size_t consumed;
};

// The negotiated Hash.length is needed only to frame Finished bodies; pass 0
// to accept any verify_data length (callers then enforce it themselves).
DecodedHandshake decode_handshake(bytes_view input, std::size_t finished_length = 0);

// ---------------------------------------------------------------------------
// Structured extension payloads, decoded on demand

struct KeyShareEntry {
    uint16_t group = 0;
    bytes key_exchange;

    bool operator==(const KeyShareEntry&) const = default;
};

struct PskIdentity {
    bytes identity;
    uint32_t obfuscated_ticket_age = 0;

    bool operator==(const PskIdentity&) const = default;
};

struct OfferedPsks {
    std::vector<PskIdentity> identities;
    std::vector<bytes> binders;

    bool operator==(const OfferedPsks&) const = default;

    // Wire size of the binders list field (including its two-byte prefix);
    // this many trailing ClientHello bytes are dropped by Truncate.
    std::size_t binders_list_length() const;
};

bytes encode_supported_versions_ch(const std::vector<uint16_t>& versions);
std::vector<uint16_t> decode_supported_versions_ch(bytes_view body);
bytes encode_supported_versions_sh(uint16_t selected);
uint16_t decode_supported_versions_sh(bytes_view body);

bytes encode_supported_groups(const std::vector<uint16_t>& groups);
std::vector<uint16_t> decode_supported_groups(bytes_view body);

bytes encode_signature_algorithms(const std::vector<uint16_t>& schemes);
std::vector<uint16_t> decode_signature_algorithms(bytes_view body);

bytes encode_key_share_ch(const std::vector<KeyShareEntry>& shares);
std::vector<KeyShareEntry> decode_key_share_ch(bytes_view body);
bytes encode_key_share_sh(const KeyShareEntry& share);
KeyShareEntry decode_key_share_sh(bytes_view body);
bytes encode_key_share_hrr(uint16_t selected_group);
uint16_t decode_key_share_hrr(bytes_view body);

bytes encode_psk_modes(const std::vector<uint8_t>& modes);
std::vector<uint8_t> decode_psk_modes(bytes_view body);

bytes encode_pre_shared_key_ch(const OfferedPsks& offered);
OfferedPsks decode_pre_shared_key_ch(bytes_view body);
bytes encode_pre_shared_key_sh(uint16_t selected_identity);
uint16_t decode_pre_shared_key_sh(bytes_view body);

bytes encode_cookie(bytes_view cookie);
bytes decode_cookie(bytes_view body);

bytes encode_early_data_nst(uint32_t max_early_data_size);
uint32_t decode_early_data_nst(bytes_view body);

// ---------------------------------------------------------------------------
// Extension placement (which extensions may appear in which message)

enum class ExtensionHost { CH, SH, EE, CT, CR, NST, HRR };

struct PlacementViolation {
    uint16_t extension_type;
};

// ok (nullopt) iff every known extension type is permitted for the host
// message; unknown types are not judged here.
std::optional<PlacementViolation> check_extension_placement(
    ExtensionHost host, const std::vector<Extension>& extensions);

bool placement_allows(ExtensionHost host, uint16_t extension_type);
bool placement_table_knows(uint16_t extension_type);
std::vector<uint16_t> placement_known_extension_types();

}  // namespace tls13
