#include "tls13/wire.hpp"

#include <algorithm>
#include <map>

namespace tls13 {

const char* handshake_kind_name(HandshakeKind kind) {
    switch (kind) {
        case HandshakeKind::client_hello: return "client_hello";
        case HandshakeKind::server_hello: return "server_hello";
        case HandshakeKind::new_session_ticket: return "new_session_ticket";
        case HandshakeKind::end_of_early_data: return "end_of_early_data";
        case HandshakeKind::encrypted_extensions: return "encrypted_extensions";
        case HandshakeKind::certificate: return "certificate";
        case HandshakeKind::certificate_request: return "certificate_request";
        case HandshakeKind::certificate_verify: return "certificate_verify";
        case HandshakeKind::finished: return "finished";
        case HandshakeKind::key_update: return "key_update";
        case HandshakeKind::message_hash: return "message_hash";
    }
    return "unknown";
}

const char* alert_name(AlertDescription desc) {
    switch (desc) {
        case AlertDescription::close_notify: return "close_notify";
        case AlertDescription::unexpected_message: return "unexpected_message";
        case AlertDescription::bad_record_mac: return "bad_record_mac";
        case AlertDescription::record_overflow: return "record_overflow";
        case AlertDescription::handshake_failure: return "handshake_failure";
        case AlertDescription::bad_certificate: return "bad_certificate";
        case AlertDescription::unsupported_certificate: return "unsupported_certificate";
        case AlertDescription::certificate_revoked: return "certificate_revoked";
        case AlertDescription::certificate_expired: return "certificate_expired";
        case AlertDescription::certificate_unknown: return "certificate_unknown";
        case AlertDescription::illegal_parameter: return "illegal_parameter";
        case AlertDescription::unknown_ca: return "unknown_ca";
        case AlertDescription::access_denied: return "access_denied";
        case AlertDescription::decode_error: return "decode_error";
        case AlertDescription::decrypt_error: return "decrypt_error";
        case AlertDescription::protocol_version: return "protocol_version";
        case AlertDescription::insufficient_security: return "insufficient_security";
        case AlertDescription::internal_error: return "internal_error";
        case AlertDescription::inappropriate_fallback: return "inappropriate_fallback";
        case AlertDescription::user_canceled: return "user_canceled";
        case AlertDescription::missing_extension: return "missing_extension";
        case AlertDescription::unsupported_extension: return "unsupported_extension";
        case AlertDescription::unrecognized_name: return "unrecognized_name";
        case AlertDescription::bad_certificate_status_response:
            return "bad_certificate_status_response";
        case AlertDescription::unknown_psk_identity: return "unknown_psk_identity";
        case AlertDescription::certificate_required: return "certificate_required";
        case AlertDescription::no_application_protocol: return "no_application_protocol";
    }
    return "unknown_alert";
}

AlertLevel alert_level_for(AlertDescription desc) {
    switch (desc) {
        case AlertDescription::close_notify:
        case AlertDescription::user_canceled:
            return AlertLevel::warning;
        default:
            return AlertLevel::fatal;
    }
}

bytes encode_alert(const Alert& alert) {
    return {static_cast<uint8_t>(alert.level), static_cast<uint8_t>(alert.description)};
}

Alert decode_alert(bytes_view body) {
    ByteReader r(body);
    uint8_t level = r.u8();
    uint8_t desc = r.u8();
    r.expect_end();
    if (level != 1 && level != 2) throw DecodeError("bad alert level");
    return {static_cast<AlertLevel>(level), static_cast<AlertDescription>(desc)};
}

namespace ext {
const char* name(uint16_t type) {
    switch (type) {
        case server_name: return "server_name";
        case max_fragment_length: return "max_fragment_length";
        case status_request: return "status_request";
        case supported_groups: return "supported_groups";
        case signature_algorithms: return "signature_algorithms";
        case use_srtp: return "use_srtp";
        case heartbeat: return "heartbeat";
        case application_layer_protocol_negotiation:
            return "application_layer_protocol_negotiation";
        case signed_certificate_timestamp: return "signed_certificate_timestamp";
        case client_certificate_type: return "client_certificate_type";
        case server_certificate_type: return "server_certificate_type";
        case padding: return "padding";
        case pre_shared_key: return "pre_shared_key";
        case early_data: return "early_data";
        case supported_versions: return "supported_versions";
        case cookie: return "cookie";
        case psk_key_exchange_modes: return "psk_key_exchange_modes";
        case certificate_authorities: return "certificate_authorities";
        case oid_filters: return "oid_filters";
        case post_handshake_auth: return "post_handshake_auth";
        case signature_algorithms_cert: return "signature_algorithms_cert";
        case key_share: return "key_share";
    }
    return "unknown";
}
}  // namespace ext

namespace suite {
bool is_defined(uint16_t id) { return id >= 0x1301 && id <= 0x1305; }

const char* name(uint16_t id) {
    switch (id) {
        case aes_128_gcm_sha256: return "TLS_AES_128_GCM_SHA256";
        case aes_256_gcm_sha384: return "TLS_AES_256_GCM_SHA384";
        case chacha20_poly1305_sha256: return "TLS_CHACHA20_POLY1305_SHA256";
        case aes_128_ccm_sha256: return "TLS_AES_128_CCM_SHA256";
        case aes_128_ccm_8_sha256: return "TLS_AES_128_CCM_8_SHA256";
    }
    return "unknown";
}
}  // namespace suite

namespace group {
bool is_defined(uint16_t id) {
    return (id >= secp256r1 && id <= secp521r1) || id == x25519 || id == x448 ||
           (id >= ffdhe2048 && id <= ffdhe8192);
}

bool is_finite_field(uint16_t id) { return id >= ffdhe2048 && id <= ffdhe8192; }

const char* name(uint16_t id) {
    switch (id) {
        case secp256r1: return "secp256r1";
        case secp384r1: return "secp384r1";
        case secp521r1: return "secp521r1";
        case x25519: return "x25519";
        case x448: return "x448";
        case ffdhe2048: return "ffdhe2048";
        case ffdhe3072: return "ffdhe3072";
        case ffdhe4096: return "ffdhe4096";
        case ffdhe6144: return "ffdhe6144";
        case ffdhe8192: return "ffdhe8192";
    }
    return "unknown";
}
}  // namespace group

namespace sigscheme {
const char* name(uint16_t id) {
    switch (id) {
        case rsa_pkcs1_sha256: return "rsa_pkcs1_sha256";
        case rsa_pkcs1_sha384: return "rsa_pkcs1_sha384";
        case rsa_pkcs1_sha512: return "rsa_pkcs1_sha512";
        case ecdsa_secp256r1_sha256: return "ecdsa_secp256r1_sha256";
        case ecdsa_secp384r1_sha384: return "ecdsa_secp384r1_sha384";
        case ecdsa_secp521r1_sha512: return "ecdsa_secp521r1_sha512";
        case rsa_pss_rsae_sha256: return "rsa_pss_rsae_sha256";
        case rsa_pss_rsae_sha384: return "rsa_pss_rsae_sha384";
        case rsa_pss_rsae_sha512: return "rsa_pss_rsae_sha512";
        case ed25519: return "ed25519";
        case ed448: return "ed448";
        case rsa_pkcs1_md5: return "rsa_pkcs1_md5";
        case rsa_pkcs1_sha1: return "rsa_pkcs1_sha1";
        case ecdsa_sha1: return "ecdsa_sha1";
    }
    return "unknown";
}
}  // namespace sigscheme

const Extension* find_extension(const std::vector<Extension>& list, uint16_t type) {
    for (const auto& e : list) {
        if (e.type == type) return &e;
    }
    return nullptr;
}

bool is_hello_retry_request(const ServerHello& sh) {
    return std::equal(sh.random.begin(), sh.random.end(), hello_retry_request_random.begin());
}

std::size_t OfferedPsks::binders_list_length() const {
    std::size_t entries = 0;
    for (const auto& b : binders) entries += 1 + b.size();
    return 2 + entries;
}

// ---------------------------------------------------------------------------
// Extension list codec

namespace {

void write_extensions(ByteWriter& w, const std::vector<Extension>& list, std::size_t floor) {
    w.open_length(0xFFFF);
    std::size_t written = 0;
    for (const auto& e : list) {
        w.u16(e.type);
        w.vector(e.body, 0, 0xFFFF);
        written += 4 + e.body.size();
    }
    if (written < floor) throw EncodeError("extension list below floor");
    w.close_length();
}

std::vector<Extension> read_extensions(ByteReader& r, std::size_t floor) {
    bytes_view block = r.vector(floor, 0xFFFF);
    ByteReader er(block);
    std::vector<Extension> list;
    while (!er.empty()) {
        Extension e;
        e.type = er.u16();
        e.body = to_bytes(er.vector(0, 0xFFFF));
        list.push_back(std::move(e));
    }
    return list;
}

void check_client_hello(const ClientHello& ch) {
    if (ch.legacy_compression_methods != bytes{0x00}) {
        throw ProtocolError(AlertDescription::illegal_parameter,
                            "legacy_compression_methods must be a single 0x00");
    }
    for (std::size_t i = 0; i < ch.extensions.size(); ++i) {
        if (ch.extensions[i].type == ext::pre_shared_key && i + 1 != ch.extensions.size()) {
            throw ProtocolError(AlertDescription::illegal_parameter,
                                "pre_shared_key must be the last extension");
        }
    }
}

ClientHello read_client_hello(ByteReader& r) {
    ClientHello ch;
    ch.legacy_version = r.u16();
    auto rnd = r.take(32);
    std::copy(rnd.begin(), rnd.end(), ch.random.begin());
    ch.legacy_session_id = to_bytes(r.vector(0, 32));
    bytes_view suites = r.vector(2, 0xFFFE);
    if (suites.size() % 2 != 0) throw DecodeError("odd cipher_suites length");
    ByteReader sr(suites);
    while (!sr.empty()) ch.cipher_suites.push_back(sr.u16());
    ch.legacy_compression_methods = to_bytes(r.vector(1, 0xFF));
    ch.extensions = read_extensions(r, 8);
    check_client_hello(ch);
    return ch;
}

void write_client_hello(ByteWriter& w, const ClientHello& ch) {
    check_client_hello(ch);
    w.u16(ch.legacy_version);
    w.raw(bytes_view(ch.random.data(), ch.random.size()));
    w.vector(ch.legacy_session_id, 0, 32);
    {
        ByteWriter sw;
        for (uint16_t s : ch.cipher_suites) sw.u16(s);
        w.vector(sw.data(), 2, 0xFFFE);
    }
    w.vector(ch.legacy_compression_methods, 1, 0xFF);
    write_extensions(w, ch.extensions, 8);
}

ServerHello read_server_hello(ByteReader& r) {
    ServerHello sh;
    sh.legacy_version = r.u16();
    auto rnd = r.take(32);
    std::copy(rnd.begin(), rnd.end(), sh.random.begin());
    sh.legacy_session_id_echo = to_bytes(r.vector(0, 32));
    sh.cipher_suite = r.u16();
    sh.legacy_compression_method = r.u8();
    if (sh.legacy_compression_method != 0x00) {
        throw ProtocolError(AlertDescription::illegal_parameter,
                            "legacy_compression_method must be 0x00");
    }
    sh.extensions = read_extensions(r, 6);
    return sh;
}

void write_server_hello(ByteWriter& w, const ServerHello& sh) {
    w.u16(sh.legacy_version);
    w.raw(bytes_view(sh.random.data(), sh.random.size()));
    w.vector(sh.legacy_session_id_echo, 0, 32);
    w.u16(sh.cipher_suite);
    w.u8(sh.legacy_compression_method);
    write_extensions(w, sh.extensions, 6);
}

CertificateMsg read_certificate(ByteReader& r) {
    CertificateMsg msg;
    msg.certificate_request_context = to_bytes(r.vector(0, 0xFF));
    bytes_view list = r.vector(0, 0xFFFFFF);
    ByteReader lr(list);
    while (!lr.empty()) {
        CertificateEntry entry;
        entry.cert_data = to_bytes(lr.vector(1, 0xFFFFFF));
        entry.extensions = read_extensions(lr, 0);
        msg.certificate_list.push_back(std::move(entry));
    }
    return msg;
}

void write_certificate(ByteWriter& w, const CertificateMsg& msg) {
    w.vector(msg.certificate_request_context, 0, 0xFF);
    w.open_length(0xFFFFFF);
    for (const auto& entry : msg.certificate_list) {
        w.vector(entry.cert_data, 1, 0xFFFFFF);
        write_extensions(w, entry.extensions, 0);
    }
    w.close_length();
}

NewSessionTicketMsg read_new_session_ticket(ByteReader& r) {
    NewSessionTicketMsg msg;
    msg.ticket_lifetime = r.u32();
    if (msg.ticket_lifetime > max_ticket_lifetime) {
        throw ProtocolError(AlertDescription::illegal_parameter,
                            "ticket_lifetime exceeds seven days");
    }
    msg.ticket_age_add = r.u32();
    msg.ticket_nonce = to_bytes(r.vector(0, 0xFF));
    msg.ticket = to_bytes(r.vector(1, 0xFFFF));
    msg.extensions = read_extensions(r, 0);
    return msg;
}

void write_new_session_ticket(ByteWriter& w, const NewSessionTicketMsg& msg) {
    if (msg.ticket_lifetime > max_ticket_lifetime) {
        throw EncodeError("ticket_lifetime exceeds seven days");
    }
    w.u32(msg.ticket_lifetime);
    w.u32(msg.ticket_age_add);
    w.vector(msg.ticket_nonce, 0, 0xFF);
    w.vector(msg.ticket, 1, 0xFFFF);
    write_extensions(w, msg.extensions, 0);
}

HandshakeBody read_body(HandshakeKind kind, ByteReader& r, std::size_t finished_length) {
    switch (kind) {
        case HandshakeKind::client_hello:
            return read_client_hello(r);
        case HandshakeKind::server_hello:
            return read_server_hello(r);
        case HandshakeKind::encrypted_extensions:
            return EncryptedExtensions{read_extensions(r, 0)};
        case HandshakeKind::certificate:
            return read_certificate(r);
        case HandshakeKind::certificate_request: {
            CertificateRequestMsg msg;
            msg.certificate_request_context = to_bytes(r.vector(0, 0xFF));
            msg.extensions = read_extensions(r, 2);
            return msg;
        }
        case HandshakeKind::certificate_verify: {
            CertificateVerifyMsg msg;
            msg.algorithm = r.u16();
            msg.signature = to_bytes(r.vector(0, 0xFFFF));
            return msg;
        }
        case HandshakeKind::finished: {
            std::size_t len = finished_length == 0 ? r.remaining() : finished_length;
            return FinishedMsg{to_bytes(r.take(len))};
        }
        case HandshakeKind::new_session_ticket:
            return read_new_session_ticket(r);
        case HandshakeKind::key_update: {
            uint8_t v = r.u8();
            if (v > 1) {
                throw ProtocolError(AlertDescription::illegal_parameter,
                                    "request_update must be 0 or 1");
            }
            return KeyUpdateMsg{v};
        }
        case HandshakeKind::end_of_early_data:
            return EndOfEarlyDataMsg{};
        case HandshakeKind::message_hash:
            break;  // synthetic, never on the wire
    }
    throw DecodeError("unknown handshake message kind");
}

void write_body(ByteWriter& w, const HandshakeMessage& msg) {
    std::visit(
        [&](const auto& body) {
            using T = std::decay_t<decltype(body)>;
            if constexpr (std::is_same_v<T, ClientHello>) {
                write_client_hello(w, body);
            } else if constexpr (std::is_same_v<T, ServerHello>) {
                write_server_hello(w, body);
            } else if constexpr (std::is_same_v<T, EncryptedExtensions>) {
                write_extensions(w, body.extensions, 0);
            } else if constexpr (std::is_same_v<T, CertificateMsg>) {
                write_certificate(w, body);
            } else if constexpr (std::is_same_v<T, CertificateRequestMsg>) {
                w.vector(body.certificate_request_context, 0, 0xFF);
                write_extensions(w, body.extensions, 2);
            } else if constexpr (std::is_same_v<T, CertificateVerifyMsg>) {
                w.u16(body.algorithm);
                w.vector(body.signature, 0, 0xFFFF);
            } else if constexpr (std::is_same_v<T, FinishedMsg>) {
                w.raw(body.verify_data);
            } else if constexpr (std::is_same_v<T, NewSessionTicketMsg>) {
                write_new_session_ticket(w, body);
            } else if constexpr (std::is_same_v<T, KeyUpdateMsg>) {
                if (body.request_update > 1) throw EncodeError("request_update must be 0 or 1");
                w.u8(body.request_update);
            } else if constexpr (std::is_same_v<T, EndOfEarlyDataMsg>) {
                // empty body
            }
        },
        msg.body);
}

HandshakeKind kind_of_body(const HandshakeBody& body) {
    return std::visit(
        [](const auto& b) {
            using T = std::decay_t<decltype(b)>;
            if constexpr (std::is_same_v<T, ClientHello>) return HandshakeKind::client_hello;
            else if constexpr (std::is_same_v<T, ServerHello>) return HandshakeKind::server_hello;
            else if constexpr (std::is_same_v<T, EncryptedExtensions>)
                return HandshakeKind::encrypted_extensions;
            else if constexpr (std::is_same_v<T, CertificateMsg>) return HandshakeKind::certificate;
            else if constexpr (std::is_same_v<T, CertificateRequestMsg>)
                return HandshakeKind::certificate_request;
            else if constexpr (std::is_same_v<T, CertificateVerifyMsg>)
                return HandshakeKind::certificate_verify;
            else if constexpr (std::is_same_v<T, FinishedMsg>) return HandshakeKind::finished;
            else if constexpr (std::is_same_v<T, NewSessionTicketMsg>)
                return HandshakeKind::new_session_ticket;
            else if constexpr (std::is_same_v<T, KeyUpdateMsg>) return HandshakeKind::key_update;
            else return HandshakeKind::end_of_early_data;
        },
        body);
}

}  // namespace

bytes encode_handshake(const HandshakeMessage& msg) {
    if (msg.kind != kind_of_body(msg.body)) throw EncodeError("kind does not match body");
    ByteWriter w;
    w.u8(static_cast<uint8_t>(msg.kind));
    w.open_length(0xFFFFFF);
    write_body(w, msg);
    w.close_length();
    return w.take();
}

DecodedHandshake decode_handshake(bytes_view input, std::size_t finished_length) {
    ByteReader r(input);
    auto kind = static_cast<HandshakeKind>(r.u8());
    bytes_view body = r.vector(0, 0xFFFFFF);
    ByteReader br(body);
    HandshakeBody decoded = read_body(kind, br, finished_length);
    br.expect_end();
    return {HandshakeMessage{kind, std::move(decoded)}, r.consumed()};
}

// ---------------------------------------------------------------------------
// Structured extension payloads

bytes encode_supported_versions_ch(const std::vector<uint16_t>& versions) {
    ByteWriter inner;
    for (uint16_t v : versions) inner.u16(v);
    ByteWriter w;
    w.vector(inner.data(), 2, 0xFE);
    return w.take();
}

std::vector<uint16_t> decode_supported_versions_ch(bytes_view body) {
    ByteReader r(body);
    bytes_view list = r.vector(2, 0xFE);
    r.expect_end();
    if (list.size() % 2 != 0) throw DecodeError("odd supported_versions length");
    ByteReader lr(list);
    std::vector<uint16_t> versions;
    while (!lr.empty()) versions.push_back(lr.u16());
    return versions;
}

bytes encode_supported_versions_sh(uint16_t selected) {
    ByteWriter w;
    w.u16(selected);
    return w.take();
}

uint16_t decode_supported_versions_sh(bytes_view body) {
    ByteReader r(body);
    uint16_t v = r.u16();
    r.expect_end();
    return v;
}

bytes encode_supported_groups(const std::vector<uint16_t>& groups) {
    ByteWriter inner;
    for (uint16_t g : groups) inner.u16(g);
    ByteWriter w;
    w.vector(inner.data(), 2, 0xFFFF);
    return w.take();
}

std::vector<uint16_t> decode_supported_groups(bytes_view body) {
    ByteReader r(body);
    bytes_view list = r.vector(2, 0xFFFF);
    r.expect_end();
    if (list.size() % 2 != 0) throw DecodeError("odd supported_groups length");
    ByteReader lr(list);
    std::vector<uint16_t> groups;
    while (!lr.empty()) groups.push_back(lr.u16());
    return groups;
}

bytes encode_signature_algorithms(const std::vector<uint16_t>& schemes) {
    ByteWriter inner;
    for (uint16_t s : schemes) inner.u16(s);
    ByteWriter w;
    w.vector(inner.data(), 2, 0xFFFE);
    return w.take();
}

std::vector<uint16_t> decode_signature_algorithms(bytes_view body) {
    ByteReader r(body);
    bytes_view list = r.vector(2, 0xFFFE);
    r.expect_end();
    if (list.size() % 2 != 0) throw DecodeError("odd signature_algorithms length");
    ByteReader lr(list);
    std::vector<uint16_t> schemes;
    while (!lr.empty()) schemes.push_back(lr.u16());
    return schemes;
}

bytes encode_key_share_ch(const std::vector<KeyShareEntry>& shares) {
    ByteWriter inner;
    for (const auto& s : shares) {
        inner.u16(s.group);
        inner.vector(s.key_exchange, 1, 0xFFFF);
    }
    ByteWriter w;
    w.vector(inner.data(), 0, 0xFFFF);
    return w.take();
}

std::vector<KeyShareEntry> decode_key_share_ch(bytes_view body) {
    ByteReader r(body);
    bytes_view list = r.vector(0, 0xFFFF);
    r.expect_end();
    ByteReader lr(list);
    std::vector<KeyShareEntry> shares;
    while (!lr.empty()) {
        KeyShareEntry e;
        e.group = lr.u16();
        e.key_exchange = to_bytes(lr.vector(1, 0xFFFF));
        shares.push_back(std::move(e));
    }
    return shares;
}

bytes encode_key_share_sh(const KeyShareEntry& share) {
    ByteWriter w;
    w.u16(share.group);
    w.vector(share.key_exchange, 1, 0xFFFF);
    return w.take();
}

KeyShareEntry decode_key_share_sh(bytes_view body) {
    ByteReader r(body);
    KeyShareEntry e;
    e.group = r.u16();
    e.key_exchange = to_bytes(r.vector(1, 0xFFFF));
    r.expect_end();
    return e;
}

bytes encode_key_share_hrr(uint16_t selected_group) {
    ByteWriter w;
    w.u16(selected_group);
    return w.take();
}

uint16_t decode_key_share_hrr(bytes_view body) {
    ByteReader r(body);
    uint16_t g = r.u16();
    r.expect_end();
    return g;
}

bytes encode_psk_modes(const std::vector<uint8_t>& modes) {
    ByteWriter w;
    w.vector(modes, 1, 0xFF);
    return w.take();
}

std::vector<uint8_t> decode_psk_modes(bytes_view body) {
    ByteReader r(body);
    bytes_view list = r.vector(1, 0xFF);
    r.expect_end();
    return {list.begin(), list.end()};
}

bytes encode_pre_shared_key_ch(const OfferedPsks& offered) {
    ByteWriter w;
    w.open_length(0xFFFF);  // identities <7..2^16-1>
    for (const auto& id : offered.identities) {
        w.vector(id.identity, 1, 0xFFFF);
        w.u32(id.obfuscated_ticket_age);
    }
    w.close_length();
    w.open_length(0xFFFF);  // binders <33..2^16-1>
    for (const auto& b : offered.binders) {
        w.vector(b, 32, 0xFF);
    }
    w.close_length();
    return w.take();
}

OfferedPsks decode_pre_shared_key_ch(bytes_view body) {
    ByteReader r(body);
    OfferedPsks offered;
    bytes_view ids = r.vector(7, 0xFFFF);
    ByteReader ir(ids);
    while (!ir.empty()) {
        PskIdentity id;
        id.identity = to_bytes(ir.vector(1, 0xFFFF));
        id.obfuscated_ticket_age = ir.u32();
        offered.identities.push_back(std::move(id));
    }
    bytes_view binders = r.vector(33, 0xFFFF);
    ByteReader br(binders);
    while (!br.empty()) {
        offered.binders.push_back(to_bytes(br.vector(32, 0xFF)));
    }
    r.expect_end();
    return offered;
}

bytes encode_pre_shared_key_sh(uint16_t selected_identity) {
    ByteWriter w;
    w.u16(selected_identity);
    return w.take();
}

uint16_t decode_pre_shared_key_sh(bytes_view body) {
    ByteReader r(body);
    uint16_t v = r.u16();
    r.expect_end();
    return v;
}

bytes encode_cookie(bytes_view cookie) {
    ByteWriter w;
    w.vector(cookie, 1, 0xFFFF);
    return w.take();
}

bytes decode_cookie(bytes_view body) {
    ByteReader r(body);
    bytes c = to_bytes(r.vector(1, 0xFFFF));
    r.expect_end();
    return c;
}

bytes encode_early_data_nst(uint32_t max_early_data_size) {
    ByteWriter w;
    w.u32(max_early_data_size);
    return w.take();
}

uint32_t decode_early_data_nst(bytes_view body) {
    ByteReader r(body);
    uint32_t v = r.u32();
    r.expect_end();
    return v;
}

// ---------------------------------------------------------------------------
// Extension placement (Table 3)

namespace {

using Host = ExtensionHost;

constexpr unsigned bit(Host h) { return 1u << static_cast<unsigned>(h); }

const std::map<uint16_t, unsigned>& placement_table() {
    static const std::map<uint16_t, unsigned> table = {
        {ext::application_layer_protocol_negotiation, bit(Host::CH) | bit(Host::EE)},
        {ext::certificate_authorities, bit(Host::CH) | bit(Host::CR)},
        {ext::client_certificate_type, bit(Host::CH) | bit(Host::EE)},
        {ext::cookie, bit(Host::CH) | bit(Host::HRR)},
        {ext::early_data, bit(Host::CH) | bit(Host::EE) | bit(Host::NST)},
        {ext::heartbeat, bit(Host::CH) | bit(Host::EE)},
        {ext::key_share, bit(Host::CH) | bit(Host::SH) | bit(Host::HRR)},
        {ext::max_fragment_length, bit(Host::CH) | bit(Host::EE)},
        {ext::oid_filters, bit(Host::CR)},
        {ext::padding, bit(Host::CH)},
        {ext::post_handshake_auth, bit(Host::CH)},
        {ext::pre_shared_key, bit(Host::CH) | bit(Host::SH)},
        {ext::psk_key_exchange_modes, bit(Host::CH)},
        {ext::server_certificate_type, bit(Host::CH) | bit(Host::EE)},
        {ext::server_name, bit(Host::CH) | bit(Host::EE)},
        {ext::signature_algorithms, bit(Host::CH) | bit(Host::CR)},
        {ext::signature_algorithms_cert, bit(Host::CH) | bit(Host::CR)},
        {ext::signed_certificate_timestamp, bit(Host::CH) | bit(Host::CR) | bit(Host::CT)},
        {ext::status_request, bit(Host::CH) | bit(Host::CR) | bit(Host::CT)},
        {ext::supported_groups, bit(Host::CH) | bit(Host::EE)},
        {ext::supported_versions, bit(Host::CH) | bit(Host::SH) | bit(Host::HRR)},
        {ext::use_srtp, bit(Host::CH) | bit(Host::EE)},
    };
    return table;
}

}  // namespace

bool placement_table_knows(uint16_t extension_type) {
    return placement_table().count(extension_type) != 0;
}

bool placement_allows(ExtensionHost host, uint16_t extension_type) {
    auto it = placement_table().find(extension_type);
    if (it == placement_table().end()) return true;  // unknown types judged upstream
    return (it->second & bit(host)) != 0;
}

std::vector<uint16_t> placement_known_extension_types() {
    std::vector<uint16_t> types;
    for (const auto& [type, mask] : placement_table()) types.push_back(type);
    return types;
}

std::optional<PlacementViolation> check_extension_placement(
    ExtensionHost host, const std::vector<Extension>& extensions) {
    for (const auto& e : extensions) {
        if (!placement_allows(host, e.type)) return PlacementViolation{e.type};
    }
    return std::nullopt;
}

}  // namespace tls13
