#include "tls13/key_schedule.hpp"

#include <stdexcept>

namespace tls13 {

void KeySchedule::require_stage(Stage expected, const char* op) const {
    if (stage_ != expected) {
        throw std::logic_error(std::string("key schedule: ") + op + " out of stage order");
    }
}

bytes KeySchedule::empty_hash() const { return hash(hash_, {}); }

void KeySchedule::derive_early(std::optional<bytes_view> psk_secret) {
    require_stage(Stage::fresh, "derive_early");
    secure_bytes zeros(hash_alg(hash_).output_length, 0);
    bytes_view ikm = psk_secret.has_value() ? *psk_secret : bytes_view(zeros);
    secret_ = hkdf_extract(hash_, std::nullopt, ikm);
    stage_ = Stage::early;
}

secure_bytes KeySchedule::binder_key(PskKind kind) const {
    require_stage(Stage::early, "binder_key");
    const char* label = kind == PskKind::external ? "ext binder" : "res binder";
    return derive_secret(hash_, secret_, label, empty_hash());
}

TrafficSecret KeySchedule::client_early_traffic_secret(bytes_view ch_hash) const {
    require_stage(Stage::early, "client_early_traffic_secret");
    return {Sender::client, SecretPurpose::early, 0, hash_,
            derive_secret(hash_, secret_, "c e traffic", ch_hash)};
}

secure_bytes KeySchedule::early_exporter_master_secret(bytes_view ch_hash) const {
    require_stage(Stage::early, "early_exporter_master_secret");
    return derive_secret(hash_, secret_, "e exp master", ch_hash);
}

void KeySchedule::into_handshake(std::optional<bytes_view> ecdhe_shared) {
    require_stage(Stage::early, "into_handshake");
    secure_bytes salt = derive_secret(hash_, secret_, "derived", empty_hash());
    secure_bytes zeros(hash_alg(hash_).output_length, 0);
    bytes_view ikm = ecdhe_shared.has_value() ? *ecdhe_shared : bytes_view(zeros);
    secret_ = hkdf_extract(hash_, bytes_view(salt), ikm);
    stage_ = Stage::handshake;
}

std::pair<TrafficSecret, TrafficSecret> KeySchedule::handshake_traffic_secrets(
    bytes_view th_through_server_hello) const {
    require_stage(Stage::handshake, "handshake_traffic_secrets");
    TrafficSecret client{Sender::client, SecretPurpose::handshake, 0, hash_,
                         derive_secret(hash_, secret_, "c hs traffic", th_through_server_hello)};
    TrafficSecret server{Sender::server, SecretPurpose::handshake, 0, hash_,
                         derive_secret(hash_, secret_, "s hs traffic", th_through_server_hello)};
    return {std::move(client), std::move(server)};
}

void KeySchedule::into_master() {
    require_stage(Stage::handshake, "into_master");
    secure_bytes salt = derive_secret(hash_, secret_, "derived", empty_hash());
    secure_bytes zeros(hash_alg(hash_).output_length, 0);
    secret_ = hkdf_extract(hash_, bytes_view(salt), zeros);
    stage_ = Stage::master;
}

std::pair<TrafficSecret, TrafficSecret> KeySchedule::application_traffic_secrets(
    bytes_view th_through_server_finished) const {
    require_stage(Stage::master, "application_traffic_secrets");
    TrafficSecret client{
        Sender::client, SecretPurpose::application, 0, hash_,
        derive_secret(hash_, secret_, "c ap traffic", th_through_server_finished)};
    TrafficSecret server{
        Sender::server, SecretPurpose::application, 0, hash_,
        derive_secret(hash_, secret_, "s ap traffic", th_through_server_finished)};
    return {std::move(client), std::move(server)};
}

std::pair<secure_bytes, secure_bytes> KeySchedule::exporter_and_resumption_masters(
    bytes_view th_server_finished, bytes_view th_client_finished) const {
    require_stage(Stage::master, "exporter_and_resumption_masters");
    return {derive_secret(hash_, secret_, "exp master", th_server_finished),
            derive_secret(hash_, secret_, "res master", th_client_finished)};
}

TrafficSecret update_traffic_secret(const TrafficSecret& secret) {
    if (secret.purpose != SecretPurpose::application) {
        throw std::logic_error("traffic update applies to application secrets only");
    }
    if (secret.generation >= max_secret_generation) {
        throw std::logic_error("traffic secret generation limit reached");
    }
    bytes empty = hash(secret.hash, {});
    return {secret.sender, SecretPurpose::application, secret.generation + 1, secret.hash,
            derive_secret(secret.hash, secret.secret, "traffic upd", empty)};
}

TrafficKeys make_traffic_keys(const TrafficSecret& secret, const AeadDescriptor& aead) {
    return {hkdf_expand_label(secret.hash, secret.secret, "key", {}, aead.key_length),
            hkdf_expand_label(secret.hash, secret.secret, "iv", {}, aead.iv_length)};
}

secure_bytes finished_key(const TrafficSecret& secret) {
    return hkdf_expand_label(secret.hash, secret.secret, "finished", {},
                             hash_alg(secret.hash).output_length);
}

bytes compute_verify_data(HashKind hash_kind, bytes_view finished_key_bytes,
                          bytes_view transcript_hash) {
    secure_bytes mac = hmac(hash_kind, finished_key_bytes, transcript_hash);
    return bytes(mac.begin(), mac.end());
}

secure_bytes derive_resumption_psk(HashKind hash, bytes_view resumption_master,
                                   bytes_view ticket_nonce) {
    return hkdf_expand_label(hash, resumption_master, "resumption", ticket_nonce,
                             hash_alg(hash).output_length);
}

bytes compute_binder(const PreSharedKey& psk, bytes_view truncated_transcript_hash) {
    KeySchedule ks(psk.hash);
    ks.derive_early(bytes_view(psk.secret));
    secure_bytes key = ks.binder_key(psk.kind);
    secure_bytes mac = hmac(psk.hash, key, truncated_transcript_hash);
    return bytes(mac.begin(), mac.end());
}

bool verify_binder(const PreSharedKey& psk, bytes_view truncated_transcript_hash,
                   bytes_view binder) {
    return ct_equal(compute_binder(psk, truncated_transcript_hash), binder);
}

uint32_t obfuscate_ticket_age(uint32_t age_ms, uint32_t ticket_age_add) {
    return age_ms + ticket_age_add;  // mod 2^32 by unsigned wrap
}

uint32_t deobfuscate_ticket_age(uint32_t obfuscated, uint32_t ticket_age_add) {
    return obfuscated - ticket_age_add;
}

const char* keylog_label(const TrafficSecret& secret) {
    bool client = secret.sender == Sender::client;
    switch (secret.purpose) {
        case SecretPurpose::early:
            return "CLIENT_EARLY_TRAFFIC_SECRET";
        case SecretPurpose::handshake:
            return client ? "CLIENT_HANDSHAKE_TRAFFIC_SECRET" : "SERVER_HANDSHAKE_TRAFFIC_SECRET";
        case SecretPurpose::application:
            break;  // generation-suffixed, handled by callers
        default:
            break;
    }
    return client ? "CLIENT_TRAFFIC_SECRET" : "SERVER_TRAFFIC_SECRET";
}

}  // namespace tls13
