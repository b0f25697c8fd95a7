#pragma once

#include <functional>
#include <optional>
#include <string_view>
#include <utility>

#include "tls13/bytes.hpp"
#include "tls13/crypto.hpp"
#include "tls13/hkdf.hpp"

namespace tls13 {

enum class Sender { client, server };

enum class SecretPurpose {
    early,
    handshake,
    application,
    exporter_master,
    resumption_master,
    binder,
};

struct TrafficSecret {
    Sender sender = Sender::client;
    SecretPurpose purpose = SecretPurpose::handshake;
    uint32_t generation = 0;  // nonzero only for application secrets
    HashKind hash = HashKind::sha256;
    secure_bytes secret;
};

struct TrafficKeys {
    secure_bytes key;
    secure_bytes iv;
};

enum class PskKind { external, resumption };

struct PreSharedKey {
    secure_bytes secret;
    bytes identity;
    PskKind kind = PskKind::external;
    HashKind hash = HashKind::sha256;  // external PSKs default to SHA-256
    uint32_t ticket_age_add = 0;
    uint32_t lifetime_seconds = 0;
    uint64_t issued_unix_ms = 0;
    std::optional<uint32_t> max_early_data;
};

// Staged secret derivation: fresh -> early -> handshake -> master. Stage
// transitions are the only way forward; out-of-order calls throw.
class KeySchedule {
  public:
    enum class Stage { fresh, early, handshake, master };

    explicit KeySchedule(HashKind hash) : hash_(hash) {}

    Stage stage() const { return stage_; }
    HashKind hash_kind() const { return hash_; }

    // Early Secret = HKDF-Extract(0s, PSK); PSK is 0s for (EC)DHE-only.
    void derive_early(std::optional<bytes_view> psk_secret);

    secure_bytes binder_key(PskKind kind) const;  // "ext binder" / "res binder"
    TrafficSecret client_early_traffic_secret(bytes_view ch_hash) const;
    secure_bytes early_exporter_master_secret(bytes_view ch_hash) const;

    // Handshake Secret = HKDF-Extract(Derive-Secret(Early, "derived", ""), K);
    // K is 0s for PSK-only key exchange.
    void into_handshake(std::optional<bytes_view> ecdhe_shared);

    std::pair<TrafficSecret, TrafficSecret> handshake_traffic_secrets(
        bytes_view th_through_server_hello) const;

    // Master Secret = HKDF-Extract(Derive-Secret(Handshake, "derived", ""), 0s)
    void into_master();

    std::pair<TrafficSecret, TrafficSecret> application_traffic_secrets(
        bytes_view th_through_server_finished) const;

    // exporter master binds the server-Finished checkpoint; resumption master
    // binds the client-Finished checkpoint.
    std::pair<secure_bytes, secure_bytes> exporter_and_resumption_masters(
        bytes_view th_server_finished, bytes_view th_client_finished) const;

    const secure_bytes& current_secret() const { return secret_; }

  private:
    HashKind hash_;
    Stage stage_ = Stage::fresh;
    secure_bytes secret_;

    void require_stage(Stage expected, const char* op) const;
    bytes empty_hash() const;
};

inline constexpr uint32_t max_secret_generation = 1u << 24;

// Derive-Secret(s, "traffic upd", ""); application secrets only.
TrafficSecret update_traffic_secret(const TrafficSecret& secret);

TrafficKeys make_traffic_keys(const TrafficSecret& secret, const AeadDescriptor& aead);

secure_bytes finished_key(const TrafficSecret& secret);
bytes compute_verify_data(HashKind hash, bytes_view finished_key_bytes,
                          bytes_view transcript_hash);

secure_bytes derive_resumption_psk(HashKind hash, bytes_view resumption_master,
                                   bytes_view ticket_nonce);

bytes compute_binder(const PreSharedKey& psk, bytes_view truncated_transcript_hash);
bool verify_binder(const PreSharedKey& psk, bytes_view truncated_transcript_hash,
                   bytes_view binder);

uint32_t obfuscate_ticket_age(uint32_t age_ms, uint32_t ticket_age_add);
uint32_t deobfuscate_ticket_age(uint32_t obfuscated, uint32_t ticket_age_add);

// NSS key-log naming for the secrets an engine installs.
const char* keylog_label(const TrafficSecret& secret);

}  // namespace tls13
