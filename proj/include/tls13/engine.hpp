#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "tls13/bytes.hpp"
#include "tls13/crypto.hpp"
#include "tls13/key_schedule.hpp"
#include "tls13/record.hpp"
#include "tls13/transcript.hpp"
#include "tls13/wire.hpp"

namespace tls13 {

// ---------------------------------------------------------------------------
// Credentials: raw public keys on the wire (cert_data = scheme || key bytes),
// one entry per Certificate message. Chain validation stays pluggable.

using Credential = SignatureKeyPair;

struct RawCredential {
    uint16_t scheme = 0;
    bytes public_key;
};

bytes encode_raw_credential(uint16_t scheme, bytes_view public_key);
RawCredential decode_raw_credential(bytes_view cert_data);

// Throws ProtocolError to reject a peer chain.
using CertificateVerifier = std::function<void(const CertificateMsg&)>;

CertificateVerifier make_pinned_verifier(bytes expected_public_key);

// ---------------------------------------------------------------------------

using KeylogCallback =
    std::function<void(const std::string& label, bytes_view client_random, bytes_view secret)>;

using Clock = std::function<uint64_t()>;  // unix milliseconds

struct CommonConfig {
    std::vector<uint16_t> cipher_suites{suite::aes_128_gcm_sha256};
    std::vector<uint16_t> groups{group::x25519};
    std::vector<uint16_t> signature_schemes{sigscheme::ed25519};
    std::shared_ptr<Rng> rng;  // SystemRng when unset
    Clock clock;               // wall clock when unset
    KeylogCallback keylog;
    std::size_t record_padding = 0;
};

struct ClientConfig : CommonConfig {
    std::vector<PreSharedKey> psks;
    std::vector<uint8_t> psk_modes{psk_mode::psk_dhe_ke};
    // false sends an empty key_share vector to request server group selection
    bool offer_key_shares = true;
    // groups to pre-generate shares for; defaults to the first configured group
    std::vector<uint16_t> share_groups;
    std::optional<Credential> credential;
    std::optional<bytes> pinned_server_key;
    CertificateVerifier verifier;  // overrides the pin when set
    bool offer_post_handshake_auth = false;
    bool offer_early_data = false;  // extension only; early data itself is never sent
    bool reject_sha1_certificates = true;
    std::optional<bytes> server_name;
};

enum class ClientAuthPolicy { off, request, require };

struct ServerConfig : CommonConfig {
    std::optional<Credential> credential;
    ClientAuthPolicy client_auth = ClientAuthPolicy::off;
    uint32_t ticket_count = 0;
    uint32_t ticket_lifetime = 86400;  // seconds
    secure_bytes ticket_key;           // 32 bytes; drawn from rng when empty
    std::vector<PreSharedKey> external_psks;
    bool send_cookie_with_hrr = false;
    bool check_legacy_fields = true;
    bool require_server_name = false;
    std::optional<bytes> pinned_client_key;
    CertificateVerifier client_verifier;
    bool reject_sha1_certificates = true;
    std::size_t max_early_data_skip = max_plaintext_fragment;
    std::optional<uint32_t> ticket_max_early_data;
};

// ---------------------------------------------------------------------------

struct NegotiationResult {
    uint16_t version = 0;
    uint16_t cipher_suite = 0;
    std::optional<uint16_t> group;
    std::optional<uint8_t> psk_mode;  // set when a pre-shared key was used
    bool resumed = false;
    bool client_authenticated = false;
};

struct EmitRecord {
    bytes record;
};
struct HandshakeComplete {
    NegotiationResult result;
};
struct TicketIssued {
    PreSharedKey psk;
};
struct AppData {
    bytes data;
};
struct AlertSent {
    Alert alert;
};
struct Aborted {
    Alert alert;
    std::string reason;
    bool local = true;  // false when the peer's error alert closed us
};

using Event = std::variant<EmitRecord, HandshakeComplete, TicketIssued, AppData, AlertSent, Aborted>;
using Events = std::vector<Event>;

// ---------------------------------------------------------------------------
// Sans-IO engines: feed raw transport bytes in, collect events out. Engines
// never block and never touch a socket.

class EngineBase {
  public:
    virtual ~EngineBase() = default;

    Events on_bytes(bytes_view input);
    Events send_app_data(bytes_view data);
    Events initiate_key_update(bool request_peer);
    Events close();

    bool connected() const { return connected_; }
    bool aborted() const { return aborted_; }
    bool read_closed() const { return read_closed_ || aborted_; }
    bool write_closed() const { return write_closed_ || aborted_; }
    bool awaiting_input() const { return !connected_ && !aborted_; }

    const NegotiationResult& negotiation() const { return negotiation_; }

    // label -> lowercase hex, in derivation order; feeds the harness report
    const std::vector<std::pair<std::string, std::string>>& secret_trace() const {
        return secret_trace_;
    }
    // transcript hashes at the named checkpoints, as reached
    const std::vector<std::pair<std::string, std::string>>& checkpoints() const {
        return checkpoints_;
    }

    uint64_t write_sequence() const { return write_state_ ? write_state_->sequence() : 0; }
    uint32_t write_generation() const {
        return write_state_ ? write_state_->secret().generation : 0;
    }
    uint32_t read_generation() const {
        return read_state_ ? read_state_->secret().generation : 0;
    }

  protected:
    EngineBase(Sender role, CommonConfig common);

    Sender role_;
    std::shared_ptr<Rng> rng_;
    Clock clock_;
    KeylogCallback keylog_;
    std::size_t record_padding_ = 0;

    // negotiated parameters
    std::optional<SuiteProfile> profile_;
    std::unique_ptr<Transcript> transcript_;
    std::unique_ptr<KeySchedule> schedule_;
    std::optional<DirectionState> read_state_;
    std::optional<DirectionState> write_state_;
    std::array<uint8_t, 32> client_random_{};

    NegotiationResult negotiation_;
    bool connected_ = false;
    bool aborted_ = false;
    bool read_closed_ = false;
    bool write_closed_ = false;
    bool seen_protected_read_ = false;

    bytes inbuf_;
    bytes hs_buf_;

    // early-data skip budgets (server side; harmless elsewhere)
    bool skip_early_records_ = false;   // trial-decrypt mode, ServerHello path
    bool discard_early_records_ = false;  // post-HRR plaintext path
    std::size_t early_skip_budget_ = 0;
    std::size_t early_skipped_ = 0;

    std::vector<std::pair<std::string, std::string>> secret_trace_;
    std::vector<std::pair<std::string, std::string>> checkpoints_;

    // role-specific consumption
    virtual void handle_handshake(HandshakeKind kind, bytes_view framed, Events& events) = 0;
    virtual bool kind_allowed(HandshakeKind kind) const = 0;

    void process_record(const RecordView& record, Events& events);
    void dispatch_plaintext(ContentType type, bytes_view content, Events& events);
    void drain_handshake_buffer(Events& events);
    void handle_alert_payload(bytes_view payload, Events& events);

    void send_handshake(bytes_view framed, Events& events, bool force_plaintext = false);
    void send_alert(const Alert& alert, Events& events);
    void abort_with(AlertDescription desc, const std::string& reason, Events& events);

    void install_read(TrafficSecret secret);
    void install_write(TrafficSecret secret);
    void note_secret(const std::string& label, bytes_view secret);
    void note_checkpoint(const std::string& name, bytes_view hash);
    void log_traffic_secret(const TrafficSecret& secret);

    std::size_t finished_length() const;
    bytes transcript_hash() const { return transcript_->hash(); }

    void handle_key_update(const KeyUpdateMsg& msg, Events& events);
    void complete_handshake(Events& events);

    // post-handshake authentication bookkeeping (client responder and
    // server collector)
    struct PostHsAuth {
        enum class Stage { none, wait_cert, wait_cv, wait_fin } stage = Stage::none;
        bytes context;
        std::unique_ptr<Transcript> transcript;
        std::optional<RawCredential> peer_credential;
    };
    PostHsAuth post_hs_;
};

class ClientEngine final : public EngineBase {
  public:
    explicit ClientEngine(ClientConfig config);

    // Emits the ClientHello. Call once.
    Events start();

  private:
    ClientConfig config_;

    enum class State { Begin, WaitSH, WaitEE, WaitCertOrCR, WaitCV, WaitFin, Connected, Closed };
    State state_ = State::Begin;

    // offer bookkeeping
    bytes first_client_hello_;  // framed CH1
    bytes hrr_frame_;           // framed HRR when one was consumed
    std::vector<uint16_t> offered_extension_types_;
    std::vector<std::unique_ptr<KeyExchange>> key_exchanges_;
    std::vector<PreSharedKey> offered_psks_;
    bool hrr_seen_ = false;
    bool cr_seen_ = false;
    std::optional<CertificateRequestMsg> handshake_cert_request_;
    std::optional<RawCredential> server_credential_;
    uint16_t hrr_suite_ = 0;
    uint16_t hrr_selected_version_ = 0;
    uint16_t hrr_group_ = 0;

    TrafficSecret client_app_secret_;
    TrafficSecret server_app_secret_;
    secure_bytes resumption_master_;

    void handle_handshake(HandshakeKind kind, bytes_view framed, Events& events) override;
    bool kind_allowed(HandshakeKind kind) const override;

    ClientHello build_client_hello(std::optional<uint16_t> single_share_group,
                                   const std::optional<bytes>& cookie);
    bytes frame_client_hello(ClientHello ch, bool after_hrr);
    void on_server_hello(const ServerHello& sh, bytes_view framed, Events& events);
    void on_hello_retry_request(const ServerHello& hrr, bytes_view framed, Events& events);
    void on_encrypted_extensions(const EncryptedExtensions& ee, Events& events);
    void on_certificate_request(const CertificateRequestMsg& cr, bytes_view framed,
                                Events& events);
    void on_certificate(const CertificateMsg& ct, bytes_view framed, Events& events);
    void on_certificate_verify(const CertificateVerifyMsg& cv, bytes_view framed, Events& events);
    void on_finished(const FinishedMsg& fin, bytes_view framed, Events& events);
    void on_new_session_ticket(const NewSessionTicketMsg& nst, Events& events);
    void on_post_handshake_cert_request(const CertificateRequestMsg& cr, bytes_view framed,
                                        Events& events);

    void check_unsolicited(const std::vector<Extension>& extensions, ExtensionHost host);
    void verify_peer_chain(const CertificateMsg& ct) const;
    void send_client_flight(Events& events);
};

class ServerEngine final : public EngineBase {
  public:
    explicit ServerEngine(ServerConfig config);

    // Post-handshake authentication request; requires the client to have
    // offered post_handshake_auth.
    Events request_client_auth();

  private:
    ServerConfig config_;

    enum class State {
        WaitCH,
        WaitCH2,
        WaitClientCert,
        WaitClientCV,
        WaitClientFin,
        Connected,
        Closed
    };
    State state_ = State::WaitCH;

    bool hrr_sent_ = false;
    uint16_t selected_suite_ = 0;
    uint16_t selected_group_ = 0;
    bytes cookie_sent_;
    secure_bytes cookie_key_;
    bytes ch1_for_binder_;  // framed first ClientHello, kept for retry binders
    bytes hrr_for_binder_;
    std::unique_ptr<KeyExchange> key_exchange_;
    std::optional<RawCredential> client_credential_;
    std::vector<uint16_t> client_signature_schemes_;
    bytes client_session_id_;
    bool client_offered_post_hs_auth_ = false;
    std::optional<PreSharedKey> selected_psk_;
    std::optional<uint8_t> selected_psk_mode_;
    uint16_t selected_psk_index_ = 0;

    TrafficSecret client_app_secret_;
    TrafficSecret server_app_secret_;
    TrafficSecret client_hs_secret_;
    secure_bytes resumption_master_;
    bytes th_server_finished_;
    uint16_t ticket_counter_ = 0;

    void handle_handshake(HandshakeKind kind, bytes_view framed, Events& events) override;
    bool kind_allowed(HandshakeKind kind) const override;

    void on_client_hello(const ClientHello& ch, bytes_view framed, Events& events);
    void emit_hello_retry_request(const ClientHello& ch, bytes_view framed, Events& events);
    void emit_server_flight(const ClientHello& ch, bytes_view framed, Events& events);
    void on_client_certificate(const CertificateMsg& ct, bytes_view framed, Events& events);
    void on_client_certificate_verify(const CertificateVerifyMsg& cv, bytes_view framed,
                                      Events& events);
    void on_client_finished(const FinishedMsg& fin, bytes_view framed, Events& events);
    void on_post_hs_certificate(const CertificateMsg& ct, bytes_view framed, Events& events);
    void on_post_hs_certificate_verify(const CertificateVerifyMsg& cv, bytes_view framed,
                                       Events& events);
    void issue_tickets(Events& events);

    struct PskSelection {
        PreSharedKey psk;
        uint16_t index;
        uint8_t mode;
    };
    std::optional<PskSelection> select_psk(const ClientHello& ch, bytes_view framed,
                                           uint16_t selected_suite);
    std::optional<PreSharedKey> open_ticket(bytes_view ticket) const;
    bytes seal_ticket(const PreSharedKey& psk);

    bytes make_cookie(bytes_view ch1_hash, uint16_t selected_group);
    bool check_cookie(bytes_view cookie, bytes_view expected_ch1_hash,
                      uint16_t expected_group) const;
};

}  // namespace tls13
