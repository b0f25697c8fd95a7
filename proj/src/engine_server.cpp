#include <algorithm>

#include "tls13/engine.hpp"

namespace tls13 {

namespace {

bytes certificate_verify_input(bool server, bytes_view transcript_hash) {
    bytes input(64, 0x20);
    const std::string context = server ? "TLS 1.3, server CertificateVerify"
                                       : "TLS 1.3, client CertificateVerify";
    input.insert(input.end(), context.begin(), context.end());
    input.push_back(0x00);
    append(input, transcript_hash);
    return input;
}

constexpr char ticket_aad[] = "session-ticket";

}  // namespace

ServerEngine::ServerEngine(ServerConfig config)
    : EngineBase(Sender::server, config), config_(std::move(config)) {
    if (config_.cipher_suites.empty()) throw std::invalid_argument("no cipher suites configured");
    for (uint16_t s : config_.cipher_suites) {
        if (!suite_profile(s).has_value()) {
            throw std::invalid_argument(std::string("unsupported cipher suite ") +
                                        suite::name(s));
        }
    }
    if (config_.ticket_lifetime > max_ticket_lifetime) {
        throw std::invalid_argument("ticket lifetime exceeds seven days");
    }
    if (config_.ticket_key.empty()) {
        config_.ticket_key.resize(32);
        rng_->fill(config_.ticket_key);
    }
    if (config_.ticket_key.size() != 32) throw std::invalid_argument("ticket key must be 32 bytes");
    cookie_key_.resize(32);
    rng_->fill(cookie_key_);
}

bool ServerEngine::kind_allowed(HandshakeKind kind) const {
    switch (state_) {
        case State::WaitCH:
        case State::WaitCH2:
            return kind == HandshakeKind::client_hello;
        case State::WaitClientCert:
            return kind == HandshakeKind::certificate;
        case State::WaitClientCV:
            return kind == HandshakeKind::certificate_verify;
        case State::WaitClientFin:
            return kind == HandshakeKind::finished;
        case State::Connected:
            switch (post_hs_.stage) {
                case PostHsAuth::Stage::wait_cert:
                    return kind == HandshakeKind::key_update ||
                           kind == HandshakeKind::certificate;
                case PostHsAuth::Stage::wait_cv:
                    return kind == HandshakeKind::key_update ||
                           kind == HandshakeKind::certificate_verify;
                case PostHsAuth::Stage::wait_fin:
                    return kind == HandshakeKind::key_update ||
                           kind == HandshakeKind::finished;
                case PostHsAuth::Stage::none:
                    return kind == HandshakeKind::key_update;
            }
            return false;
        case State::Closed:
            return false;
    }
    return false;
}

void ServerEngine::handle_handshake(HandshakeKind kind, bytes_view framed, Events& events) {
    auto decoded = decode_handshake(framed, finished_length());
    switch (kind) {
        case HandshakeKind::client_hello:
            on_client_hello(std::get<ClientHello>(decoded.msg.body), framed, events);
            return;
        case HandshakeKind::certificate:
            if (state_ == State::Connected) {
                on_post_hs_certificate(std::get<CertificateMsg>(decoded.msg.body), framed,
                                       events);
            } else {
                on_client_certificate(std::get<CertificateMsg>(decoded.msg.body), framed, events);
            }
            return;
        case HandshakeKind::certificate_verify:
            if (state_ == State::Connected) {
                on_post_hs_certificate_verify(std::get<CertificateVerifyMsg>(decoded.msg.body),
                                              framed, events);
            } else {
                on_client_certificate_verify(std::get<CertificateVerifyMsg>(decoded.msg.body),
                                             framed, events);
            }
            return;
        case HandshakeKind::finished:
            on_client_finished(std::get<FinishedMsg>(decoded.msg.body), framed, events);
            return;
        case HandshakeKind::key_update:
            handle_key_update(std::get<KeyUpdateMsg>(decoded.msg.body), events);
            return;
        default:
            throw ProtocolError(AlertDescription::unexpected_message,
                                "message kind not consumable by a server");
    }
}

// ---------------------------------------------------------------------------
// Ticket sealing: ticket = nonce || AEAD(ticket_key, nonce, "session-ticket",
// psk parameters). Lets the engine stay stateless across connections.

bytes ServerEngine::seal_ticket(const PreSharedKey& psk) {
    ByteWriter w;
    w.u8(psk.hash == HashKind::sha256 ? 0 : 1);
    w.vector(psk.secret, 0, 0xFF);
    w.u32(psk.ticket_age_add);
    w.u32(psk.lifetime_seconds);
    w.u64(psk.issued_unix_ms);
    w.u8(psk.max_early_data.has_value() ? 1 : 0);
    w.u32(psk.max_early_data.value_or(0));

    const AeadDescriptor& aead = aead_descriptor(AeadKind::aes_256_gcm);
    bytes nonce = rng_->random_bytes(aead.iv_length);
    bytes aad(reinterpret_cast<const uint8_t*>(ticket_aad),
              reinterpret_cast<const uint8_t*>(ticket_aad) + sizeof(ticket_aad) - 1);
    bytes sealed = aead_seal(aead, config_.ticket_key, nonce, aad, w.data());
    bytes ticket = nonce;
    append(ticket, sealed);
    return ticket;
}

std::optional<PreSharedKey> ServerEngine::open_ticket(bytes_view ticket) const {
    const AeadDescriptor& aead = aead_descriptor(AeadKind::aes_256_gcm);
    if (ticket.size() <= aead.iv_length + aead.tag_length) return std::nullopt;
    bytes_view nonce = ticket.first(aead.iv_length);
    bytes aad(reinterpret_cast<const uint8_t*>(ticket_aad),
              reinterpret_cast<const uint8_t*>(ticket_aad) + sizeof(ticket_aad) - 1);
    auto plain = aead_open(aead, config_.ticket_key, nonce, aad, ticket.subspan(aead.iv_length));
    if (!plain.has_value()) return std::nullopt;
    try {
        ByteReader r(*plain);
        PreSharedKey psk;
        psk.kind = PskKind::resumption;
        psk.hash = r.u8() == 0 ? HashKind::sha256 : HashKind::sha384;
        psk.secret = to_secure(r.vector(0, 0xFF));
        psk.ticket_age_add = r.u32();
        psk.lifetime_seconds = r.u32();
        psk.issued_unix_ms = r.u64();
        bool has_med = r.u8() == 1;
        uint32_t med = r.u32();
        if (has_med) psk.max_early_data = med;
        r.expect_end();
        psk.identity = to_bytes(ticket);
        return psk;
    } catch (const DecodeError&) {
        return std::nullopt;
    }
}

// Cookie: HMAC-authenticated {hash(CH1), selected group} under an ephemeral
// key, so a retried handshake can be checked without trusting the client.
bytes ServerEngine::make_cookie(bytes_view ch1_hash, uint16_t selected_group) {
    ByteWriter w;
    w.u16(selected_group);
    w.vector(ch1_hash, 1, 0xFF);
    secure_bytes mac = hmac(HashKind::sha256, cookie_key_, w.data());
    w.raw(mac);
    return w.take();
}

bool ServerEngine::check_cookie(bytes_view cookie, bytes_view expected_ch1_hash,
                                uint16_t expected_group) const {
    try {
        ByteReader r(cookie);
        uint16_t group = r.u16();
        bytes ch1_hash = to_bytes(r.vector(1, 0xFF));
        bytes mac = to_bytes(r.take(32));
        r.expect_end();
        ByteWriter w;
        w.u16(group);
        w.vector(ch1_hash, 1, 0xFF);
        secure_bytes expected_mac = hmac(HashKind::sha256, cookie_key_, w.data());
        return ct_equal(mac, expected_mac) && group == expected_group &&
               ct_equal(ch1_hash, expected_ch1_hash);
    } catch (const DecodeError&) {
        return false;
    }
}

// ---------------------------------------------------------------------------

std::optional<ServerEngine::PskSelection> ServerEngine::select_psk(const ClientHello& ch,
                                                                   bytes_view framed,
                                                                   uint16_t selected_suite) {
    const Extension* psk_ext = find_extension(ch.extensions, ext::pre_shared_key);
    if (psk_ext == nullptr) return std::nullopt;
    const Extension* modes_ext = find_extension(ch.extensions, ext::psk_key_exchange_modes);
    if (modes_ext == nullptr) {
        throw ProtocolError(AlertDescription::missing_extension,
                            "pre_shared_key without psk_key_exchange_modes");
    }
    auto modes = decode_psk_modes(modes_ext->body);
    bool dhe_offered = std::find(modes.begin(), modes.end(), psk_mode::psk_dhe_ke) != modes.end();
    bool ke_offered = std::find(modes.begin(), modes.end(), psk_mode::psk_ke) != modes.end();

    OfferedPsks offered = decode_pre_shared_key_ch(psk_ext->body);
    if (offered.binders.size() != offered.identities.size()) {
        throw ProtocolError(AlertDescription::illegal_parameter,
                            "binder count does not match identity count");
    }
    bool shares_present = find_extension(ch.extensions, ext::supported_groups) != nullptr &&
                          find_extension(ch.extensions, ext::key_share) != nullptr;
    HashKind suite_hash = suite_profile(selected_suite)->hash;
    uint64_t now = clock_();

    for (std::size_t i = 0; i < offered.identities.size(); ++i) {
        const PskIdentity& identity = offered.identities[i];
        std::optional<PreSharedKey> candidate;
        for (const auto& external : config_.external_psks) {
            if (external.identity == identity.identity) {
                candidate = external;
                candidate->kind = PskKind::external;
                break;
            }
        }
        if (!candidate.has_value()) candidate = open_ticket(identity.identity);
        if (!candidate.has_value()) continue;  // unknown identifiers are disregarded

        // the identifier must be associated with the hash function defined by
        // the server-selected cipher suite
        if (candidate->hash != suite_hash) continue;

        uint8_t mode;
        if (dhe_offered && shares_present) {
            mode = psk_mode::psk_dhe_ke;
        } else if (ke_offered) {
            mode = psk_mode::psk_ke;
        } else {
            continue;
        }

        if (candidate->kind == PskKind::resumption) {
            uint64_t lifetime_ms = static_cast<uint64_t>(candidate->lifetime_seconds) * 1000;
            uint32_t claimed_age = deobfuscate_ticket_age(identity.obfuscated_ticket_age,
                                                          candidate->ticket_age_add);
            bool fresh = claimed_age <= lifetime_ms &&
                         now >= candidate->issued_unix_ms &&
                         now - candidate->issued_unix_ms <= lifetime_ms;
            if (!fresh) continue;  // expired tickets fall back to a full handshake
        }

        // the binder must verify before the key is used
        std::optional<std::pair<bytes, bytes>> prior;
        if (state_ == State::WaitCH2) {
            prior = std::make_pair(ch1_for_binder_, hrr_for_binder_);
        }
        bytes th = truncated_transcript_hash(candidate->hash, framed,
                                             offered.binders_list_length(), prior);
        if (!verify_binder(*candidate, th, offered.binders[i])) {
            throw ProtocolError(AlertDescription::decrypt_error,
                                "pre_shared_key binder does not verify");
        }
        return PskSelection{std::move(*candidate), static_cast<uint16_t>(i), mode};
    }
    return std::nullopt;
}

void ServerEngine::on_client_hello(const ClientHello& ch, bytes_view framed, Events& events) {
    // A TLS 1.3 ClientHello lists 0x0304 as its first version preference.
    const Extension* sv = find_extension(ch.extensions, ext::supported_versions);
    if (sv == nullptr) {
        throw ProtocolError(AlertDescription::protocol_version,
                            "ClientHello does not offer TLS 1.3");
    }
    auto versions = decode_supported_versions_ch(sv->body);
    if (versions.empty() || versions.front() != version::tls13) {
        throw ProtocolError(AlertDescription::protocol_version,
                            "TLS 1.3 is not the first offered version");
    }
    if (config_.check_legacy_fields) {
        if (ch.legacy_version != version::tls12) {
            throw ProtocolError(AlertDescription::illegal_parameter,
                                "legacy_version must be 0x0303");
        }
        if (!ch.legacy_session_id.empty()) {
            throw ProtocolError(AlertDescription::illegal_parameter,
                                "legacy_session_id must be empty");
        }
    }
    if (auto violation = check_extension_placement(ExtensionHost::CH, ch.extensions)) {
        throw ProtocolError(AlertDescription::illegal_parameter,
                            std::string("extension ") + ext::name(violation->extension_type) +
                                " not permitted in ClientHello");
    }
    if (config_.require_server_name &&
        find_extension(ch.extensions, ext::server_name) == nullptr) {
        throw ProtocolError(AlertDescription::missing_extension,
                            "server requires the server_name extension");
    }

    client_random_ = ch.random;
    client_session_id_ = ch.legacy_session_id;
    client_offered_post_hs_auth_ =
        find_extension(ch.extensions, ext::post_handshake_auth) != nullptr;
    if (const Extension* sa = find_extension(ch.extensions, ext::signature_algorithms)) {
        client_signature_schemes_ = decode_signature_algorithms(sa->body);
    } else {
        client_signature_schemes_.clear();
    }

    // server-preference cipher suite selection over the offered list
    uint16_t selected_suite = 0;
    for (uint16_t mine : config_.cipher_suites) {
        if (std::find(ch.cipher_suites.begin(), ch.cipher_suites.end(), mine) !=
            ch.cipher_suites.end()) {
            selected_suite = mine;
            break;
        }
    }
    if (selected_suite == 0) {
        throw ProtocolError(AlertDescription::handshake_failure,
                            "no mutually acceptable cipher suite");
    }
    if (state_ == State::WaitCH2 && selected_suite != selected_suite_) {
        throw ProtocolError(AlertDescription::illegal_parameter,
                            "cipher suite selection changed across the retry");
    }

    const Extension* sg_ext = find_extension(ch.extensions, ext::supported_groups);
    const Extension* ks_ext = find_extension(ch.extensions, ext::key_share);
    if ((sg_ext == nullptr) != (ks_ext == nullptr)) {
        throw ProtocolError(AlertDescription::missing_extension,
                            "supported_groups and key_share must appear together");
    }
    if (find_extension(ch.extensions, ext::pre_shared_key) == nullptr &&
        (sg_ext == nullptr ||
         find_extension(ch.extensions, ext::signature_algorithms) == nullptr)) {
        throw ProtocolError(AlertDescription::missing_extension,
                            "ClientHello offers neither PSK nor a certificate handshake");
    }

    std::vector<uint16_t> client_groups;
    std::vector<KeyShareEntry> client_shares;
    if (sg_ext != nullptr) {
        client_groups = decode_supported_groups(sg_ext->body);
        client_shares = decode_key_share_ch(ks_ext->body);
        // shares must mirror the group list: a subset, in the same order
        std::size_t cursor = 0;
        for (const auto& share : client_shares) {
            auto it = std::find(client_groups.begin() + cursor, client_groups.end(), share.group);
            if (it == client_groups.end()) {
                throw ProtocolError(AlertDescription::illegal_parameter,
                                    "key share out of order or for an unoffered group");
            }
            cursor = static_cast<std::size_t>(it - client_groups.begin()) + 1;
        }
    }

    // early data is never accepted here; it is skipped per the record rules
    bool early_data_offered = find_extension(ch.extensions, ext::early_data) != nullptr;

    auto psk_selection = select_psk(ch, framed, selected_suite);

    bool need_dhe = !psk_selection.has_value() ||
                    psk_selection->mode == psk_mode::psk_dhe_ke;
    if (!psk_selection.has_value() && sg_ext == nullptr) {
        throw ProtocolError(AlertDescription::handshake_failure,
                            "no usable pre-shared key and no key-exchange groups");
    }

    uint16_t selected_group = 0;
    const KeyShareEntry* client_share = nullptr;
    if (need_dhe) {
        for (uint16_t mine : config_.groups) {
            if (KeyExchange::group_supported(mine) &&
                std::find(client_groups.begin(), client_groups.end(), mine) !=
                    client_groups.end()) {
                selected_group = mine;
                break;
            }
        }
        if (selected_group == 0) {
            throw ProtocolError(AlertDescription::handshake_failure,
                                "no mutually acceptable key-exchange group");
        }
        if (state_ == State::WaitCH2 && selected_group != selected_group_) {
            throw ProtocolError(AlertDescription::illegal_parameter,
                                "group selection changed across the retry");
        }
        for (const auto& share : client_shares) {
            if (share.group == selected_group) client_share = &share;
        }
    }

    selected_suite_ = selected_suite;
    selected_group_ = selected_group;
    selected_psk_ = psk_selection ? std::optional<PreSharedKey>(psk_selection->psk)
                                  : std::nullopt;
    selected_psk_mode_ =
        psk_selection ? std::optional<uint8_t>(psk_selection->mode) : std::nullopt;
    selected_psk_index_ = psk_selection ? psk_selection->index : 0;

    if (state_ == State::WaitCH2) {
        if (!cookie_sent_.empty()) {
            const Extension* ce = find_extension(ch.extensions, ext::cookie);
            if (ce == nullptr) {
                throw ProtocolError(AlertDescription::missing_extension,
                                    "retried ClientHello dropped the cookie");
            }
            bytes ch1_hash = hash(suite_profile(selected_suite)->hash, ch1_for_binder_);
            if (!check_cookie(decode_cookie(ce->body), ch1_hash, selected_group_)) {
                throw ProtocolError(AlertDescription::illegal_parameter,
                                    "cookie does not authenticate");
            }
        }
        if (need_dhe && client_share == nullptr) {
            throw ProtocolError(AlertDescription::illegal_parameter,
                                "retried ClientHello still lacks the requested key share");
        }
        discard_early_records_ = false;
        emit_server_flight(ch, framed, events);
        return;
    }

    if (need_dhe && client_share == nullptr) {
        if (early_data_offered) {
            // encrypted records before the retried ClientHello are discarded
            discard_early_records_ = true;
            early_skip_budget_ = config_.max_early_data_skip;
            early_skipped_ = 0;
        }
        emit_hello_retry_request(ch, framed, events);
        return;
    }
    if (early_data_offered) {
        skip_early_records_ = true;  // trial-decrypt once handshake keys install
        early_skip_budget_ = config_.max_early_data_skip;
        early_skipped_ = 0;
    }
    emit_server_flight(ch, framed, events);
}

void ServerEngine::emit_hello_retry_request(const ClientHello& ch, bytes_view framed,
                                            Events& events) {
    (void)ch;
    HashKind hk = suite_profile(selected_suite_)->hash;
    ch1_for_binder_ = to_bytes(framed);

    ServerHello hrr;
    hrr.legacy_version = version::tls12;
    hrr.random = hello_retry_request_random;
    hrr.legacy_session_id_echo = client_session_id_;
    hrr.cipher_suite = selected_suite_;
    hrr.extensions.push_back({ext::supported_versions,
                              encode_supported_versions_sh(version::tls13)});
    hrr.extensions.push_back({ext::key_share, encode_key_share_hrr(selected_group_)});
    if (config_.send_cookie_with_hrr) {
        cookie_sent_ = make_cookie(hash(hk, framed), selected_group_);
        hrr.extensions.push_back({ext::cookie, encode_cookie(cookie_sent_)});
    }
    bytes framed_hrr = encode_handshake({HandshakeKind::server_hello, hrr});
    hrr_for_binder_ = framed_hrr;

    transcript_ = std::make_unique<Transcript>(hk);
    transcript_->append(framed);
    transcript_->substitute_hrr();
    transcript_->append(framed_hrr);

    send_handshake(framed_hrr, events, true);
    hrr_sent_ = true;
    state_ = State::WaitCH2;
}

void ServerEngine::emit_server_flight(const ClientHello& ch, bytes_view framed, Events& events) {
    profile_ = suite_profile(selected_suite_);
    HashKind hk = profile_->hash;
    bool psk_used = selected_psk_.has_value();
    bool dhe_used = !psk_used || *selected_psk_mode_ == psk_mode::psk_dhe_ke;

    if (!psk_used && !config_.credential.has_value()) {
        throw ProtocolError(AlertDescription::handshake_failure,
                            "no server credential for a certificate handshake");
    }
    if (!psk_used && config_.credential.has_value()) {
        if (std::find(client_signature_schemes_.begin(), client_signature_schemes_.end(),
                      config_.credential->scheme) == client_signature_schemes_.end()) {
            throw ProtocolError(AlertDescription::handshake_failure,
                                "no credential compatible with the client's signature_algorithms");
        }
    }

    std::optional<secure_bytes> ecdhe;
    ServerHello sh;
    sh.legacy_version = version::tls12;
    bytes random = rng_->random_bytes(32);
    std::copy(random.begin(), random.end(), sh.random.begin());
    sh.legacy_session_id_echo = client_session_id_;
    sh.cipher_suite = selected_suite_;
    sh.extensions.push_back({ext::supported_versions,
                             encode_supported_versions_sh(version::tls13)});
    if (dhe_used) {
        const Extension* ks_ext = find_extension(ch.extensions, ext::key_share);
        auto shares = decode_key_share_ch(ks_ext->body);
        const KeyShareEntry* client_share = nullptr;
        for (const auto& share : shares) {
            if (share.group == selected_group_) client_share = &share;
        }
        if (client_share == nullptr) {
            throw ProtocolError(AlertDescription::internal_error,
                                "flight emission without a usable client share");
        }
        key_exchange_ = KeyExchange::generate(selected_group_, *rng_);
        try {
            ecdhe = key_exchange_->agree(client_share->key_exchange);
        } catch (const std::exception& e) {
            throw ProtocolError(AlertDescription::handshake_failure, e.what());
        }
        sh.extensions.push_back(
            {ext::key_share,
             encode_key_share_sh({selected_group_, key_exchange_->public_share()})});
        negotiation_.group = selected_group_;
    }
    if (psk_used) {
        sh.extensions.push_back(
            {ext::pre_shared_key, encode_pre_shared_key_sh(selected_psk_index_)});
        negotiation_.psk_mode = *selected_psk_mode_;
        negotiation_.resumed = selected_psk_->kind == PskKind::resumption;
    }
    negotiation_.cipher_suite = selected_suite_;

    if (!transcript_) {
        transcript_ = std::make_unique<Transcript>(hk);
        transcript_->append(framed);
    } else if (state_ == State::WaitCH2) {
        transcript_->append(framed);
    }
    note_checkpoint("after_client_hello", transcript_->hash());

    bytes framed_sh = encode_handshake({HandshakeKind::server_hello, sh});
    transcript_->append(framed_sh);
    send_handshake(framed_sh, events, true);
    bytes th_sh = transcript_->hash();
    note_checkpoint("after_server_hello", th_sh);

    schedule_ = std::make_unique<KeySchedule>(hk);
    schedule_->derive_early(psk_used ? std::optional<bytes_view>(selected_psk_->secret)
                                     : std::nullopt);
    note_secret("early_secret", schedule_->current_secret());
    schedule_->into_handshake(ecdhe ? std::optional<bytes_view>(*ecdhe) : std::nullopt);
    note_secret("handshake_secret", schedule_->current_secret());
    auto [c_hs, s_hs] = schedule_->handshake_traffic_secrets(th_sh);
    client_hs_secret_ = c_hs;
    install_write(s_hs);
    install_read(c_hs);

    // EncryptedExtensions: responses not bound to individual certificates
    EncryptedExtensions ee;
    if (find_extension(ch.extensions, ext::server_name) != nullptr) {
        ee.extensions.push_back({ext::server_name, {}});
    }
    bytes framed_ee = encode_handshake({HandshakeKind::encrypted_extensions, ee});
    transcript_->append(framed_ee);
    send_handshake(framed_ee, events);

    bool request_auth = config_.client_auth != ClientAuthPolicy::off && !psk_used;
    if (request_auth) {
        CertificateRequestMsg cr;
        cr.certificate_request_context = {};
        cr.extensions.push_back({ext::signature_algorithms,
                                 encode_signature_algorithms(config_.signature_schemes)});
        bytes framed_cr = encode_handshake({HandshakeKind::certificate_request, cr});
        transcript_->append(framed_cr);
        send_handshake(framed_cr, events);
    }

    if (!psk_used) {
        CertificateMsg ct;
        ct.certificate_request_context = {};
        ct.certificate_list.push_back(
            {encode_raw_credential(config_.credential->scheme, config_.credential->public_key),
             {}});
        bytes framed_ct = encode_handshake({HandshakeKind::certificate, ct});
        transcript_->append(framed_ct);
        send_handshake(framed_ct, events);

        CertificateVerifyMsg cv;
        cv.algorithm = config_.credential->scheme;
        cv.signature =
            sign_message(*config_.credential, certificate_verify_input(true, transcript_->hash()));
        bytes framed_cv = encode_handshake({HandshakeKind::certificate_verify, cv});
        transcript_->append(framed_cv);
        send_handshake(framed_cv, events);
    }

    secure_bytes fk = finished_key(write_state_->secret());
    FinishedMsg fin{compute_verify_data(hk, fk, transcript_->hash())};
    bytes framed_fin = encode_handshake({HandshakeKind::finished, fin});
    transcript_->append(framed_fin);
    send_handshake(framed_fin, events);

    th_server_finished_ = transcript_->hash();
    note_checkpoint("after_server_finished", th_server_finished_);
    schedule_->into_master();
    note_secret("master_secret", schedule_->current_secret());
    auto [c_ap, s_ap] = schedule_->application_traffic_secrets(th_server_finished_);
    client_app_secret_ = c_ap;
    server_app_secret_ = s_ap;
    install_write(s_ap);  // the read side stays on handshake keys

    state_ = request_auth ? State::WaitClientCert : State::WaitClientFin;
}

void ServerEngine::on_client_certificate(const CertificateMsg& ct, bytes_view framed,
                                         Events& events) {
    (void)events;
    transcript_->append(framed);
    if (!ct.certificate_request_context.empty()) {
        throw ProtocolError(AlertDescription::illegal_parameter,
                            "handshake client Certificate context must be empty");
    }
    if (ct.certificate_list.empty()) {
        // the client declined; continuing or aborting is server policy
        if (config_.client_auth == ClientAuthPolicy::require) {
            throw ProtocolError(AlertDescription::certificate_required,
                                "client authentication is required");
        }
        client_credential_.reset();
        state_ = State::WaitClientFin;
        return;
    }
    for (const auto& entry : ct.certificate_list) {
        RawCredential cred = decode_raw_credential(entry.cert_data);
        if (sigscheme::uses_md5(cred.scheme)) {
            throw ProtocolError(AlertDescription::bad_certificate,
                                "certificate relies on MD5");
        }
        if (config_.reject_sha1_certificates && sigscheme::uses_sha1(cred.scheme)) {
            throw ProtocolError(AlertDescription::bad_certificate,
                                "certificate relies on SHA-1");
        }
    }
    if (config_.client_verifier) {
        config_.client_verifier(ct);
    } else if (config_.pinned_client_key.has_value()) {
        make_pinned_verifier(*config_.pinned_client_key)(ct);
    } else if (ct.certificate_list.size() != 1) {
        throw ProtocolError(AlertDescription::bad_certificate,
                            "raw-key chain must contain exactly one entry");
    }
    client_credential_ = decode_raw_credential(ct.certificate_list.front().cert_data);
    state_ = State::WaitClientCV;
}

void ServerEngine::on_client_certificate_verify(const CertificateVerifyMsg& cv,
                                                bytes_view framed, Events& events) {
    (void)events;
    if (std::find(config_.signature_schemes.begin(), config_.signature_schemes.end(),
                  cv.algorithm) == config_.signature_schemes.end()) {
        throw ProtocolError(AlertDescription::illegal_parameter,
                            "signature scheme was not listed in the CertificateRequest");
    }
    if (cv.algorithm != client_credential_->scheme) {
        throw ProtocolError(AlertDescription::bad_certificate,
                            "CertificateVerify algorithm does not match the certificate");
    }
    bytes signed_content = certificate_verify_input(false, transcript_->hash());
    if (!verify_signature(cv.algorithm, client_credential_->public_key, signed_content,
                          cv.signature)) {
        throw ProtocolError(AlertDescription::bad_certificate,
                            "client CertificateVerify signature does not verify");
    }
    transcript_->append(framed);
    negotiation_.client_authenticated = true;
    state_ = State::WaitClientFin;
}

void ServerEngine::on_client_finished(const FinishedMsg& fin, bytes_view framed,
                                      Events& events) {
    if (post_hs_.stage == PostHsAuth::Stage::wait_fin) {
        secure_bytes fk = finished_key(read_state_->secret());
        bytes expected = compute_verify_data(profile_->hash, fk, post_hs_.transcript->hash());
        if (!ct_equal(expected, fin.verify_data)) {
            throw ProtocolError(AlertDescription::decrypt_error,
                                "post-handshake Finished verify_data does not match");
        }
        if (post_hs_.peer_credential.has_value()) {
            client_credential_ = post_hs_.peer_credential;
            negotiation_.client_authenticated = true;
        }
        post_hs_ = {};
        return;
    }

    secure_bytes fk = finished_key(client_hs_secret_);
    bytes expected = compute_verify_data(profile_->hash, fk, transcript_->hash());
    if (!ct_equal(expected, fin.verify_data)) {
        throw ProtocolError(AlertDescription::decrypt_error,
                            "client Finished verify_data does not match");
    }
    transcript_->append(framed);
    bytes th_cfin = transcript_->hash();
    note_checkpoint("after_client_finished", th_cfin);
    auto [exporter, resumption] =
        schedule_->exporter_and_resumption_masters(th_server_finished_, th_cfin);
    note_secret("EXPORTER_SECRET", exporter);
    if (keylog_) keylog_("EXPORTER_SECRET", client_random_, exporter);
    note_secret("resumption_master_secret", resumption);
    resumption_master_ = std::move(resumption);

    install_read(client_app_secret_);
    skip_early_records_ = false;
    state_ = State::Connected;
    complete_handshake(events);
    issue_tickets(events);
}

void ServerEngine::issue_tickets(Events& events) {
    for (uint32_t i = 0; i < config_.ticket_count; ++i) {
        ByteWriter nw;
        nw.u16(ticket_counter_++);
        bytes nonce = nw.take();

        PreSharedKey psk;
        psk.secret = derive_resumption_psk(profile_->hash, resumption_master_, nonce);
        psk.kind = PskKind::resumption;
        psk.hash = profile_->hash;
        bytes age_add = rng_->random_bytes(4);
        psk.ticket_age_add = static_cast<uint32_t>(age_add[0]) << 24 |
                             static_cast<uint32_t>(age_add[1]) << 16 |
                             static_cast<uint32_t>(age_add[2]) << 8 | age_add[3];
        psk.lifetime_seconds = config_.ticket_lifetime;
        psk.issued_unix_ms = clock_();
        psk.max_early_data = config_.ticket_max_early_data;
        psk.identity = seal_ticket(psk);

        NewSessionTicketMsg nst;
        nst.ticket_lifetime = psk.lifetime_seconds;
        nst.ticket_age_add = psk.ticket_age_add;
        nst.ticket_nonce = nonce;
        nst.ticket = psk.identity;
        if (config_.ticket_max_early_data.has_value()) {
            nst.extensions.push_back(
                {ext::early_data, encode_early_data_nst(*config_.ticket_max_early_data)});
        }
        send_handshake(encode_handshake({HandshakeKind::new_session_ticket, nst}), events);
        note_secret("resumption_psk", psk.secret);
        events.push_back(TicketIssued{std::move(psk)});
    }
}

void ServerEngine::on_post_hs_certificate(const CertificateMsg& ct, bytes_view framed,
                                          Events& events) {
    (void)events;
    post_hs_.transcript->append(framed);
    if (!ct_equal(ct.certificate_request_context, post_hs_.context)) {
        throw ProtocolError(AlertDescription::illegal_parameter,
                            "Certificate context does not echo the request");
    }
    if (ct.certificate_list.empty()) {
        if (config_.client_auth == ClientAuthPolicy::require) {
            throw ProtocolError(AlertDescription::certificate_required,
                                "client authentication is required");
        }
        post_hs_.peer_credential.reset();
        post_hs_.stage = PostHsAuth::Stage::wait_fin;
        return;
    }
    for (const auto& entry : ct.certificate_list) {
        RawCredential cred = decode_raw_credential(entry.cert_data);
        if (sigscheme::uses_md5(cred.scheme)) {
            throw ProtocolError(AlertDescription::bad_certificate,
                                "certificate relies on MD5");
        }
        if (config_.reject_sha1_certificates && sigscheme::uses_sha1(cred.scheme)) {
            throw ProtocolError(AlertDescription::bad_certificate,
                                "certificate relies on SHA-1");
        }
    }
    if (config_.client_verifier) {
        config_.client_verifier(ct);
    } else if (config_.pinned_client_key.has_value()) {
        make_pinned_verifier(*config_.pinned_client_key)(ct);
    } else if (ct.certificate_list.size() != 1) {
        throw ProtocolError(AlertDescription::bad_certificate,
                            "raw-key chain must contain exactly one entry");
    }
    post_hs_.peer_credential = decode_raw_credential(ct.certificate_list.front().cert_data);
    post_hs_.stage = PostHsAuth::Stage::wait_cv;
}

void ServerEngine::on_post_hs_certificate_verify(const CertificateVerifyMsg& cv,
                                                 bytes_view framed, Events& events) {
    (void)events;
    if (std::find(config_.signature_schemes.begin(), config_.signature_schemes.end(),
                  cv.algorithm) == config_.signature_schemes.end()) {
        throw ProtocolError(AlertDescription::illegal_parameter,
                            "signature scheme was not listed in the CertificateRequest");
    }
    if (cv.algorithm != post_hs_.peer_credential->scheme) {
        throw ProtocolError(AlertDescription::bad_certificate,
                            "CertificateVerify algorithm does not match the certificate");
    }
    bytes signed_content = certificate_verify_input(false, post_hs_.transcript->hash());
    if (!verify_signature(cv.algorithm, post_hs_.peer_credential->public_key, signed_content,
                          cv.signature)) {
        throw ProtocolError(AlertDescription::bad_certificate,
                            "client CertificateVerify signature does not verify");
    }
    post_hs_.transcript->append(framed);
    post_hs_.stage = PostHsAuth::Stage::wait_fin;
}

Events ServerEngine::request_client_auth() {
    if (!connected_ || aborted_) throw std::logic_error("post-handshake auth: channel not open");
    if (!client_offered_post_hs_auth_) {
        throw std::logic_error("client did not offer post_handshake_auth");
    }
    if (post_hs_.stage != PostHsAuth::Stage::none) {
        throw std::logic_error("a post-handshake authentication request is already pending");
    }
    Events events;
    CertificateRequestMsg cr;
    cr.certificate_request_context = rng_->random_bytes(8);
    cr.extensions.push_back(
        {ext::signature_algorithms, encode_signature_algorithms(config_.signature_schemes)});
    bytes framed = encode_handshake({HandshakeKind::certificate_request, cr});
    post_hs_.stage = PostHsAuth::Stage::wait_cert;
    post_hs_.context = cr.certificate_request_context;
    post_hs_.transcript = std::make_unique<Transcript>(*transcript_);
    post_hs_.transcript->append(framed);
    send_handshake(framed, events);
    return events;
}

}  // namespace tls13
