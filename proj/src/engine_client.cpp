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

bytes encode_server_name_body(bytes_view host) {
    ByteWriter w;
    w.open_length(0xFFFF);
    w.u8(0x00);  // host_name
    w.vector(host, 1, 0xFFFF);
    w.close_length();
    return w.take();
}

}  // namespace

ClientEngine::ClientEngine(ClientConfig config)
    : EngineBase(Sender::client, config), config_(std::move(config)) {
    if (config_.cipher_suites.empty()) throw std::invalid_argument("no cipher suites configured");
    for (uint16_t s : config_.cipher_suites) {
        if (!suite_profile(s).has_value()) {
            throw std::invalid_argument(std::string("unsupported cipher suite ") +
                                        suite::name(s));
        }
    }
    for (const auto& psk : config_.psks) {
        bool compatible = false;
        for (uint16_t s : config_.cipher_suites) {
            if (suite_profile(s)->hash == psk.hash) compatible = true;
        }
        // at least one offered suite must define the identifier's hash
        if (!compatible) {
            throw std::invalid_argument("no offered cipher suite matches a PSK's hash");
        }
    }
    if (config_.share_groups.empty() && !config_.groups.empty()) {
        config_.share_groups = {config_.groups.front()};
    }
    if (config_.groups.empty() && config_.psks.empty()) {
        throw std::invalid_argument("config offers neither groups nor pre-shared keys");
    }
}

ClientHello ClientEngine::build_client_hello(std::optional<uint16_t> single_share_group,
                                             const std::optional<bytes>& cookie) {
    ClientHello ch;
    ch.legacy_version = version::tls12;
    ch.random = client_random_;
    ch.legacy_session_id = {};
    ch.cipher_suites = config_.cipher_suites;
    ch.legacy_compression_methods = {0x00};

    bool offer_dhe = !config_.groups.empty();
    bool offer_psk = !offered_psks_.empty();

    ch.extensions.push_back({ext::supported_versions,
                             encode_supported_versions_ch({version::tls13})});
    if (config_.server_name.has_value()) {
        ch.extensions.push_back({ext::server_name, encode_server_name_body(*config_.server_name)});
    }
    if (offer_dhe) {
        ch.extensions.push_back({ext::supported_groups, encode_supported_groups(config_.groups)});
        ch.extensions.push_back(
            {ext::signature_algorithms, encode_signature_algorithms(config_.signature_schemes)});
        std::vector<KeyShareEntry> shares;
        if (single_share_group.has_value()) {
            key_exchanges_.clear();
            key_exchanges_.push_back(KeyExchange::generate(*single_share_group, *rng_));
        } else if (config_.offer_key_shares && key_exchanges_.empty()) {
            for (uint16_t g : config_.share_groups) {
                if (std::find(config_.groups.begin(), config_.groups.end(), g) ==
                    config_.groups.end()) {
                    throw std::invalid_argument("share group not in the offered group list");
                }
                key_exchanges_.push_back(KeyExchange::generate(g, *rng_));
            }
        }
        // shares are listed in the same order as the groups they belong to
        for (uint16_t g : config_.groups) {
            for (const auto& kx : key_exchanges_) {
                if (kx->group() == g) shares.push_back({g, kx->public_share()});
            }
        }
        ch.extensions.push_back({ext::key_share, encode_key_share_ch(shares)});
    }
    if (config_.offer_early_data && !hrr_seen_) {
        ch.extensions.push_back({ext::early_data, {}});
    }
    if (config_.offer_post_handshake_auth) {
        ch.extensions.push_back({ext::post_handshake_auth, {}});
    }
    if (cookie.has_value()) {
        ch.extensions.push_back({ext::cookie, encode_cookie(*cookie)});
    }
    if (offer_psk) {
        ch.extensions.push_back({ext::psk_key_exchange_modes, encode_psk_modes(config_.psk_modes)});
        OfferedPsks offered;
        uint64_t now = clock_();
        for (const auto& psk : offered_psks_) {
            uint32_t obfuscated = 0;
            if (psk.kind == PskKind::resumption) {
                auto age_ms = static_cast<uint32_t>(now - psk.issued_unix_ms);
                obfuscated = obfuscate_ticket_age(age_ms, psk.ticket_age_add);
            }
            offered.identities.push_back({psk.identity, obfuscated});
            offered.binders.push_back(bytes(hash_alg(psk.hash).output_length, 0));  // placeholder
        }
        ch.extensions.push_back({ext::pre_shared_key, encode_pre_shared_key_ch(offered)});
    }
    return ch;
}

bytes ClientEngine::frame_client_hello(ClientHello ch, bool after_hrr) {
    bytes framed = encode_handshake({HandshakeKind::client_hello, ch});
    const Extension* psk_ext = find_extension(ch.extensions, ext::pre_shared_key);
    if (psk_ext == nullptr) return framed;

    // Binders are computed last, over the transcript with binders truncated.
    OfferedPsks offered = decode_pre_shared_key_ch(psk_ext->body);
    std::size_t binders_len = offered.binders_list_length();
    std::optional<std::pair<bytes, bytes>> prior;
    if (after_hrr) prior = std::make_pair(first_client_hello_, hrr_frame_);
    offered.binders.clear();
    for (const auto& psk : offered_psks_) {
        bytes th = truncated_transcript_hash(psk.hash, framed, binders_len, prior);
        offered.binders.push_back(compute_binder(psk, th));
    }
    ch.extensions.back() = {ext::pre_shared_key, encode_pre_shared_key_ch(offered)};
    return encode_handshake({HandshakeKind::client_hello, ch});
}

Events ClientEngine::start() {
    if (state_ != State::Begin) throw std::logic_error("client already started");
    Events events;
    rng_->fill(client_random_);
    offered_psks_ = config_.psks;
    ClientHello ch = build_client_hello(std::nullopt, std::nullopt);
    for (const auto& e : ch.extensions) offered_extension_types_.push_back(e.type);
    first_client_hello_ = frame_client_hello(std::move(ch), false);

    if (config_.offer_early_data && !offered_psks_.empty()) {
        // Derived but never installed: this engine does not send early data.
        const auto& psk = offered_psks_.front();
        KeySchedule early(psk.hash);
        early.derive_early(bytes_view(psk.secret));
        bytes th_ch = hash(psk.hash, first_client_hello_);
        note_secret("client_early_traffic_secret",
                    early.client_early_traffic_secret(th_ch).secret);
    }

    // The record carrying an initial ClientHello may use version 0x0301.
    events.push_back(
        EmitRecord{encode_record(ContentType::handshake, version::tls10, first_client_hello_)});
    state_ = State::WaitSH;
    return events;
}

bool ClientEngine::kind_allowed(HandshakeKind kind) const {
    switch (state_) {
        case State::WaitSH:
            return kind == HandshakeKind::server_hello;
        case State::WaitEE:
            return kind == HandshakeKind::encrypted_extensions;
        case State::WaitCertOrCR:
            return kind == HandshakeKind::certificate ||
                   (kind == HandshakeKind::certificate_request && !cr_seen_);
        case State::WaitCV:
            return kind == HandshakeKind::certificate_verify;
        case State::WaitFin:
            return kind == HandshakeKind::finished;
        case State::Connected:
            return kind == HandshakeKind::new_session_ticket ||
                   kind == HandshakeKind::key_update ||
                   kind == HandshakeKind::certificate_request;
        case State::Begin:
        case State::Closed:
            return false;
    }
    return false;
}

void ClientEngine::handle_handshake(HandshakeKind kind, bytes_view framed, Events& events) {
    auto decoded = decode_handshake(framed, finished_length());
    switch (kind) {
        case HandshakeKind::server_hello: {
            const auto& sh = std::get<ServerHello>(decoded.msg.body);
            if (is_hello_retry_request(sh)) {
                on_hello_retry_request(sh, framed, events);
            } else {
                on_server_hello(sh, framed, events);
            }
            return;
        }
        case HandshakeKind::encrypted_extensions:
            transcript_->append(framed);
            on_encrypted_extensions(std::get<EncryptedExtensions>(decoded.msg.body), events);
            return;
        case HandshakeKind::certificate_request:
            if (state_ == State::Connected) {
                on_post_handshake_cert_request(std::get<CertificateRequestMsg>(decoded.msg.body),
                                               framed, events);
            } else {
                on_certificate_request(std::get<CertificateRequestMsg>(decoded.msg.body), framed,
                                       events);
            }
            return;
        case HandshakeKind::certificate:
            on_certificate(std::get<CertificateMsg>(decoded.msg.body), framed, events);
            return;
        case HandshakeKind::certificate_verify:
            on_certificate_verify(std::get<CertificateVerifyMsg>(decoded.msg.body), framed,
                                  events);
            return;
        case HandshakeKind::finished:
            on_finished(std::get<FinishedMsg>(decoded.msg.body), framed, events);
            return;
        case HandshakeKind::new_session_ticket:
            on_new_session_ticket(std::get<NewSessionTicketMsg>(decoded.msg.body), events);
            return;
        case HandshakeKind::key_update:
            handle_key_update(std::get<KeyUpdateMsg>(decoded.msg.body), events);
            return;
        default:
            throw ProtocolError(AlertDescription::unexpected_message,
                                "message kind not consumable by a client");
    }
}

void ClientEngine::check_unsolicited(const std::vector<Extension>& extensions,
                                     ExtensionHost host) {
    if (auto violation = check_extension_placement(host, extensions)) {
        throw ProtocolError(AlertDescription::illegal_parameter,
                            std::string("extension ") + ext::name(violation->extension_type) +
                                " not permitted in this message");
    }
    for (const auto& e : extensions) {
        // cookie is the one server-initiated extension (HelloRetryRequest)
        if (host == ExtensionHost::HRR && e.type == ext::cookie) continue;
        bool offered = std::find(offered_extension_types_.begin(),
                                 offered_extension_types_.end(),
                                 e.type) != offered_extension_types_.end();
        if (!offered) {
            throw ProtocolError(AlertDescription::unsupported_extension,
                                std::string("unsolicited extension ") + ext::name(e.type));
        }
    }
}

void ClientEngine::on_server_hello(const ServerHello& sh, bytes_view framed, Events& events) {
    // supported_versions is examined first (see the module's design notes)
    const Extension* sv = find_extension(sh.extensions, ext::supported_versions);
    if (sv == nullptr) {
        throw ProtocolError(AlertDescription::protocol_version,
                            "server did not negotiate TLS 1.3");
    }
    uint16_t selected_version = decode_supported_versions_sh(sv->body);
    if (selected_version != version::tls13) {
        throw ProtocolError(AlertDescription::illegal_parameter,
                            "selected version was not offered or is below 1.3");
    }
    if (hrr_seen_ && selected_version != hrr_selected_version_) {
        throw ProtocolError(AlertDescription::illegal_parameter,
                            "selected version changed after HelloRetryRequest");
    }
    if (std::find(config_.cipher_suites.begin(), config_.cipher_suites.end(), sh.cipher_suite) ==
        config_.cipher_suites.end()) {
        throw ProtocolError(AlertDescription::illegal_parameter,
                            "selected cipher suite was not offered");
    }
    if (hrr_seen_ && sh.cipher_suite != hrr_suite_) {
        throw ProtocolError(AlertDescription::illegal_parameter,
                            "cipher suite changed after HelloRetryRequest");
    }
    if (!sh.legacy_session_id_echo.empty()) {
        throw ProtocolError(AlertDescription::illegal_parameter,
                            "legacy_session_id_echo does not match");
    }
    check_unsolicited(sh.extensions, ExtensionHost::SH);

    profile_ = suite_profile(sh.cipher_suite);
    if (!profile_.has_value()) {
        throw ProtocolError(AlertDescription::illegal_parameter,
                            "selected cipher suite is not implemented");
    }
    HashKind hk = profile_->hash;

    // pre-shared key acceptance checks
    std::optional<PreSharedKey> used_psk;
    const Extension* psk_ext = find_extension(sh.extensions, ext::pre_shared_key);
    const Extension* ks_ext = find_extension(sh.extensions, ext::key_share);
    if (psk_ext != nullptr) {
        uint16_t idx = decode_pre_shared_key_sh(psk_ext->body);
        if (idx >= offered_psks_.size()) {
            throw ProtocolError(AlertDescription::illegal_parameter,
                                "selected PSK identity was not offered");
        }
        used_psk = offered_psks_[idx];
        if (used_psk->hash != hk) {
            throw ProtocolError(AlertDescription::illegal_parameter,
                                "selected PSK does not match the suite's hash");
        }
        bool dhe_offered = std::find(config_.psk_modes.begin(), config_.psk_modes.end(),
                                     psk_mode::psk_dhe_ke) != config_.psk_modes.end();
        bool ke_offered = std::find(config_.psk_modes.begin(), config_.psk_modes.end(),
                                    psk_mode::psk_ke) != config_.psk_modes.end();
        if (ks_ext != nullptr && !dhe_offered) {
            throw ProtocolError(AlertDescription::illegal_parameter,
                                "server chose PSK with (EC)DHE which was not offered");
        }
        if (ks_ext == nullptr && !ke_offered) {
            throw ProtocolError(AlertDescription::illegal_parameter,
                                "key_share absent but psk_dhe_ke was the only offered mode");
        }
    }

    // (EC)DHE share
    std::optional<secure_bytes> ecdhe;
    if (ks_ext != nullptr) {
        KeyShareEntry share = decode_key_share_sh(ks_ext->body);
        if (std::find(config_.groups.begin(), config_.groups.end(), share.group) ==
            config_.groups.end()) {
            throw ProtocolError(AlertDescription::illegal_parameter,
                                "server's key share group was not offered");
        }
        if (hrr_seen_ && hrr_group_ != 0 && share.group != hrr_group_) {
            throw ProtocolError(AlertDescription::illegal_parameter,
                                "server's key share ignores the HelloRetryRequest group");
        }
        const KeyExchange* own = nullptr;
        for (const auto& kx : key_exchanges_) {
            if (kx->group() == share.group) own = kx.get();
        }
        if (own == nullptr) {
            throw ProtocolError(AlertDescription::illegal_parameter,
                                "no key share was offered for the server-selected group");
        }
        try {
            ecdhe = own->agree(share.key_exchange);
        } catch (const std::exception& e) {
            throw ProtocolError(AlertDescription::handshake_failure, e.what());
        }
        negotiation_.group = share.group;
    } else if (!used_psk.has_value()) {
        throw ProtocolError(AlertDescription::illegal_parameter,
                            "server selected neither a key share nor a PSK");
    }

    negotiation_.cipher_suite = sh.cipher_suite;
    if (used_psk.has_value()) {
        negotiation_.psk_mode = ks_ext ? psk_mode::psk_dhe_ke : psk_mode::psk_ke;
        negotiation_.resumed = used_psk->kind == PskKind::resumption;
    }

    if (!transcript_) {
        transcript_ = std::make_unique<Transcript>(hk);
        transcript_->append(first_client_hello_);
    }
    note_checkpoint("after_client_hello", transcript_->hash());
    transcript_->append(framed);
    bytes th_sh = transcript_->hash();
    note_checkpoint("after_server_hello", th_sh);

    schedule_ = std::make_unique<KeySchedule>(hk);
    schedule_->derive_early(used_psk ? std::optional<bytes_view>(used_psk->secret)
                                     : std::nullopt);
    note_secret("early_secret", schedule_->current_secret());
    schedule_->into_handshake(ecdhe ? std::optional<bytes_view>(*ecdhe) : std::nullopt);
    note_secret("handshake_secret", schedule_->current_secret());
    auto [c_hs, s_hs] = schedule_->handshake_traffic_secrets(th_sh);
    install_write(c_hs);
    install_read(s_hs);
    state_ = State::WaitEE;
}

void ClientEngine::on_hello_retry_request(const ServerHello& hrr, bytes_view framed,
                                          Events& events) {
    if (hrr_seen_) {
        throw ProtocolError(AlertDescription::unexpected_message,
                            "second HelloRetryRequest in one connection");
    }
    const Extension* sv = find_extension(hrr.extensions, ext::supported_versions);
    if (sv == nullptr) {
        throw ProtocolError(AlertDescription::protocol_version,
                            "HelloRetryRequest did not negotiate TLS 1.3");
    }
    uint16_t selected_version = decode_supported_versions_sh(sv->body);
    if (selected_version != version::tls13) {
        throw ProtocolError(AlertDescription::illegal_parameter,
                            "selected version was not offered or is below 1.3");
    }
    if (std::find(config_.cipher_suites.begin(), config_.cipher_suites.end(),
                  hrr.cipher_suite) == config_.cipher_suites.end()) {
        throw ProtocolError(AlertDescription::illegal_parameter,
                            "selected cipher suite was not offered");
    }
    if (!hrr.legacy_session_id_echo.empty()) {
        throw ProtocolError(AlertDescription::illegal_parameter,
                            "legacy_session_id_echo does not match");
    }
    auto hrr_profile = suite_profile(hrr.cipher_suite);
    if (!hrr_profile.has_value()) {
        throw ProtocolError(AlertDescription::illegal_parameter,
                            "selected cipher suite is not implemented");
    }
    check_unsolicited(hrr.extensions, ExtensionHost::HRR);

    std::optional<bytes> cookie;
    if (const Extension* ce = find_extension(hrr.extensions, ext::cookie)) {
        cookie = decode_cookie(ce->body);
    }

    const Extension* ks_ext = find_extension(hrr.extensions, ext::key_share);
    std::optional<uint16_t> selected_group;
    if (ks_ext != nullptr) {
        uint16_t g = decode_key_share_hrr(ks_ext->body);
        if (std::find(config_.groups.begin(), config_.groups.end(), g) == config_.groups.end()) {
            throw ProtocolError(AlertDescription::illegal_parameter,
                                "HelloRetryRequest group was not offered");
        }
        for (const auto& kx : key_exchanges_) {
            if (kx->group() == g) {
                throw ProtocolError(AlertDescription::illegal_parameter,
                                    "a key share for that group was already offered");
            }
        }
        selected_group = g;
    } else if (!cookie.has_value()) {
        // a retry that changes nothing is not acceptable
        throw ProtocolError(AlertDescription::illegal_parameter,
                            "HelloRetryRequest carries neither key_share nor cookie");
    }

    hrr_seen_ = true;
    hrr_suite_ = hrr.cipher_suite;
    hrr_selected_version_ = selected_version;
    hrr_group_ = selected_group.value_or(0);
    hrr_frame_ = to_bytes(framed);

    // The retry transcript replaces CH1 by its synthetic digest message.
    transcript_ = std::make_unique<Transcript>(hrr_profile->hash);
    transcript_->append(first_client_hello_);
    transcript_->substitute_hrr();
    transcript_->append(framed);

    // Incompatible PSK identifiers are dropped; ages and binders recompute.
    std::vector<PreSharedKey> keep;
    for (const auto& psk : offered_psks_) {
        if (psk.hash == hrr_profile->hash) keep.push_back(psk);
    }
    offered_psks_ = std::move(keep);

    ClientHello ch2 = build_client_hello(selected_group, cookie);
    offered_extension_types_.clear();
    for (const auto& e : ch2.extensions) offered_extension_types_.push_back(e.type);
    bytes framed_ch2 = frame_client_hello(std::move(ch2), true);
    transcript_->append(framed_ch2);
    send_handshake(framed_ch2, events, true);
    state_ = State::WaitSH;
}

void ClientEngine::on_encrypted_extensions(const EncryptedExtensions& ee, Events& events) {
    (void)events;
    check_unsolicited(ee.extensions, ExtensionHost::EE);
    if (find_extension(ee.extensions, ext::early_data) != nullptr) {
        // this engine never sends early data, so acceptance cannot proceed
        throw ProtocolError(AlertDescription::unexpected_message,
                            "server accepted early data that was never sent");
    }
    state_ = negotiation_.psk_mode.has_value() ? State::WaitFin : State::WaitCertOrCR;
}

void ClientEngine::on_certificate_request(const CertificateRequestMsg& cr, bytes_view framed,
                                          Events& events) {
    (void)events;
    transcript_->append(framed);
    if (!cr.certificate_request_context.empty()) {
        throw ProtocolError(AlertDescription::illegal_parameter,
                            "handshake CertificateRequest context must be empty");
    }
    if (auto violation = check_extension_placement(ExtensionHost::CR, cr.extensions)) {
        throw ProtocolError(AlertDescription::illegal_parameter,
                            std::string("extension ") + ext::name(violation->extension_type) +
                                " not permitted in CertificateRequest");
    }
    if (find_extension(cr.extensions, ext::signature_algorithms) == nullptr) {
        throw ProtocolError(AlertDescription::missing_extension,
                            "CertificateRequest lacks signature_algorithms");
    }
    handshake_cert_request_ = cr;
    cr_seen_ = true;
}

void ClientEngine::verify_peer_chain(const CertificateMsg& ct) const {
    if (ct.certificate_list.empty()) {
        throw ProtocolError(AlertDescription::decode_error, "Certificate message is empty");
    }
    for (const auto& entry : ct.certificate_list) {
        if (auto violation = check_extension_placement(ExtensionHost::CT, entry.extensions)) {
            throw ProtocolError(AlertDescription::illegal_parameter,
                                std::string("extension ") +
                                    ext::name(violation->extension_type) +
                                    " not permitted in Certificate");
        }
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
    if (config_.verifier) {
        config_.verifier(ct);
    } else if (config_.pinned_server_key.has_value()) {
        make_pinned_verifier(*config_.pinned_server_key)(ct);
    } else if (ct.certificate_list.size() != 1) {
        throw ProtocolError(AlertDescription::bad_certificate,
                            "raw-key chain must contain exactly one entry");
    }
}

void ClientEngine::on_certificate(const CertificateMsg& ct, bytes_view framed, Events& events) {
    (void)events;
    transcript_->append(framed);
    if (!ct.certificate_request_context.empty()) {
        throw ProtocolError(AlertDescription::illegal_parameter,
                            "server Certificate context must be empty");
    }
    verify_peer_chain(ct);
    server_credential_ = decode_raw_credential(ct.certificate_list.front().cert_data);
    state_ = State::WaitCV;
}

void ClientEngine::on_certificate_verify(const CertificateVerifyMsg& cv, bytes_view framed,
                                         Events& events) {
    (void)events;
    if (std::find(config_.signature_schemes.begin(), config_.signature_schemes.end(),
                  cv.algorithm) == config_.signature_schemes.end()) {
        throw ProtocolError(AlertDescription::illegal_parameter,
                            "CertificateVerify algorithm was not offered");
    }
    if (cv.algorithm != server_credential_->scheme) {
        throw ProtocolError(AlertDescription::bad_certificate,
                            "CertificateVerify algorithm does not match the certificate");
    }
    bytes signed_content = certificate_verify_input(true, transcript_->hash());
    if (!verify_signature(cv.algorithm, server_credential_->public_key, signed_content,
                          cv.signature)) {
        throw ProtocolError(AlertDescription::bad_certificate,
                            "CertificateVerify signature does not verify");
    }
    transcript_->append(framed);
    state_ = State::WaitFin;
}

void ClientEngine::send_client_flight(Events& events) {
    if (cr_seen_) {
        bool authenticate = config_.credential.has_value();
        uint16_t scheme = authenticate ? config_.credential->scheme : 0;
        if (authenticate) {
            auto schemes = decode_signature_algorithms(
                find_extension(handshake_cert_request_->extensions, ext::signature_algorithms)
                    ->body);
            if (std::find(schemes.begin(), schemes.end(), scheme) == schemes.end()) {
                authenticate = false;  // decline: no mutually acceptable algorithm
            }
        }
        CertificateMsg ct;
        ct.certificate_request_context = {};
        if (authenticate) {
            ct.certificate_list.push_back(
                {encode_raw_credential(scheme, config_.credential->public_key), {}});
        }
        bytes framed_ct = encode_handshake({HandshakeKind::certificate, ct});
        transcript_->append(framed_ct);
        send_handshake(framed_ct, events);
        if (authenticate) {
            bytes signed_content = certificate_verify_input(false, transcript_->hash());
            CertificateVerifyMsg cv;
            cv.algorithm = scheme;
            cv.signature = sign_message(*config_.credential, signed_content);
            bytes framed_cv = encode_handshake({HandshakeKind::certificate_verify, cv});
            transcript_->append(framed_cv);
            send_handshake(framed_cv, events);
            negotiation_.client_authenticated = true;
        }
    }
    secure_bytes fk = finished_key(write_state_->secret());
    FinishedMsg fin{compute_verify_data(profile_->hash, fk, transcript_->hash())};
    bytes framed_fin = encode_handshake({HandshakeKind::finished, fin});
    transcript_->append(framed_fin);
    send_handshake(framed_fin, events);
}

void ClientEngine::on_finished(const FinishedMsg& fin, bytes_view framed, Events& events) {
    secure_bytes fk = finished_key(read_state_->secret());
    bytes expected = compute_verify_data(profile_->hash, fk, transcript_->hash());
    if (!ct_equal(expected, fin.verify_data)) {
        throw ProtocolError(AlertDescription::decrypt_error,
                            "server Finished verify_data does not match");
    }
    transcript_->append(framed);
    bytes th_sfin = transcript_->hash();
    note_checkpoint("after_server_finished", th_sfin);

    schedule_->into_master();
    note_secret("master_secret", schedule_->current_secret());
    auto [c_ap, s_ap] = schedule_->application_traffic_secrets(th_sfin);
    client_app_secret_ = c_ap;
    server_app_secret_ = s_ap;
    install_read(s_ap);

    // own flight still travels under the handshake traffic keys
    send_client_flight(events);
    bytes th_cfin = transcript_->hash();
    note_checkpoint("after_client_finished", th_cfin);

    auto [exporter, resumption] = schedule_->exporter_and_resumption_masters(th_sfin, th_cfin);
    note_secret("EXPORTER_SECRET", exporter);
    if (keylog_) keylog_("EXPORTER_SECRET", client_random_, exporter);
    note_secret("resumption_master_secret", resumption);
    resumption_master_ = std::move(resumption);

    install_write(c_ap);
    state_ = State::Connected;
    complete_handshake(events);
}

void ClientEngine::on_new_session_ticket(const NewSessionTicketMsg& nst, Events& events) {
    if (auto violation = check_extension_placement(ExtensionHost::NST, nst.extensions)) {
        throw ProtocolError(AlertDescription::illegal_parameter,
                            std::string("extension ") + ext::name(violation->extension_type) +
                                " not permitted in NewSessionTicket");
    }
    PreSharedKey psk;
    psk.secret = derive_resumption_psk(profile_->hash, resumption_master_, nst.ticket_nonce);
    psk.identity = nst.ticket;
    psk.kind = PskKind::resumption;
    psk.hash = profile_->hash;
    psk.ticket_age_add = nst.ticket_age_add;
    psk.lifetime_seconds = nst.ticket_lifetime;
    psk.issued_unix_ms = clock_();
    if (const Extension* ed = find_extension(nst.extensions, ext::early_data)) {
        psk.max_early_data = decode_early_data_nst(ed->body);
    }
    note_secret("resumption_psk", psk.secret);
    events.push_back(TicketIssued{std::move(psk)});
}

void ClientEngine::on_post_handshake_cert_request(const CertificateRequestMsg& cr,
                                                  bytes_view framed, Events& events) {
    if (!config_.offer_post_handshake_auth) {
        throw ProtocolError(AlertDescription::unexpected_message,
                            "unsolicited post-handshake authentication request");
    }
    if (cr.certificate_request_context.empty()) {
        throw ProtocolError(AlertDescription::illegal_parameter,
                            "post-handshake CertificateRequest needs a nonce context");
    }
    if (auto violation = check_extension_placement(ExtensionHost::CR, cr.extensions)) {
        throw ProtocolError(AlertDescription::illegal_parameter,
                            std::string("extension ") + ext::name(violation->extension_type) +
                                " not permitted in CertificateRequest");
    }
    if (find_extension(cr.extensions, ext::signature_algorithms) == nullptr) {
        throw ProtocolError(AlertDescription::missing_extension,
                            "CertificateRequest lacks signature_algorithms");
    }

    // Post-handshake context: the full handshake transcript plus this
    // request's messages, kept apart from the connection transcript.
    Transcript post(*transcript_);
    post.append(framed);

    bool authenticate = config_.credential.has_value();
    if (authenticate) {
        auto schemes = decode_signature_algorithms(
            find_extension(cr.extensions, ext::signature_algorithms)->body);
        if (std::find(schemes.begin(), schemes.end(), config_.credential->scheme) ==
            schemes.end()) {
            authenticate = false;
        }
    }
    CertificateMsg ct;
    ct.certificate_request_context = cr.certificate_request_context;
    if (authenticate) {
        ct.certificate_list.push_back(
            {encode_raw_credential(config_.credential->scheme, config_.credential->public_key),
             {}});
    }
    bytes framed_ct = encode_handshake({HandshakeKind::certificate, ct});
    post.append(framed_ct);
    send_handshake(framed_ct, events);
    if (authenticate) {
        bytes signed_content = certificate_verify_input(false, post.hash());
        CertificateVerifyMsg cv;
        cv.algorithm = config_.credential->scheme;
        cv.signature = sign_message(*config_.credential, signed_content);
        bytes framed_cv = encode_handshake({HandshakeKind::certificate_verify, cv});
        post.append(framed_cv);
        send_handshake(framed_cv, events);
    }
    // finished key from the current client application traffic secret
    secure_bytes fk = finished_key(write_state_->secret());
    FinishedMsg fin{compute_verify_data(profile_->hash, fk, post.hash())};
    send_handshake(encode_handshake({HandshakeKind::finished, fin}), events);
}

}  // namespace tls13
