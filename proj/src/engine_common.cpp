#include <chrono>

#include "tls13/engine.hpp"

namespace tls13 {

bytes encode_raw_credential(uint16_t scheme, bytes_view public_key) {
    ByteWriter w;
    w.u16(scheme);
    w.raw(public_key);
    return w.take();
}

RawCredential decode_raw_credential(bytes_view cert_data) {
    ByteReader r(cert_data);
    RawCredential cred;
    cred.scheme = r.u16();
    cred.public_key = to_bytes(r.take(r.remaining()));
    if (cred.public_key.empty()) throw DecodeError("empty credential key");
    return cred;
}

CertificateVerifier make_pinned_verifier(bytes expected_public_key) {
    return [expected = std::move(expected_public_key)](const CertificateMsg& msg) {
        // Raw public keys: the list must contain exactly one certificate.
        if (msg.certificate_list.size() != 1) {
            throw ProtocolError(AlertDescription::bad_certificate,
                                "raw-key chain must contain exactly one entry");
        }
        RawCredential cred = decode_raw_credential(msg.certificate_list.front().cert_data);
        if (!ct_equal(cred.public_key, expected)) {
            throw ProtocolError(AlertDescription::bad_certificate,
                                "peer key does not match the pinned key");
        }
    };
}

namespace {
uint64_t system_unix_ms() {
    return static_cast<uint64_t>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                     std::chrono::system_clock::now().time_since_epoch())
                                     .count());
}
}  // namespace

EngineBase::EngineBase(Sender role, CommonConfig common)
    : role_(role),
      rng_(common.rng ? std::move(common.rng) : std::make_shared<SystemRng>()),
      clock_(common.clock ? std::move(common.clock) : Clock(system_unix_ms)),
      keylog_(std::move(common.keylog)),
      record_padding_(common.record_padding) {}

std::size_t EngineBase::finished_length() const {
    return profile_ ? hash_alg(profile_->hash).output_length : 0;
}

void EngineBase::note_secret(const std::string& label, bytes_view secret) {
    secret_trace_.emplace_back(label, to_hex(secret));
}

void EngineBase::note_checkpoint(const std::string& name, bytes_view hash) {
    checkpoints_.emplace_back(name, to_hex(hash));
}

void EngineBase::log_traffic_secret(const TrafficSecret& secret) {
    std::string label = keylog_label(secret);
    if (secret.purpose == SecretPurpose::application) {
        label += "_" + std::to_string(secret.generation);
    }
    note_secret(label, secret.secret);
    if (keylog_) keylog_(label, client_random_, secret.secret);
}

void EngineBase::install_read(TrafficSecret secret) {
    log_traffic_secret(secret);
    if (read_state_) {
        read_state_->install(std::move(secret));
    } else {
        read_state_.emplace(std::move(secret), aead_descriptor(profile_->aead));
    }
}

void EngineBase::install_write(TrafficSecret secret) {
    log_traffic_secret(secret);
    if (write_state_) {
        write_state_->install(std::move(secret));
    } else {
        write_state_.emplace(std::move(secret), aead_descriptor(profile_->aead));
    }
}

void EngineBase::send_handshake(bytes_view framed, Events& events, bool force_plaintext) {
    if (write_state_ && !force_plaintext) {
        for (std::size_t off = 0; off < framed.size(); off += max_plaintext_fragment) {
            std::size_t n = std::min(max_plaintext_fragment, framed.size() - off);
            events.push_back(EmitRecord{write_state_->protect(
                framed.subspan(off, n), ContentType::handshake, record_padding_)});
        }
        return;
    }
    for (auto& record : fragment_payload(ContentType::handshake, version::tls12, framed)) {
        events.push_back(EmitRecord{std::move(record)});
    }
}

void EngineBase::send_alert(const Alert& alert, Events& events) {
    bytes payload = encode_alert(alert);
    bytes record = write_state_
                       ? write_state_->protect(payload, ContentType::alert, record_padding_)
                       : encode_record(ContentType::alert, version::tls12, payload);
    events.push_back(EmitRecord{std::move(record)});
    events.push_back(AlertSent{alert});
}

void EngineBase::abort_with(AlertDescription desc, const std::string& reason, Events& events) {
    if (aborted_) return;
    if (!write_closed_) send_alert(make_alert(desc), events);
    aborted_ = true;
    events.push_back(Aborted{make_alert(desc), reason, true});
}

Events EngineBase::on_bytes(bytes_view input) {
    Events events;
    if (aborted_) return events;  // closed channels accept no further input
    append(inbuf_, input);
    try {
        while (!aborted_) {
            auto rec = next_record(inbuf_);
            if (!rec.has_value()) break;
            bytes record_bytes(inbuf_.begin(), inbuf_.begin() + rec->consumed);
            inbuf_.erase(inbuf_.begin(), inbuf_.begin() + rec->consumed);
            RecordView view{rec->type, rec->legacy_version,
                            bytes_view(record_bytes).subspan(record_header_size), rec->consumed};
            process_record(view, events);
        }
    } catch (const ProtocolError& e) {
        abort_with(e.alert, e.what(), events);
    } catch (const DecodeError& e) {
        abort_with(AlertDescription::decode_error, e.what(), events);
    }
    return events;
}

void EngineBase::process_record(const RecordView& record, Events& events) {
    if (read_closed_) return;  // any data after the peer's close_notify is ignored

    if (record.type == ContentType::change_cipher_spec) {
        // middlebox-compatibility records: accepted and ignored mid-handshake
        if (connected_) {
            throw ProtocolError(AlertDescription::unexpected_message,
                                "change_cipher_spec after the handshake");
        }
        if (record.payload.size() != 1 || record.payload[0] != 0x01) {
            throw ProtocolError(AlertDescription::unexpected_message,
                                "malformed change_cipher_spec");
        }
        return;
    }

    if (read_state_.has_value() && record.type == ContentType::application_data) {
        if (skip_early_records_ && !connected_) {
            // ServerHello path: trial-decrypt, discard failures as early data
            try {
                auto inner = read_state_->unprotect(record);
                seen_protected_read_ = true;
                skip_early_records_ = false;  // client switched to handshake keys
                if (inner.content.size() > max_plaintext_fragment) {
                    throw ProtocolError(AlertDescription::record_overflow,
                                        "inner plaintext exceeds 2^14");
                }
                dispatch_plaintext(inner.content_type, inner.content, events);
            } catch (const ProtocolError& e) {
                if (e.alert != AlertDescription::bad_record_mac) throw;
                early_skipped_ += record.payload.size();
                if (early_skipped_ > early_skip_budget_) {
                    throw ProtocolError(AlertDescription::unexpected_message,
                                        "early-data skip budget exceeded");
                }
            }
            return;
        }
        auto inner = read_state_->unprotect(record);
        seen_protected_read_ = true;
        if (inner.content.size() > max_plaintext_fragment) {
            throw ProtocolError(AlertDescription::record_overflow,
                                "inner plaintext exceeds 2^14");
        }
        dispatch_plaintext(inner.content_type, inner.content, events);
        return;
    }

    if (!read_state_.has_value() && discard_early_records_ &&
        record.type == ContentType::application_data) {
        // post-HelloRetryRequest path: encrypted records are discarded wholesale
        early_skipped_ += record.payload.size();
        if (early_skipped_ > early_skip_budget_) {
            throw ProtocolError(AlertDescription::unexpected_message,
                                "early-data skip budget exceeded");
        }
        return;
    }

    if (record.payload.size() > max_plaintext_fragment) {
        throw ProtocolError(AlertDescription::record_overflow,
                            "plaintext record exceeds 2^14");
    }

    if (read_state_.has_value()) {
        // The peer may alert in plaintext before it installed keys.
        if (record.type == ContentType::alert && !seen_protected_read_) {
            handle_alert_payload(record.payload, events);
            return;
        }
        throw ProtocolError(AlertDescription::unexpected_message,
                            "unprotected record while record protection is active");
    }

    dispatch_plaintext(record.type, record.payload, events);
}

void EngineBase::dispatch_plaintext(ContentType type, bytes_view content, Events& events) {
    switch (type) {
        case ContentType::handshake:
            if (content.empty()) {
                throw ProtocolError(AlertDescription::decode_error, "empty handshake record");
            }
            append(hs_buf_, content);
            drain_handshake_buffer(events);
            return;
        case ContentType::alert:
            if (!hs_buf_.empty()) {
                throw ProtocolError(AlertDescription::unexpected_message,
                                    "alert interleaved with a fragmented handshake message");
            }
            handle_alert_payload(content, events);
            return;
        case ContentType::application_data:
            if (!connected_) {
                throw ProtocolError(AlertDescription::unexpected_message,
                                    "application data before the handshake completed");
            }
            if (!hs_buf_.empty()) {
                throw ProtocolError(AlertDescription::unexpected_message,
                                    "application data interleaved with handshake fragments");
            }
            if (!content.empty()) events.push_back(AppData{to_bytes(content)});
            return;
        default:
            throw ProtocolError(AlertDescription::unexpected_message,
                                "unexpected inner content type");
    }
}

void EngineBase::drain_handshake_buffer(Events& events) {
    while (!aborted_ && hs_buf_.size() >= 4) {
        std::size_t length = static_cast<std::size_t>(hs_buf_[1]) << 16 |
                             static_cast<std::size_t>(hs_buf_[2]) << 8 | hs_buf_[3];
        if (length > (1u << 20)) {
            throw ProtocolError(AlertDescription::decode_error,
                                "handshake message implausibly large");
        }
        if (hs_buf_.size() < 4 + length) break;
        auto kind = static_cast<HandshakeKind>(hs_buf_[0]);
        switch (kind) {
            case HandshakeKind::client_hello:
            case HandshakeKind::server_hello:
            case HandshakeKind::new_session_ticket:
            case HandshakeKind::end_of_early_data:
            case HandshakeKind::encrypted_extensions:
            case HandshakeKind::certificate:
            case HandshakeKind::certificate_request:
            case HandshakeKind::certificate_verify:
            case HandshakeKind::finished:
            case HandshakeKind::key_update:
                break;
            default:
                throw ProtocolError(AlertDescription::decode_error,
                                    "unknown handshake message kind");
        }
        if (!kind_allowed(kind)) {
            throw ProtocolError(AlertDescription::unexpected_message,
                                std::string(handshake_kind_name(kind)) +
                                    " not expected in this state");
        }
        bytes framed(hs_buf_.begin(), hs_buf_.begin() + 4 + length);
        hs_buf_.erase(hs_buf_.begin(), hs_buf_.begin() + 4 + length);
        handle_handshake(kind, framed, events);
    }
}

void EngineBase::handle_alert_payload(bytes_view payload, Events& events) {
    Alert alert = decode_alert(payload);
    if (alert.description == AlertDescription::close_notify) {
        read_closed_ = true;  // one direction only; our write side stays open
        return;
    }
    aborted_ = true;  // error alerts kill both directions immediately
    events.push_back(
        Aborted{alert, std::string("peer sent ") + alert_name(alert.description), false});
}

Events EngineBase::send_app_data(bytes_view data) {
    if (!connected_ || aborted_) throw std::logic_error("send_app_data: channel not open");
    if (write_closed_) throw std::logic_error("send_app_data: write direction closed");
    Events events;
    for (std::size_t off = 0; off < data.size(); off += max_plaintext_fragment) {
        std::size_t n = std::min(max_plaintext_fragment, data.size() - off);
        events.push_back(EmitRecord{write_state_->protect(
            data.subspan(off, n), ContentType::application_data, record_padding_)});
    }
    return events;
}

Events EngineBase::initiate_key_update(bool request_peer) {
    if (!connected_ || aborted_) throw std::logic_error("key update: channel not open");
    if (write_closed_) throw std::logic_error("key update: write direction closed");
    Events events;
    HandshakeMessage msg{HandshakeKind::key_update,
                         KeyUpdateMsg{static_cast<uint8_t>(request_peer ? 1 : 0)}};
    send_handshake(encode_handshake(msg), events);
    install_write(update_traffic_secret(write_state_->secret()));
    return events;
}

void EngineBase::handle_key_update(const KeyUpdateMsg& msg, Events& events) {
    install_read(update_traffic_secret(read_state_->secret()));
    if (msg.request_update == 1 && !write_closed_) {
        HandshakeMessage reply{HandshakeKind::key_update, KeyUpdateMsg{0}};
        send_handshake(encode_handshake(reply), events);
        install_write(update_traffic_secret(write_state_->secret()));
    }
}

Events EngineBase::close() {
    Events events;
    if (aborted_ || write_closed_) return events;
    send_alert(make_alert(AlertDescription::close_notify), events);
    write_closed_ = true;
    return events;
}

void EngineBase::complete_handshake(Events& events) {
    connected_ = true;
    negotiation_.version = version::tls13;
    events.push_back(HandshakeComplete{negotiation_});
}

}  // namespace tls13
