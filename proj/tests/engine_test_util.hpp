#pragma once

#include <map>
#include <memory>
#include <string>

#include "tls13/engine.hpp"

namespace tls13::test {

struct EventLog {
    bytes wire;  // concatenated EmitRecord bytes
    std::vector<bytes> records;
    std::vector<PreSharedKey> tickets;
    bytes app_data;
    std::vector<Alert> alerts_sent;
    std::vector<Aborted> aborts;
    bool completed = false;
    NegotiationResult negotiation;

    void consume(Events events) {
        for (auto& event : events) {
            if (auto* rec = std::get_if<EmitRecord>(&event)) {
                append(wire, rec->record);
                records.push_back(std::move(rec->record));
            } else if (auto* t = std::get_if<TicketIssued>(&event)) {
                tickets.push_back(std::move(t->psk));
            } else if (auto* d = std::get_if<AppData>(&event)) {
                append(app_data, d->data);
            } else if (auto* a = std::get_if<AlertSent>(&event)) {
                alerts_sent.push_back(a->alert);
            } else if (auto* ab = std::get_if<Aborted>(&event)) {
                aborts.push_back(*ab);
            } else if (auto* hc = std::get_if<HandshakeComplete>(&event)) {
                completed = true;
                negotiation = hc->result;
            }
        }
    }
};

inline Credential make_credential(uint64_t seed, uint16_t scheme = sigscheme::ed25519) {
    SeededRng rng(seed);
    return generate_signature_key(scheme, rng);
}

struct ConfigPair {
    ClientConfig client;
    ServerConfig server;
};

inline ConfigPair default_configs(uint64_t seed = 7) {
    Credential server_cred = make_credential(seed ^ 0xC0DE);
    ClientConfig client;
    client.rng = std::make_shared<SeededRng>(seed * 2 + 1);
    client.clock = [] { return 1750000000000ull; };
    client.pinned_server_key = server_cred.public_key;
    ServerConfig server;
    server.rng = std::make_shared<SeededRng>(seed * 2 + 2);
    server.clock = [] { return 1750000000000ull; };
    server.credential = server_cred;
    return {std::move(client), std::move(server)};
}

// Lock-step pump until neither side produces output.
inline void pump(ClientEngine& client, ServerEngine& server, EventLog& client_log,
                 EventLog& server_log) {
    bytes to_server = std::exchange(client_log.wire, {});
    bytes to_client = std::exchange(server_log.wire, {});
    while (!to_server.empty() || !to_client.empty()) {
        if (!to_server.empty() && !server.aborted()) {
            server_log.consume(server.on_bytes(to_server));
        }
        to_server.clear();
        if (!to_client.empty() && !client.aborted()) {
            client_log.consume(client.on_bytes(to_client));
        }
        to_client.clear();
        to_server = std::exchange(client_log.wire, {});
        to_client = std::exchange(server_log.wire, {});
    }
}

inline void run_full_handshake(ClientEngine& client, ServerEngine& server, EventLog& client_log,
                               EventLog& server_log) {
    client_log.consume(client.start());
    pump(client, server, client_log, server_log);
}

// Captures traffic secrets via the keylog hook so tests can impersonate a
// peer's write direction (protected-record injection).
struct SecretCapture {
    std::map<std::string, bytes> secrets;

    KeylogCallback hook() {
        return [this](const std::string& label, bytes_view, bytes_view secret) {
            secrets[label] = to_bytes(secret);
        };
    }

    TrafficSecret traffic(const std::string& label, Sender sender, SecretPurpose purpose,
                          HashKind hash = HashKind::sha256) const {
        TrafficSecret s;
        s.sender = sender;
        s.purpose = purpose;
        s.hash = hash;
        const bytes& raw = secrets.at(label);
        s.secret.assign(raw.begin(), raw.end());
        return s;
    }
};

// Decrypts a captured record sequence with the given read chain (handshake
// secret first, then the application secret once handshake records stop
// decrypting) and returns every handshake message kind seen.
inline std::vector<HandshakeKind> handshake_kinds_in_records(
    const std::vector<bytes>& records, const SecretCapture& secrets, Sender sender,
    HashKind hash = HashKind::sha256, AeadKind aead = AeadKind::aes_128_gcm) {
    std::string prefix = sender == Sender::client ? "CLIENT" : "SERVER";
    std::vector<DirectionState> chain;
    if (secrets.secrets.count(prefix + "_HANDSHAKE_TRAFFIC_SECRET") != 0) {
        chain.emplace_back(
            secrets.traffic(prefix + "_HANDSHAKE_TRAFFIC_SECRET", sender,
                            SecretPurpose::handshake, hash),
            aead_descriptor(aead));
    }
    if (secrets.secrets.count(prefix + "_TRAFFIC_SECRET_0") != 0) {
        chain.emplace_back(secrets.traffic(prefix + "_TRAFFIC_SECRET_0", sender,
                                           SecretPurpose::application, hash),
                           aead_descriptor(aead));
    }

    std::vector<HandshakeKind> kinds;
    auto scan_payload = [&](bytes_view payload) {
        std::size_t offset = 0;
        while (offset + 4 <= payload.size()) {
            auto decoded = decode_handshake(payload.subspan(offset),
                                            hash_alg(hash).output_length);
            kinds.push_back(decoded.msg.kind);
            offset += decoded.consumed;
        }
    };

    for (const auto& record : records) {
        auto view = next_record(record);
        if (!view.has_value()) continue;
        if (view->type == ContentType::handshake) {
            scan_payload(view->payload);
            continue;
        }
        if (view->type != ContentType::application_data) continue;
        for (auto& state : chain) {
            try {
                auto inner = state.unprotect(*view);
                if (inner.content_type == ContentType::handshake) scan_payload(inner.content);
                break;
            } catch (const ProtocolError&) {
                // wrong phase keys; try the next state in the chain
            }
        }
    }
    return kinds;
}

}  // namespace tls13::test
