#include <doctest.h>

#include "engine_test_util.hpp"
#include "tls13/record.hpp"

using namespace tls13;
using namespace tls13::test;

namespace {

const std::vector<HandshakeKind> all_kinds = {
    HandshakeKind::client_hello,       HandshakeKind::server_hello,
    HandshakeKind::new_session_ticket, HandshakeKind::end_of_early_data,
    HandshakeKind::encrypted_extensions, HandshakeKind::certificate,
    HandshakeKind::certificate_request, HandshakeKind::certificate_verify,
    HandshakeKind::finished,           HandshakeKind::key_update,
};

ClientHello minimal_client_hello() {
    ClientHello ch;
    ch.random.fill(0x42);
    ch.cipher_suites = {suite::aes_128_gcm_sha256};
    ch.extensions.push_back({ext::supported_versions, encode_supported_versions_ch({0x0304})});
    ch.extensions.push_back({ext::supported_groups, encode_supported_groups({group::x25519})});
    ch.extensions.push_back(
        {ext::signature_algorithms, encode_signature_algorithms({sigscheme::ed25519})});
    ch.extensions.push_back(
        {ext::key_share, encode_key_share_ch({{group::x25519, bytes(32, 0x11)}})});
    return ch;
}

ServerHello minimal_server_hello() {
    ServerHello sh;
    sh.random.fill(0x24);
    sh.cipher_suite = suite::aes_128_gcm_sha256;
    sh.extensions.push_back({ext::supported_versions, encode_supported_versions_sh(0x0304)});
    sh.extensions.push_back(
        {ext::key_share, encode_key_share_sh({group::x25519, bytes(32, 0x22)})});
    return sh;
}

// A structurally valid message of each kind, for injection.
bytes crafted_message(HandshakeKind kind) {
    switch (kind) {
        case HandshakeKind::client_hello:
            return encode_handshake({kind, minimal_client_hello()});
        case HandshakeKind::server_hello:
            return encode_handshake({kind, minimal_server_hello()});
        case HandshakeKind::new_session_ticket: {
            NewSessionTicketMsg nst;
            nst.ticket_lifetime = 100;
            nst.ticket = {0x01, 0x02};
            return encode_handshake({kind, nst});
        }
        case HandshakeKind::end_of_early_data:
            return encode_handshake({kind, EndOfEarlyDataMsg{}});
        case HandshakeKind::encrypted_extensions:
            return encode_handshake({kind, EncryptedExtensions{}});
        case HandshakeKind::certificate: {
            CertificateMsg ct;
            ct.certificate_list.push_back(
                {encode_raw_credential(sigscheme::ed25519, bytes(32, 0xAB)), {}});
            return encode_handshake({kind, ct});
        }
        case HandshakeKind::certificate_request: {
            CertificateRequestMsg cr;
            cr.certificate_request_context = {0x05};
            cr.extensions.push_back(
                {ext::signature_algorithms, encode_signature_algorithms({sigscheme::ed25519})});
            return encode_handshake({kind, cr});
        }
        case HandshakeKind::certificate_verify:
            return encode_handshake({kind, CertificateVerifyMsg{sigscheme::ed25519,
                                                                bytes(64, 0x33)}});
        case HandshakeKind::finished:
            return encode_handshake({kind, FinishedMsg{bytes(32, 0x44)}});
        case HandshakeKind::key_update:
            return encode_handshake({kind, KeyUpdateMsg{0}});
        default:
            FAIL("unexpected kind");
            return {};
    }
}

struct Fixture {
    SecretCapture client_secrets;
    SecretCapture server_secrets;
    std::unique_ptr<ClientEngine> client;
    std::unique_ptr<ServerEngine> server;
    EventLog client_log, server_log;

    explicit Fixture(uint64_t seed) {
        auto [cc, sc] = default_configs(seed);
        Credential client_cred = make_credential(seed ^ 0xF00D);
        cc.credential = client_cred;
        cc.keylog = client_secrets.hook();
        sc.client_auth = ClientAuthPolicy::request;
        sc.pinned_client_key = client_cred.public_key;
        sc.keylog = server_secrets.hook();
        client = std::make_unique<ClientEngine>(cc);
        server = std::make_unique<ServerEngine>(sc);
    }
};

bool aborted_unexpected(const EventLog& log) {
    return log.aborts.size() == 1 &&
           log.aborts[0].alert.description == AlertDescription::unexpected_message;
}

}  // namespace

TEST_CASE("client state machine: every non-edge (state, kind) pair is unexpected_message") {
    // capture one reference handshake to obtain the server's flight records
    Fixture reference(100);
    reference.client_log.consume(reference.client->start());
    bytes ch = reference.client_log.wire;
    reference.server_log.consume(reference.server->on_bytes(ch));
    std::vector<bytes> flight = reference.server_log.records;
    REQUIRE(flight.size() == 6);  // SH, EE, CR, CT, CV, FIN

    struct StateCase {
        const char* name;
        std::size_t records_to_feed;
        std::vector<HandshakeKind> edges;
    };
    const std::vector<StateCase> cases = {
        {"WaitSH", 0, {HandshakeKind::server_hello}},
        {"WaitEE", 1, {HandshakeKind::encrypted_extensions}},
        {"WaitCertOrCR", 2, {HandshakeKind::certificate, HandshakeKind::certificate_request}},
        {"WaitCertOrCR+cr_seen", 3, {HandshakeKind::certificate}},
        {"WaitCV", 4, {HandshakeKind::certificate_verify}},
        {"WaitFin", 5, {HandshakeKind::finished}},
        {"Connected",
         6,
         {HandshakeKind::new_session_ticket, HandshakeKind::key_update,
          HandshakeKind::certificate_request}},
    };

    for (const auto& state_case : cases) {
        for (HandshakeKind kind : all_kinds) {
            bool is_edge = std::find(state_case.edges.begin(), state_case.edges.end(), kind) !=
                           state_case.edges.end();
            if (is_edge) continue;
            CAPTURE(state_case.name);
            CAPTURE(handshake_kind_name(kind));

            Fixture fx(100);  // same seed: same wire bytes, replayable
            fx.client_log.consume(fx.client->start());
            for (std::size_t i = 0; i < state_case.records_to_feed; ++i) {
                fx.client_log.consume(fx.client->on_bytes(flight[i]));
            }
            REQUIRE_FALSE(fx.client->aborted());
            fx.client_log.aborts.clear();

            bytes framed = crafted_message(kind);
            bytes record;
            if (state_case.records_to_feed == 0) {
                record = encode_record(ContentType::handshake, version::tls12, framed);
            } else if (state_case.records_to_feed < 6) {
                // the server's write side is on handshake keys; seq counts the
                // protected flight records already delivered
                DirectionState imposter(
                    fx.client_secrets.traffic("SERVER_HANDSHAKE_TRAFFIC_SECRET",
                                              Sender::server, SecretPurpose::handshake),
                    aead_descriptor(AeadKind::aes_128_gcm));
                for (std::size_t i = 1; i < state_case.records_to_feed; ++i) {
                    imposter.protect(bytes{0x00}, ContentType::handshake);  // advance seq
                }
                record = imposter.protect(framed, ContentType::handshake);
            } else {
                DirectionState imposter(
                    fx.client_secrets.traffic("SERVER_TRAFFIC_SECRET_0", Sender::server,
                                              SecretPurpose::application),
                    aead_descriptor(AeadKind::aes_128_gcm));
                record = imposter.protect(framed, ContentType::handshake);
            }
            fx.client_log.consume(fx.client->on_bytes(record));
            CHECK(aborted_unexpected(fx.client_log));
        }
    }
}

TEST_CASE("server state machine: every non-edge (state, kind) pair is unexpected_message") {
    // reference run for the client's flight records
    Fixture reference(200);
    reference.client_log.consume(reference.client->start());
    bytes ch_record = reference.client_log.wire;
    reference.client_log.wire.clear();
    reference.server_log.consume(reference.server->on_bytes(ch_record));
    reference.client_log.consume(reference.client->on_bytes(reference.server_log.wire));
    std::vector<bytes> client_flight(reference.client_log.records.begin() + 1,
                                     reference.client_log.records.end());
    REQUIRE(client_flight.size() == 3);  // CT, CV, FIN

    struct StateCase {
        const char* name;
        std::size_t feed;  // 0: nothing (WaitCH); 1..: CH + n-1 client flight records
        std::vector<HandshakeKind> edges;
    };
    const std::vector<StateCase> cases = {
        {"WaitCH", 0, {HandshakeKind::client_hello}},
        {"WaitClientCert", 1, {HandshakeKind::certificate}},
        {"WaitClientCV", 2, {HandshakeKind::certificate_verify}},
        {"WaitClientFin", 3, {HandshakeKind::finished}},
        {"Connected", 4, {HandshakeKind::key_update}},
    };

    for (const auto& state_case : cases) {
        for (HandshakeKind kind : all_kinds) {
            bool is_edge = std::find(state_case.edges.begin(), state_case.edges.end(), kind) !=
                           state_case.edges.end();
            if (is_edge) continue;
            CAPTURE(state_case.name);
            CAPTURE(handshake_kind_name(kind));

            Fixture fx(200);
            fx.client_log.consume(fx.client->start());
            if (state_case.feed >= 1) {
                fx.server_log.consume(fx.server->on_bytes(ch_record));
                for (std::size_t i = 0; i + 1 < state_case.feed; ++i) {
                    fx.server_log.consume(fx.server->on_bytes(client_flight[i]));
                }
            }
            REQUIRE_FALSE(fx.server->aborted());
            fx.server_log.aborts.clear();

            bytes framed = crafted_message(kind);
            bytes record;
            if (state_case.feed == 0) {
                record = encode_record(ContentType::handshake, version::tls12, framed);
            } else if (state_case.feed < 4) {
                DirectionState imposter(
                    fx.server_secrets.traffic("CLIENT_HANDSHAKE_TRAFFIC_SECRET",
                                              Sender::client, SecretPurpose::handshake),
                    aead_descriptor(AeadKind::aes_128_gcm));
                for (std::size_t i = 1; i < state_case.feed; ++i) {
                    imposter.protect(bytes{0x00}, ContentType::handshake);
                }
                record = imposter.protect(framed, ContentType::handshake);
            } else {
                DirectionState imposter(
                    fx.server_secrets.traffic("CLIENT_TRAFFIC_SECRET_0", Sender::client,
                                              SecretPurpose::application),
                    aead_descriptor(AeadKind::aes_128_gcm));
                record = imposter.protect(framed, ContentType::handshake);
            }
            fx.server_log.consume(fx.server->on_bytes(record));
            CHECK(aborted_unexpected(fx.server_log));
        }
    }
}

TEST_CASE("server awaiting the retried ClientHello accepts nothing else") {
    for (HandshakeKind kind : all_kinds) {
        if (kind == HandshakeKind::client_hello) continue;
        CAPTURE(handshake_kind_name(kind));
        auto [cc, sc] = default_configs(300);
        cc.groups = {group::x25519, group::x448};
        cc.share_groups = {group::x25519};
        sc.groups = {group::x448};
        ClientEngine client(cc);
        ServerEngine server(sc);
        EventLog client_log, server_log;
        client_log.consume(client.start());
        server_log.consume(server.on_bytes(client_log.wire));  // emits the HRR
        REQUIRE_FALSE(server.aborted());

        bytes record =
            encode_record(ContentType::handshake, version::tls12, crafted_message(kind));
        server_log.consume(server.on_bytes(record));
        CHECK(aborted_unexpected(server_log));
    }
}

TEST_CASE("a second HelloRetryRequest aborts with unexpected_message") {
    auto [cc, sc] = default_configs(301);
    cc.groups = {group::x25519, group::x448};
    cc.share_groups = {group::x25519};
    sc.groups = {group::x448};
    ClientEngine client(cc);
    ServerEngine server(sc);
    EventLog client_log, server_log;
    client_log.consume(client.start());
    server_log.consume(server.on_bytes(client_log.wire));
    client_log.wire.clear();
    REQUIRE(server_log.records.size() == 1);
    bytes hrr_record = server_log.records[0];
    client_log.consume(client.on_bytes(hrr_record));  // first HRR: client retries
    REQUIRE(client_log.aborts.empty());
    client_log.consume(client.on_bytes(hrr_record));  // second HRR
    CHECK(aborted_unexpected(client_log));
}

TEST_CASE("client_hello to a connected server is unexpected_message") {
    Fixture fx(302);
    fx.client_log.consume(fx.client->start());
    bytes ch_record = fx.client_log.wire;  // keep a copy; pump delivers the original
    pump(*fx.client, *fx.server, fx.client_log, fx.server_log);
    REQUIRE(fx.server->connected());

    fx.server_log.consume(fx.server->on_bytes(ch_record));
    CHECK(aborted_unexpected(fx.server_log));
}
