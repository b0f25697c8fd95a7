#include <doctest.h>

#include <map>

#include "engine_test_util.hpp"
#include "tls13/harness.hpp"

using namespace tls13;
using namespace tls13::test;

namespace {

ScenarioOptions default_scenario(uint64_t seed = 7) {
    ScenarioOptions options;
    auto [cc, sc] = default_configs(seed);
    cc.rng.reset();  // the harness seeds both engines itself
    sc.rng.reset();
    cc.clock = nullptr;
    sc.clock = nullptr;
    options.client = std::move(cc);
    options.server = std::move(sc);
    options.seed = seed;
    return options;
}

}  // namespace

TEST_CASE("default loopback completes with the expected parameters") {
    ScenarioOptions options = default_scenario();
    options.app_echo_bytes = 4096;
    ConnectionReport report = run_loopback(options);
    CHECK(report.outcome == "completed");
    CHECK(report.negotiation.cipher_suite == suite::aes_128_gcm_sha256);
    REQUIRE(report.negotiation.group.has_value());
    CHECK(*report.negotiation.group == group::x25519);
    CHECK(report.echo_ok);
    CHECK(report.half_close_ok);
    CHECK(report.client_checkpoints == report.server_checkpoints);

    // both engines derive byte-identical secrets (install order may differ)
    auto sorted = [](std::vector<std::pair<std::string, std::string>> v) {
        std::sort(v.begin(), v.end());
        return v;
    };
    CHECK(sorted(report.client_secrets) == sorted(report.server_secrets));
}

TEST_CASE("seeded runs are byte-identical, single-threaded and threaded") {
    ScenarioOptions options = default_scenario(77);
    options.app_echo_bytes = 1024;
    options.key_update = KeyUpdateActor::client;

    ScenarioReport a, b;
    a.connections.push_back(run_loopback(options));
    b.connections.push_back(run_loopback(options));
    CHECK(a.to_text() == b.to_text());

    ScenarioOptions threaded = options;
    threaded.threaded = true;
    ScenarioReport c;
    c.connections.push_back(run_loopback(threaded));
    CHECK(a.to_text() == c.to_text());
    CHECK_FALSE(a.to_text().empty());
}

TEST_CASE("distinct seeds give distinct wire bytes") {
    std::vector<std::pair<std::string, bytes>> trace_a, trace_b;
    ScenarioOptions a = default_scenario(1);
    a.trace_sink = &trace_a;
    run_loopback(a);
    ScenarioOptions b = default_scenario(2);
    b.trace_sink = &trace_b;
    run_loopback(b);
    REQUIRE_FALSE(trace_a.empty());
    CHECK(trace_a[0].second != trace_b[0].second);
}

TEST_CASE("forced group mismatch produces exactly one HelloRetryRequest") {
    ScenarioOptions options = default_scenario(9);
    options.client.groups = {group::x25519, group::x448};
    options.client.share_groups = {group::x25519};
    options.server.groups = {group::x448};
    std::vector<std::pair<std::string, bytes>> trace;
    options.trace_sink = &trace;

    ConnectionReport report = run_loopback(options);
    CHECK(report.outcome == "completed");

    std::size_t hrr_count = 0;
    for (const auto& [dir, record] : trace) {
        if (dir != "s2c") continue;
        auto view = next_record(record);
        if (!view || view->type != ContentType::handshake) continue;
        auto decoded = decode_handshake(view->payload);
        if (decoded.msg.kind == HandshakeKind::server_hello &&
            is_hello_retry_request(std::get<ServerHello>(decoded.msg.body))) {
            ++hrr_count;
        }
    }
    CHECK(hrr_count == 1);
}

TEST_CASE("fault: one flipped ciphertext bit aborts with bad_record_mac") {
    ScenarioOptions options = default_scenario(10);
    // s2c record 0 is the plaintext ServerHello; record 1 is the protected
    // EncryptedExtensions. Flip one bit inside its ciphertext body.
    options.faults.bit_flips.push_back({Sender::server, 1, record_header_size + 2});
    ConnectionReport report = run_loopback(options);
    CHECK(report.outcome == "aborted");
    REQUIRE(report.abort_alert.has_value());
    CHECK(report.abort_alert->description == AlertDescription::bad_record_mac);
    CHECK(report.abort_side == "client");
}

TEST_CASE("fault: header bytes are authenticated too") {
    ScenarioOptions options = default_scenario(11);
    options.faults.bit_flips.push_back({Sender::server, 1, 2});  // inside the 5-byte header
    ConnectionReport report = run_loopback(options);
    CHECK(report.outcome == "aborted");
    REQUIRE(report.abort_alert.has_value());
    CHECK(report.abort_alert->description == AlertDescription::bad_record_mac);
}

TEST_CASE("fault: reordered protected records fail authentication") {
    ScenarioOptions options = default_scenario(12);
    options.faults.swaps.push_back({Sender::server, 1});
    ConnectionReport report = run_loopback(options);
    CHECK(report.outcome == "aborted");
    REQUIRE(report.abort_alert.has_value());
    CHECK(report.abort_alert->description == AlertDescription::bad_record_mac);
}

TEST_CASE("fault: a truncated stream deadlocks and the harness reports it") {
    ScenarioOptions options = default_scenario(13);
    options.faults.truncations.push_back({Sender::server, 0, 3});
    CHECK_THROWS_AS(run_loopback(options), HarnessError);
}

TEST_CASE("early data offered is skipped, not delivered") {
    ScenarioOptions options = default_scenario(14);
    options.client.offer_early_data = true;
    // junk early-data records (random ciphertext) right after the ClientHello
    bytes junk(64, 0x99);
    options.faults.injections.push_back(
        {Sender::client, 1, encode_record(ContentType::application_data, version::tls12, junk)});
    options.faults.injections.push_back(
        {Sender::client, 1, encode_record(ContentType::application_data, version::tls12, junk)});
    options.app_echo_bytes = 128;
    ConnectionReport report = run_loopback(options);
    CHECK(report.outcome == "completed");
    CHECK(report.echo_ok);
}

TEST_CASE("early data skip budget aborts with unexpected_message when exceeded") {
    ScenarioOptions options = default_scenario(15);
    options.client.offer_early_data = true;
    options.server.max_early_data_skip = 100;
    bytes junk(101, 0x99);
    options.faults.injections.push_back(
        {Sender::client, 1, encode_record(ContentType::application_data, version::tls12, junk)});
    ConnectionReport report = run_loopback(options);
    CHECK(report.outcome == "aborted");
    REQUIRE(report.abort_alert.has_value());
    CHECK(report.abort_alert->description == AlertDescription::unexpected_message);
    CHECK(report.abort_side == "server");
}

TEST_CASE("early data ahead of a retried ClientHello is discarded wholesale") {
    ScenarioOptions options = default_scenario(16);
    options.client.offer_early_data = true;
    options.client.groups = {group::x25519, group::x448};
    options.client.share_groups = {group::x25519};
    options.server.groups = {group::x448};
    bytes junk(64, 0x77);
    options.faults.injections.push_back(
        {Sender::client, 1, encode_record(ContentType::application_data, version::tls12, junk)});
    ConnectionReport report = run_loopback(options);
    CHECK(report.outcome == "completed");
}

TEST_CASE("simulation with resumption uses the ticket and flags resumed") {
    SimulationOptions options;
    static_cast<ScenarioOptions&>(options) = default_scenario(17);
    options.server.ticket_count = 1;
    options.resume = true;
    ScenarioReport report = run_simulation(options);
    REQUIRE(report.connections.size() == 2);
    CHECK(report.connections[0].outcome == "completed");
    CHECK_FALSE(report.connections[0].negotiation.resumed);
    REQUIRE_FALSE(report.connections[0].tickets.empty());
    CHECK(report.connections[1].outcome == "completed");
    CHECK(report.connections[1].negotiation.resumed);
    // the resumed server flight is shorter: no Certificate/CertificateVerify
    CHECK(report.connections[1].records.size() < report.connections[0].records.size());
}

TEST_CASE("keylog lines cover every installed secret exactly once") {
    std::map<std::string, int> labels;
    ScenarioOptions options = default_scenario(18);
    options.keylog = [&](const std::string& label, bytes_view client_random, bytes_view secret) {
        CHECK(client_random.size() == 32);
        CHECK_FALSE(secret.empty());
        labels[label] += 1;
    };
    ConnectionReport report = run_loopback(options);
    REQUIRE(report.outcome == "completed");
    CHECK(labels["CLIENT_HANDSHAKE_TRAFFIC_SECRET"] == 1);
    CHECK(labels["SERVER_HANDSHAKE_TRAFFIC_SECRET"] == 1);
    CHECK(labels["CLIENT_TRAFFIC_SECRET_0"] == 1);
    CHECK(labels["SERVER_TRAFFIC_SECRET_0"] == 1);
    CHECK(labels["EXPORTER_SECRET"] == 1);
    CHECK(labels.size() == 5);
}

TEST_CASE("key update via the harness resets sequences and re-keys") {
    ScenarioOptions options = default_scenario(19);
    options.key_update = KeyUpdateActor::client;
    options.app_echo_bytes = 64;
    ConnectionReport report = run_loopback(options);
    CHECK(report.outcome == "completed");
    CHECK(report.key_update_ok);
    CHECK(report.echo_ok);
}

TEST_CASE("post-handshake auth via the harness") {
    ScenarioOptions options = default_scenario(20);
    Credential cred = make_credential(0xCAFE);
    options.client.credential = cred;
    options.client.offer_post_handshake_auth = true;
    options.server.pinned_client_key = cred.public_key;
    options.post_hs_auth = true;
    ConnectionReport report = run_loopback(options);
    CHECK(report.outcome == "completed");
    CHECK(report.post_hs_auth_ok);
}

TEST_CASE("ticket store round-trips and skips expired entries") {
    PreSharedKey fresh;
    fresh.identity = {0x01, 0x02};
    fresh.secret.assign(32, 0x11);
    fresh.hash = HashKind::sha256;
    fresh.ticket_age_add = 1234;
    fresh.lifetime_seconds = 7200;
    fresh.issued_unix_ms = 1000000;

    PreSharedKey stale = fresh;
    stale.identity = {0x03};
    stale.issued_unix_ms = 0;
    stale.lifetime_seconds = 1;

    std::string text = ticket_store_save({fresh, stale});
    CHECK(text.find('\t') != std::string::npos);

    auto loaded = ticket_store_load(text, 1000000 + 3600 * 1000);
    REQUIRE(loaded.size() == 1);
    CHECK(loaded[0].identity == fresh.identity);
    CHECK(bytes(loaded[0].secret.begin(), loaded[0].secret.end()) ==
          bytes(fresh.secret.begin(), fresh.secret.end()));
    CHECK(loaded[0].ticket_age_add == fresh.ticket_age_add);
    CHECK(loaded[0].lifetime_seconds == fresh.lifetime_seconds);
    CHECK(loaded[0].issued_unix_ms == fresh.issued_unix_ms);

    // a lifetime beyond seven days is clamped for expiry purposes
    PreSharedKey overlong = fresh;
    overlong.lifetime_seconds = max_ticket_lifetime * 2;
    std::string text2 = ticket_store_save({overlong});
    CHECK(ticket_store_load(text2, fresh.issued_unix_ms + (max_ticket_lifetime + 10) * 1000ull)
              .empty());
}

TEST_CASE("report text is stable and line oriented") {
    ScenarioOptions options = default_scenario(21);
    ScenarioReport report;
    report.connections.push_back(run_loopback(options));
    std::string text = report.to_text();
    CHECK(text.find("connection: 1\n") != std::string::npos);
    CHECK(text.find("outcome: completed\n") != std::string::npos);
    CHECK(text.find("negotiated_suite: TLS_AES_128_GCM_SHA256\n") != std::string::npos);
    CHECK(text.find("checkpoint client after_server_finished: ") != std::string::npos);
    CHECK(text.find("record 0: c2s handshake ") != std::string::npos);
}
