#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "tls13/harness.hpp"
#include "tls13/hkdf.hpp"

using namespace tls13;

namespace {

std::vector<std::string> split_list(const std::string& csv) {
    std::vector<std::string> out;
    std::istringstream is(csv);
    std::string item;
    while (std::getline(is, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

uint16_t parse_suite(const std::string& token) {
    static const std::vector<std::pair<std::string, uint16_t>> names = {
        {"TLS_AES_128_GCM_SHA256", suite::aes_128_gcm_sha256},
        {"TLS_AES_256_GCM_SHA384", suite::aes_256_gcm_sha384},
        {"TLS_CHACHA20_POLY1305_SHA256", suite::chacha20_poly1305_sha256},
        {"aes128gcm", suite::aes_128_gcm_sha256},
        {"aes256gcm", suite::aes_256_gcm_sha384},
        {"chacha20", suite::chacha20_poly1305_sha256},
    };
    for (const auto& [name, id] : names) {
        if (token == name) return id;
    }
    return static_cast<uint16_t>(std::stoul(token, nullptr, 16));
}

uint16_t parse_group(const std::string& token) {
    static const std::vector<std::pair<std::string, uint16_t>> names = {
        {"x25519", group::x25519},
        {"x448", group::x448},
        {"secp256r1", group::secp256r1},
    };
    for (const auto& [name, id] : names) {
        if (token == name) return id;
    }
    return static_cast<uint16_t>(std::stoul(token, nullptr, 16));
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << content;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
    std::string suites = "TLS_AES_128_GCM_SHA256";
    std::string groups = "x25519";
    std::string psk_mode = "none";
    std::string client_auth = "off";
    bool force_hrr = false;
    uint32_t tickets = 0;
    std::string key_update = "none";
    bool resume = false;
    bool post_hs_auth = false;
    uint64_t seed = 1;
    std::string keylog_file;
    std::string report_file;
    std::string trace_file;
    std::string ticket_store_file;
    std::size_t echo_bytes = 1024;
    bool threaded = false;
    std::string flip;  // DIR:RECORD:BYTE, e.g. s2c:1:7
};

int run_simulate(const SimulateArgs& args) {
    SimulationOptions options;
    options.seed = args.seed;
    options.threaded = args.threaded;
    options.app_echo_bytes = args.echo_bytes;
    options.resume = args.resume;
    options.post_hs_auth = args.post_hs_auth;
    if (args.key_update == "c") options.key_update = KeyUpdateActor::client;
    else if (args.key_update == "s") options.key_update = KeyUpdateActor::server;
    else if (args.key_update == "both") options.key_update = KeyUpdateActor::both;

    std::vector<uint16_t> suites;
    for (const auto& token : split_list(args.suites)) suites.push_back(parse_suite(token));
    std::vector<uint16_t> groups;
    for (const auto& token : split_list(args.groups)) groups.push_back(parse_group(token));

    options.client.cipher_suites = suites;
    options.server.cipher_suites = suites;
    options.client.groups = groups;
    options.server.groups = groups;

    if (args.force_hrr) {
        if (groups.size() < 2) {
            options.client.groups = {group::x25519, group::x448};
            options.server.groups = {group::x448};
        } else {
            options.server.groups = {groups.back()};
        }
        options.client.share_groups = {options.client.groups.front()};
    }

    // deterministic server credential from the seed
    SeededRng cred_rng(args.seed ^ 0xC0DE);
    options.server.credential = generate_signature_key(sigscheme::ed25519, cred_rng);
    options.client.pinned_server_key = options.server.credential->public_key;

    if (args.client_auth != "off" || args.post_hs_auth) {
        SeededRng client_cred_rng(args.seed ^ 0xCA11);
        Credential client_cred = generate_signature_key(sigscheme::ed25519, client_cred_rng);
        options.client.credential = client_cred;
        options.server.pinned_client_key = client_cred.public_key;
    }
    if (args.client_auth == "request") options.server.client_auth = ClientAuthPolicy::request;
    if (args.client_auth == "require") options.server.client_auth = ClientAuthPolicy::require;
    if (args.post_hs_auth) options.client.offer_post_handshake_auth = true;

    if (args.psk_mode == "ke" || args.psk_mode == "dhe") {
        PreSharedKey external;
        external.kind = PskKind::external;
        external.hash = suite_profile(suites.front())->hash;
        SeededRng psk_rng(args.seed ^ 0x9511);
        external.secret.resize(hash_alg(external.hash).output_length);
        psk_rng.fill(external.secret);
        external.identity = psk_rng.random_bytes(8);
        options.client.psks = {external};
        options.client.psk_modes = {args.psk_mode == "ke" ? psk_mode::psk_ke
                                                          : psk_mode::psk_dhe_ke};
        options.server.external_psks = {external};
    }
    options.server.ticket_count = args.tickets;
    if (args.resume && options.server.ticket_count == 0) options.server.ticket_count = 1;

    if (!args.flip.empty()) {
        auto parts = split_list(args.flip);
        std::string spec = args.flip;
        std::replace(spec.begin(), spec.end(), ':', ' ');
        std::istringstream is(spec);
        std::string dir;
        std::size_t record = 0, offset = 0;
        if (!(is >> dir >> record >> offset) || (dir != "c2s" && dir != "s2c")) {
            throw std::runtime_error("--flip expects DIR:RECORD:BYTE with DIR c2s|s2c");
        }
        options.faults.bit_flips.push_back(
            {dir == "c2s" ? Sender::client : Sender::server, record, offset});
    }

    if (!args.ticket_store_file.empty()) {
        // tickets must outlive one process: pin the sealing key across runs
        options.server.ticket_key =
            to_secure(hash(HashKind::sha256, from_hex("7469636b65742d73746f7265")));
        std::ifstream probe(args.ticket_store_file);
        if (probe.good()) {
            uint64_t now = 1750000000000ull;
            auto stored = ticket_store_load(read_file(args.ticket_store_file), now);
            if (!stored.empty()) options.client.psks = stored;
        }
    }

    std::ofstream keylog_stream;
    if (!args.keylog_file.empty()) {
        keylog_stream.open(args.keylog_file, std::ios::trunc);
        options.keylog = [&keylog_stream](const std::string& label, bytes_view client_random,
                                          bytes_view secret) {
            keylog_stream << label << " " << to_hex(client_random) << " " << to_hex(secret)
                          << "\n";
        };
    }
    std::vector<std::pair<std::string, bytes>> trace;
    if (!args.trace_file.empty()) options.trace_sink = &trace;

    ScenarioReport report = run_simulation(options);

    if (!args.trace_file.empty()) {
        std::ostringstream os;
        for (const auto& [dir, record] : trace) os << dir << " " << to_hex(record) << "\n";
        write_file(args.trace_file, os.str());
    }
    if (!args.ticket_store_file.empty() && !report.connections.empty() &&
        !report.connections.front().tickets.empty()) {
        write_file(args.ticket_store_file,
                   ticket_store_save(report.connections.front().tickets));
    }

    std::string text = report.to_text();
    if (args.report_file.empty()) {
        std::cout << text;
    } else {
        write_file(args.report_file, text);
    }

    for (const auto& connection : report.connections) {
        if (connection.outcome != "completed") {
            std::cerr << "aborted: "
                      << (connection.abort_alert
                              ? alert_name(connection.abort_alert->description)
                              : "unknown")
                      << " (" << connection.abort_side << ")\n";
            return 1;
        }
    }
    return 0;
}

// ---------------------------------------------------------------------------
// keyschedule

struct CheckpointHashes {
    bytes th_ch, th_sh, th_sfin, th_cfin;
};

CheckpointHashes transcript_checkpoints(HashKind hash, const bytes& transcript) {
    CheckpointHashes cp;
    bytes empty = tls13::hash(hash, {});
    cp.th_ch = cp.th_sh = cp.th_sfin = cp.th_cfin = empty;
    if (transcript.empty()) return cp;

    bytes running;
    std::size_t finished_seen = 0;
    bool ch_set = false, sh_set = false;
    ByteReader r(transcript);
    while (r.remaining() >= 4) {
        auto kind = static_cast<HandshakeKind>(r.u8());
        std::size_t len = r.u24();
        bytes_view body = r.take(len);
        ByteWriter w;
        w.u8(static_cast<uint8_t>(kind));
        w.u24(static_cast<uint32_t>(len));
        w.raw(body);
        append(running, w.data());
        if (kind == HandshakeKind::client_hello && !ch_set) {
            cp.th_ch = tls13::hash(hash, running);
            ch_set = true;
        } else if (kind == HandshakeKind::server_hello && !sh_set) {
            cp.th_sh = tls13::hash(hash, running);
            sh_set = true;
        } else if (kind == HandshakeKind::finished) {
            ++finished_seen;
            if (finished_seen == 1) cp.th_sfin = tls13::hash(hash, running);
            if (finished_seen == 2) cp.th_cfin = tls13::hash(hash, running);
        }
    }
    return cp;
}

int run_keyschedule(const std::string& hash_name, const std::string& psk_hex,
                    const std::string& ecdhe_hex, const std::string& transcript_file) {
    auto hk = hash_kind_by_name(hash_name);
    if (!hk.has_value()) {
        std::cerr << "unknown hash " << hash_name << "\n";
        return 2;
    }
    std::optional<bytes> psk;
    if (!psk_hex.empty()) psk = from_hex(psk_hex);
    std::optional<bytes> ecdhe;
    if (!ecdhe_hex.empty()) ecdhe = from_hex(ecdhe_hex);
    bytes transcript;
    if (!transcript_file.empty()) {
        std::string raw = read_file(transcript_file);
        transcript.assign(raw.begin(), raw.end());
    }
    CheckpointHashes cp = transcript_checkpoints(*hk, transcript);

    auto put = [](const std::string& name, bytes_view value) {
        std::cout << name << ": " << to_hex(value) << "\n";
    };

    KeySchedule ks(*hk);
    ks.derive_early(psk ? std::optional<bytes_view>(*psk) : std::nullopt);
    put("early_secret", ks.current_secret());
    put("ext_binder_key", ks.binder_key(PskKind::external));
    put("res_binder_key", ks.binder_key(PskKind::resumption));
    put("client_early_traffic_secret", ks.client_early_traffic_secret(cp.th_ch).secret);
    put("early_exporter_master_secret", ks.early_exporter_master_secret(cp.th_ch));

    ks.into_handshake(ecdhe ? std::optional<bytes_view>(*ecdhe) : std::nullopt);
    put("handshake_secret", ks.current_secret());
    auto [c_hs, s_hs] = ks.handshake_traffic_secrets(cp.th_sh);
    put("client_handshake_traffic_secret", c_hs.secret);
    put("server_handshake_traffic_secret", s_hs.secret);

    ks.into_master();
    put("master_secret", ks.current_secret());
    auto [c_ap, s_ap] = ks.application_traffic_secrets(cp.th_sfin);
    put("client_application_traffic_secret_0", c_ap.secret);
    put("server_application_traffic_secret_0", s_ap.secret);
    auto [exporter, resumption] = ks.exporter_and_resumption_masters(cp.th_sfin, cp.th_cfin);
    put("exporter_master_secret", exporter);
    put("resumption_master_secret", resumption);
    put("client_finished_key", finished_key(c_hs));
    put("server_finished_key", finished_key(s_hs));

    const AeadDescriptor& aead = aead_descriptor(
        *hk == HashKind::sha256 ? AeadKind::aes_128_gcm : AeadKind::aes_256_gcm);
    auto keys = [&](const char* name, const TrafficSecret& secret) {
        TrafficKeys tk = make_traffic_keys(secret, aead);
        put(std::string(name) + "_key", tk.key);
        put(std::string(name) + "_iv", tk.iv);
    };
    keys("client_handshake", c_hs);
    keys("server_handshake", s_hs);
    keys("client_application", c_ap);
    keys("server_application", s_ap);
    return 0;
}

// ---------------------------------------------------------------------------
// decode

struct DecoderDirection {
    std::string name;
    std::vector<DirectionState> candidates;
};

const char* content_name(ContentType t) {
    switch (t) {
        case ContentType::handshake: return "handshake";
        case ContentType::alert: return "alert";
        case ContentType::application_data: return "application_data";
        case ContentType::change_cipher_spec: return "change_cipher_spec";
    }
    return "unknown";
}

std::string describe_handshake_payload(bytes_view payload, std::size_t finished_len) {
    std::string out;
    std::size_t offset = 0;
    while (offset + 4 <= payload.size()) {
        bytes_view rest = payload.subspan(offset);
        std::size_t len = static_cast<std::size_t>(rest[1]) << 16 |
                          static_cast<std::size_t>(rest[2]) << 8 | rest[3];
        if (rest.size() < 4 + len) break;
        try {
            auto decoded = decode_handshake(rest, finished_len);
            out += std::string(out.empty() ? "" : ",") + handshake_kind_name(decoded.msg.kind);
            offset += decoded.consumed;
        } catch (const std::exception&) {
            out += std::string(out.empty() ? "" : ",") + "undecodable";
            break;
        }
    }
    if (offset < payload.size()) out += out.empty() ? "fragment" : ",fragment";
    return out;
}

int run_decode(const std::string& hex_input, const std::string& file_input,
               const std::string& keys_file) {
    // gather (direction, record bytes) pairs
    std::vector<std::pair<std::string, bytes>> records;
    auto push_stream = [&](const std::string& dir, const bytes& stream) {
        bytes_view rest = stream;
        while (auto view = next_record(rest)) {
            records.emplace_back(dir, to_bytes(rest.first(view->consumed)));
            rest = rest.subspan(view->consumed);
        }
        if (!rest.empty()) std::cerr << "warning: " << rest.size() << " trailing bytes\n";
    };

    if (!hex_input.empty()) {
        push_stream("in", from_hex(hex_input));
    } else {
        std::string raw = read_file(file_input);
        bool trace_format = raw.rfind("c2s ", 0) == 0 || raw.rfind("s2c ", 0) == 0;
        if (trace_format) {
            std::istringstream is(raw);
            std::string dir, hex;
            while (is >> dir >> hex) records.emplace_back(dir, from_hex(hex));
        } else {
            push_stream("in", bytes(raw.begin(), raw.end()));
        }
    }

    // negotiated suite from the first ServerHello, if present
    std::optional<SuiteProfile> profile;
    for (const auto& [dir, record] : records) {
        auto view = next_record(record);
        if (!view || view->type != ContentType::handshake) continue;
        try {
            auto decoded = decode_handshake(view->payload);
            if (decoded.msg.kind == HandshakeKind::server_hello) {
                profile = suite_profile(std::get<ServerHello>(decoded.msg.body).cipher_suite);
                break;
            }
        } catch (const std::exception&) {
        }
    }

    std::vector<DecoderDirection> directions;
    if (!keys_file.empty()) {
        if (!profile.has_value()) {
            profile = SuiteProfile{suite::aes_128_gcm_sha256, HashKind::sha256,
                                   AeadKind::aes_128_gcm};
        }
        const AeadDescriptor& aead = aead_descriptor(profile->aead);
        // one keylog line per connection per label; keep them all and let
        // trial decryption pick the right connection's state
        std::vector<std::pair<std::string, bytes>> secrets;
        std::istringstream is(read_file(keys_file));
        std::string label, random_hex, secret_hex;
        while (is >> label >> random_hex >> secret_hex) {
            secrets.emplace_back(label, from_hex(secret_hex));
        }

        auto add = [&](const std::string& dir, const char* wanted, Sender sender,
                       SecretPurpose purpose) {
            for (const auto& [label, secret] : secrets) {
                if (label != wanted) continue;
                TrafficSecret s;
                s.sender = sender;
                s.purpose = purpose;
                s.hash = profile->hash;
                s.secret.assign(secret.begin(), secret.end());
                bool placed = false;
                for (auto& d : directions) {
                    if (d.name == dir) {
                        d.candidates.emplace_back(std::move(s), aead);
                        placed = true;
                        break;
                    }
                }
                if (!placed) {
                    directions.push_back({dir, {}});
                    directions.back().candidates.emplace_back(std::move(s), aead);
                }
            }
        };
        for (const std::string dir : {"c2s", "in"}) {
            add(dir, "CLIENT_HANDSHAKE_TRAFFIC_SECRET", Sender::client,
                SecretPurpose::handshake);
            add(dir, "CLIENT_TRAFFIC_SECRET_0", Sender::client, SecretPurpose::application);
        }
        for (const std::string dir : {"s2c", "in"}) {
            add(dir, "SERVER_HANDSHAKE_TRAFFIC_SECRET", Sender::server,
                SecretPurpose::handshake);
            add(dir, "SERVER_TRAFFIC_SECRET_0", Sender::server, SecretPurpose::application);
        }
    }

    std::size_t undecryptable = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& [dir, record] = records[i];
        auto view = next_record(record);
        if (!view.has_value()) {
            std::cout << "record " << i << " " << dir << " malformed\n";
            continue;
        }
        std::cout << "record " << i << " " << dir << " " << content_name(view->type)
                  << " len=" << view->payload.size();
        std::size_t finished_len = profile ? hash_alg(profile->hash).output_length : 0;
        if (view->type == ContentType::handshake) {
            std::cout << " messages=" << describe_handshake_payload(view->payload, finished_len);
        } else if (view->type == ContentType::alert && view->payload.size() == 2) {
            std::cout << " alert=" << alert_name(static_cast<AlertDescription>(view->payload[1]));
        } else if (view->type == ContentType::application_data && !directions.empty()) {
            bool done = false;
            for (auto& d : directions) {
                if (d.name != dir) continue;
                for (std::size_t c = 0; c < d.candidates.size() && !done; ++c) {
                    try {
                        auto inner = d.candidates[c].unprotect(*view);
                        std::cout << " inner=" << content_name(inner.content_type)
                                  << " len=" << inner.content.size();
                        if (inner.content_type == ContentType::handshake) {
                            std::cout << " messages="
                                      << describe_handshake_payload(inner.content, finished_len);
                            // a KeyUpdate rotates this sender's application keys
                            if (inner.content.size() >= 4 &&
                                inner.content[0] ==
                                    static_cast<uint8_t>(HandshakeKind::key_update)) {
                                const auto& secret = d.candidates[c].secret();
                                if (secret.purpose == SecretPurpose::application) {
                                    d.candidates.emplace_back(update_traffic_secret(secret),
                                                              d.candidates[c].aead());
                                }
                            }
                        } else if (inner.content_type == ContentType::alert &&
                                   inner.content.size() == 2) {
                            std::cout << " alert="
                                      << alert_name(
                                             static_cast<AlertDescription>(inner.content[1]));
                        }
                        done = true;
                    } catch (const std::exception&) {
                        // try the next candidate state
                    }
                }
                break;
            }
            if (!done) {
                std::cout << " undecryptable";
                ++undecryptable;
            }
        }
        std::cout << "\n";
    }
    return undecryptable == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"TLS 1.3 engine harness: scripted loopback handshakes, key-schedule dumps, "
                 "record decoding"};
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "run a scripted loopback handshake");
    simulate->add_option("--suites", sim.suites, "comma list of cipher suites (names or hex)");
    simulate->add_option("--groups", sim.groups, "comma list of key-exchange groups");
    simulate->add_option("--psk-mode", sim.psk_mode, "none|ke|dhe (external PSK)")
        ->check(CLI::IsMember({"none", "ke", "dhe"}));
    simulate->add_option("--client-auth", sim.client_auth, "off|request|require")
        ->check(CLI::IsMember({"off", "request", "require"}));
    simulate->add_flag("--force-hrr", sim.force_hrr, "force a HelloRetryRequest round");
    simulate->add_option("--tickets", sim.tickets, "NewSessionTicket count");
    simulate->add_option("--key-update", sim.key_update, "c|s|both")
        ->check(CLI::IsMember({"none", "c", "s", "both"}));
    simulate->add_flag("--resume", sim.resume, "resume a second connection from a ticket");
    simulate->add_flag("--post-hs-auth", sim.post_hs_auth, "post-handshake client auth");
    simulate->add_option("--seed", sim.seed, "deterministic seed");
    simulate->add_option("--keylog", sim.keylog_file, "NSS key log output file");
    simulate->add_option("--report", sim.report_file, "report output file (default stdout)");
    simulate->add_option("--trace", sim.trace_file, "raw record trace output file");
    simulate->add_option("--ticket-store", sim.ticket_store_file,
                         "ticket store file (loaded before, saved after)");
    simulate->add_option("--echo-bytes", sim.echo_bytes, "application data echo size");
    simulate->add_flag("--threads", sim.threaded, "run the engines on two handoff threads");
    simulate->add_option("--flip", sim.flip, "bit-flip fault DIR:RECORD:BYTE (e.g. s2c:1:7)");

    std::string ks_hash = "sha256", ks_psk, ks_ecdhe, ks_transcript;
    auto* keyschedule = app.add_subcommand("keyschedule", "dump the full key-derivation chain");
    keyschedule->add_option("--hash", ks_hash, "sha256|sha384")
        ->check(CLI::IsMember({"sha256", "sha384"}));
    keyschedule->add_option("--psk", ks_psk, "pre-shared key, hex");
    keyschedule->add_option("--ecdhe", ks_ecdhe, "key-exchange shared secret, hex");
    keyschedule->add_option("--transcript", ks_transcript,
                            "file of framed handshake messages for checkpoint hashes");

    std::string dec_hex, dec_file, dec_keys;
    auto* decode = app.add_subcommand("decode", "parse records and messages");
    decode->add_option("--hex", dec_hex, "hex record stream");
    decode->add_option("--file", dec_file, "record trace file or raw binary");
    decode->add_option("--keys", dec_keys, "NSS key log file for unprotecting records");

    CLI11_PARSE(app, argc, argv);

    try {
        if (simulate->parsed()) return run_simulate(sim);
        if (keyschedule->parsed()) return run_keyschedule(ks_hash, ks_psk, ks_ecdhe, ks_transcript);
        if (decode->parsed()) {
            if (dec_hex.empty() && dec_file.empty()) {
                std::cerr << "decode needs --hex or --file\n";
                return 2;
            }
            return run_decode(dec_hex, dec_file, dec_keys);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
