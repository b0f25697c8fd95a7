#include "tls13/harness.hpp"

#include <condition_variable>
#include <functional>
#include <mutex>
#include <sstream>
#include <thread>

namespace tls13 {

namespace {

// One direction of the loopback pipe, with the fault stage applied at record
// granularity (every EmitRecord event is exactly one record).
class Pipe {
  public:
    Pipe(Sender from, const FaultScript& faults,
         std::vector<std::pair<std::string, bytes>>* trace_sink)
        : from_(from), faults_(faults), trace_sink_(trace_sink) {}

    void push_record(bytes record) {
        if (dead_) return;
        for (const auto& inj : faults_.injections) {
            if (inj.from == from_ && inj.before_record_index == index_) {
                deliver(inj.record);
            }
        }
        for (const auto& flip : faults_.bit_flips) {
            if (flip.from == from_ && flip.record_index == index_ &&
                flip.byte_offset < record.size()) {
                record[flip.byte_offset] ^= 0x01;
            }
        }
        for (const auto& trunc : faults_.truncations) {
            if (trunc.from == from_ && trunc.record_index == index_) {
                record.resize(std::min(record.size(), trunc.keep_bytes));
                deliver(record);
                dead_ = true;  // nothing further flows this way
                ++index_;
                return;
            }
        }
        bool swap = false;
        for (const auto& s : faults_.swaps) {
            if (s.from == from_ && s.record_index == index_) swap = true;
        }
        ++index_;
        if (swap && !held_.has_value()) {
            held_ = std::move(record);
            return;
        }
        deliver(record);
        if (held_.has_value()) {
            deliver(*held_);
            held_.reset();
        }
    }

    void flush() {
        if (held_.has_value() && !dead_) {
            deliver(*held_);
            held_.reset();
        }
    }

    bytes drain() {
        flush();
        return std::exchange(pending_, {});
    }

    bool has_pending() const {
        return !pending_.empty() || (held_.has_value() && !dead_);
    }

  private:
    Sender from_;
    const FaultScript& faults_;
    std::vector<std::pair<std::string, bytes>>* trace_sink_;
    bytes pending_;
    std::optional<bytes> held_;
    std::size_t index_ = 0;
    bool dead_ = false;

    void deliver(const bytes& record) {
        if (trace_sink_ != nullptr) {
            trace_sink_->emplace_back(from_ == Sender::client ? "c2s" : "s2c", record);
        }
        append(pending_, record);
    }
};

// Runs engine calls inline or on a dedicated worker thread. The threaded
// variant keeps the lock-step schedule: each call is handed off and awaited,
// so results are identical to the inline runner.
class EngineRunner {
  public:
    explicit EngineRunner(bool threaded) : threaded_(threaded) {
        if (threaded_) worker_ = std::thread([this] { loop(); });
    }

    ~EngineRunner() {
        if (threaded_) {
            {
                std::lock_guard lock(mutex_);
                stop_ = true;
            }
            cv_.notify_all();
            worker_.join();
        }
    }

    Events run(std::function<Events()> fn) {
        if (!threaded_) return fn();
        std::unique_lock lock(mutex_);
        task_ = std::move(fn);
        cv_.notify_all();
        cv_.wait(lock, [this] { return !task_.has_value(); });
        if (error_) std::rethrow_exception(std::exchange(error_, nullptr));
        return std::exchange(result_, {});
    }

  private:
    bool threaded_;
    std::thread worker_;
    std::mutex mutex_;
    std::condition_variable cv_;
    std::optional<std::function<Events()>> task_;
    Events result_;
    std::exception_ptr error_;
    bool stop_ = false;

    void loop() {
        std::unique_lock lock(mutex_);
        while (true) {
            cv_.wait(lock, [this] { return stop_ || task_.has_value(); });
            if (stop_) return;
            try {
                result_ = (*task_)();
            } catch (...) {
                error_ = std::current_exception();
            }
            task_.reset();
            cv_.notify_all();
        }
    }
};

struct EndpointState {
    std::string name;
    Pipe* outbound;
    ConnectionReport* report;
    bytes received_app_data;
    bool complete = false;
};

void consume_events(Events events, EndpointState& state, Sender side) {
    for (auto& event : events) {
        if (auto* rec = std::get_if<EmitRecord>(&event)) {
            if (auto view = next_record(rec->record)) {
                state.report->records.push_back(
                    {side, view->type, view->payload.size()});
            }
            state.outbound->push_record(std::move(rec->record));
        } else if (auto* ticket = std::get_if<TicketIssued>(&event)) {
            if (side == Sender::client) state.report->tickets.push_back(std::move(ticket->psk));
        } else if (auto* data = std::get_if<AppData>(&event)) {
            append(state.received_app_data, data->data);
        } else if (std::get_if<HandshakeComplete>(&event) != nullptr) {
            state.complete = true;
        } else if (auto* aborted = std::get_if<Aborted>(&event)) {
            if (state.report->outcome.empty()) {
                state.report->outcome = "aborted";
                state.report->abort_alert = aborted->alert;
                state.report->abort_side = state.name;
                state.report->abort_reason = aborted->reason;
            }
        }
    }
}

std::string state_dump(const ClientEngine& client, const ServerEngine& server) {
    std::ostringstream os;
    os << "loopback deadlock: client{connected=" << client.connected()
       << " aborted=" << client.aborted() << "} server{connected=" << server.connected()
       << " aborted=" << server.aborted() << "}";
    return os.str();
}

}  // namespace

ConnectionReport run_loopback(const ScenarioOptions& options) {
    ClientConfig client_config = options.client;
    ServerConfig server_config = options.server;
    if (options.seed.has_value()) {
        if (!client_config.rng) client_config.rng = std::make_shared<SeededRng>(*options.seed * 2 + 1);
        if (!server_config.rng) server_config.rng = std::make_shared<SeededRng>(*options.seed * 2 + 2);
        if (!client_config.clock) client_config.clock = [] { return 1750000000000ull; };
        if (!server_config.clock) server_config.clock = [] { return 1750000000000ull; };
    }
    if (options.keylog && !client_config.keylog) client_config.keylog = options.keylog;

    ConnectionReport report;
    ClientEngine client(std::move(client_config));
    ServerEngine server(std::move(server_config));
    EngineRunner client_runner(options.threaded);
    EngineRunner server_runner(options.threaded);

    Pipe c2s(Sender::client, options.faults, options.trace_sink);
    Pipe s2c(Sender::server, options.faults, options.trace_sink);
    EndpointState client_state{"client", &c2s, &report, {}, false};
    EndpointState server_state{"server", &s2c, &report, {}, false};

    auto pump_until_quiet = [&] {
        while (true) {
            bool moved = false;
            bytes to_server = c2s.drain();
            if (!to_server.empty() && !server.aborted()) {
                consume_events(server_runner.run([&] { return server.on_bytes(to_server); }),
                               server_state, Sender::server);
                moved = true;
            }
            bytes to_client = s2c.drain();
            if (!to_client.empty() && !client.aborted()) {
                consume_events(client_runner.run([&] { return client.on_bytes(to_client); }),
                               client_state, Sender::client);
                moved = true;
            }
            if (!moved) return;
        }
    };

    consume_events(client_runner.run([&] { return client.start(); }), client_state,
                   Sender::client);
    pump_until_quiet();

    bool handshake_done = client.connected() && server.connected();
    if (!handshake_done) {
        if (!client.aborted() && !server.aborted()) {
            throw HarnessError(state_dump(client, server));
        }
        if (report.outcome.empty()) report.outcome = "aborted";
    } else {
        report.outcome = "completed";
        report.negotiation = client.negotiation();

        // scripted post-handshake actions
        if (options.post_hs_auth && !client.aborted() && !server.aborted()) {
            consume_events(server_runner.run([&] { return server.request_client_auth(); }),
                           server_state, Sender::server);
            pump_until_quiet();
            report.post_hs_auth_ok = server.negotiation().client_authenticated &&
                                     !client.aborted() && !server.aborted();
            report.negotiation = server.negotiation();
        }

        if (options.key_update != KeyUpdateActor::none && !client.aborted() &&
            !server.aborted()) {
            bool request = options.key_update_request_peer;
            if (options.key_update == KeyUpdateActor::client ||
                options.key_update == KeyUpdateActor::both) {
                consume_events(
                    client_runner.run([&] { return client.initiate_key_update(request); }),
                    client_state, Sender::client);
                pump_until_quiet();
            }
            if (options.key_update == KeyUpdateActor::server ||
                options.key_update == KeyUpdateActor::both) {
                consume_events(
                    server_runner.run([&] { return server.initiate_key_update(request); }),
                    server_state, Sender::server);
                pump_until_quiet();
            }
            report.key_update_ok = !client.aborted() && !server.aborted() &&
                                   client.write_generation() >= 1 &&
                                   server.write_generation() >= 1;
        }

        if (options.app_echo_bytes > 0 && !client.aborted() && !server.aborted()) {
            bytes payload(options.app_echo_bytes);
            for (std::size_t i = 0; i < payload.size(); ++i) {
                payload[i] = static_cast<uint8_t>(i * 31 + (i >> 8));
            }
            consume_events(client_runner.run([&] { return client.send_app_data(payload); }),
                           client_state, Sender::client);
            pump_until_quiet();
            if (server_state.received_app_data == payload) {
                consume_events(server_runner.run(
                                   [&] { return server.send_app_data(server_state.received_app_data); }),
                               server_state, Sender::server);
                pump_until_quiet();
            }
            report.echo_bytes = client_state.received_app_data.size();
            report.echo_ok = client_state.received_app_data == payload;
        }

        if (options.orderly_close && !client.aborted() && !server.aborted()) {
            // half close: the client stops writing, the server may still send
            consume_events(client_runner.run([&] { return client.close(); }), client_state,
                           Sender::client);
            pump_until_quiet();
            bytes probe = {0xA5, 0x5A, 0x01};
            std::size_t before = client_state.received_app_data.size();
            consume_events(server_runner.run([&] { return server.send_app_data(probe); }),
                           server_state, Sender::server);
            pump_until_quiet();
            report.half_close_ok =
                server.read_closed() && !server.aborted() && !client.aborted() &&
                client_state.received_app_data.size() == before + probe.size();
            consume_events(server_runner.run([&] { return server.close(); }), server_state,
                           Sender::server);
            pump_until_quiet();
        }
        if (report.outcome == "completed" && (client.aborted() || server.aborted())) {
            // a scripted step blew up after completion; surface it
            if (report.outcome.empty()) report.outcome = "aborted";
        }
    }

    report.client_checkpoints = client.checkpoints();
    report.server_checkpoints = server.checkpoints();
    report.client_secrets = client.secret_trace();
    report.server_secrets = server.secret_trace();
    if (report.outcome.empty()) report.outcome = "aborted";
    return report;
}

ScenarioReport run_simulation(const SimulationOptions& options) {
    ScenarioReport report;
    SimulationOptions first = options;
    if (first.resume && first.server.ticket_key.empty()) {
        // both connections must share the ticket key
        SeededRng key_rng(options.seed.value_or(0) ^ 0x7461636Bu);
        first.server.ticket_key.resize(32);
        key_rng.fill(first.server.ticket_key);
        if (first.server.ticket_count == 0) first.server.ticket_count = 1;
    }
    report.connections.push_back(run_loopback(first));

    if (options.resume) {
        const auto& tickets = report.connections.front().tickets;
        if (report.connections.front().outcome != "completed" || tickets.empty()) {
            throw HarnessError("resumption requested but connection 1 issued no tickets");
        }
        SimulationOptions second = first;
        second.client.psks = tickets;
        second.client.rng.reset();
        second.server.rng.reset();
        if (second.seed.has_value()) {
            second.client.rng = std::make_shared<SeededRng>(*second.seed * 2 + 101);
            second.server.rng = std::make_shared<SeededRng>(*second.seed * 2 + 102);
            uint64_t later = 1750000000000ull + 60000;
            second.client.clock = [later] { return later; };
            second.server.clock = [later] { return later; };
        }
        report.connections.push_back(run_loopback(second));
    }
    return report;
}

// ---------------------------------------------------------------------------

namespace {

const char* psk_mode_name(const std::optional<uint8_t>& mode) {
    if (!mode.has_value()) return "none";
    return *mode == psk_mode::psk_ke ? "psk_ke" : "psk_dhe_ke";
}

const char* content_type_name(ContentType t) {
    switch (t) {
        case ContentType::handshake: return "handshake";
        case ContentType::alert: return "alert";
        case ContentType::application_data: return "application_data";
        case ContentType::change_cipher_spec: return "change_cipher_spec";
    }
    return "unknown";
}

}  // namespace

std::string ScenarioReport::to_text() const {
    std::ostringstream os;
    for (std::size_t c = 0; c < connections.size(); ++c) {
        const ConnectionReport& r = connections[c];
        os << "connection: " << (c + 1) << "\n";
        os << "outcome: " << r.outcome << "\n";
        if (r.abort_alert.has_value()) {
            os << "abort_alert: " << alert_name(r.abort_alert->description) << "\n";
            os << "abort_side: " << r.abort_side << "\n";
            os << "abort_reason: " << r.abort_reason << "\n";
        }
        if (r.outcome == "completed") {
            os << "negotiated_version: 0x0304\n";
            os << "negotiated_suite: " << suite::name(r.negotiation.cipher_suite) << "\n";
            os << "negotiated_group: "
               << (r.negotiation.group ? group::name(*r.negotiation.group) : "none") << "\n";
            os << "psk_mode: " << psk_mode_name(r.negotiation.psk_mode) << "\n";
            os << "resumed: " << (r.negotiation.resumed ? "true" : "false") << "\n";
            os << "client_authenticated: "
               << (r.negotiation.client_authenticated ? "true" : "false") << "\n";
        }
        for (const auto& [name, hex] : r.client_checkpoints) {
            os << "checkpoint client " << name << ": " << hex << "\n";
        }
        for (const auto& [name, hex] : r.server_checkpoints) {
            os << "checkpoint server " << name << ": " << hex << "\n";
        }
        for (const auto& [name, hex] : r.client_secrets) {
            os << "secret client " << name << ": " << hex << "\n";
        }
        for (const auto& [name, hex] : r.server_secrets) {
            os << "secret server " << name << ": " << hex << "\n";
        }
        for (std::size_t i = 0; i < r.records.size(); ++i) {
            const auto& rec = r.records[i];
            os << "record " << i << ": " << (rec.from == Sender::client ? "c2s" : "s2c") << " "
               << content_type_name(rec.type) << " " << rec.length << "\n";
        }
        for (std::size_t i = 0; i < r.tickets.size(); ++i) {
            const auto& t = r.tickets[i];
            os << "ticket " << i << ": identity " << to_hex(t.identity) << " lifetime "
               << t.lifetime_seconds << " age_add " << t.ticket_age_add << "\n";
        }
        if (r.echo_bytes > 0 || r.echo_ok) {
            os << "echo_bytes: " << r.echo_bytes << "\n";
            os << "echo_ok: " << (r.echo_ok ? "true" : "false") << "\n";
        }
        os << "key_update_ok: " << (r.key_update_ok ? "true" : "false") << "\n";
        os << "post_hs_auth_ok: " << (r.post_hs_auth_ok ? "true" : "false") << "\n";
        os << "half_close_ok: " << (r.half_close_ok ? "true" : "false") << "\n";
    }
    return os.str();
}

std::string ticket_store_save(const std::vector<PreSharedKey>& tickets) {
    std::ostringstream os;
    for (const auto& t : tickets) {
        os << to_hex(t.identity) << "\t" << to_hex(t.secret) << "\t"
           << hash_alg(t.hash).name << "\t" << t.ticket_age_add << "\t" << t.lifetime_seconds
           << "\t" << t.issued_unix_ms << "\n";
    }
    return os.str();
}

std::vector<PreSharedKey> ticket_store_load(const std::string& text, uint64_t now_ms) {
    std::vector<PreSharedKey> tickets;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string identity_hex, secret_hex, hash_name;
        uint64_t age_add = 0, lifetime = 0, issued = 0;
        if (!(ls >> identity_hex >> secret_hex >> hash_name >> age_add >> lifetime >> issued)) {
            throw DecodeError("malformed ticket store line");
        }
        auto hk = hash_kind_by_name(hash_name);
        if (!hk.has_value()) throw DecodeError("unknown hash in ticket store");
        uint64_t usable_s = std::min<uint64_t>(lifetime, max_ticket_lifetime);
        if (issued + usable_s * 1000 <= now_ms) continue;  // expired entries are skipped
        PreSharedKey psk;
        psk.identity = from_hex(identity_hex);
        bytes secret = from_hex(secret_hex);
        psk.secret.assign(secret.begin(), secret.end());
        psk.kind = PskKind::resumption;
        psk.hash = *hk;
        psk.ticket_age_add = static_cast<uint32_t>(age_add);
        psk.lifetime_seconds = static_cast<uint32_t>(lifetime);
        psk.issued_unix_ms = issued;
        tickets.push_back(std::move(psk));
    }
    return tickets;
}

}  // namespace tls13
