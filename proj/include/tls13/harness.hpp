#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tls13/engine.hpp"

namespace tls13 {

// Faults are scripted against per-direction record indices as the records
// cross the pipe (0-based, counted per sender).
struct FaultScript {
    struct BitFlip {
        Sender from;
        std::size_t record_index;
        std::size_t byte_offset;  // within the whole record, header included
    };
    struct Truncation {
        Sender from;
        std::size_t record_index;
        std::size_t keep_bytes;  // rest of the record and stream is dropped
    };
    struct Injection {
        Sender from;
        std::size_t before_record_index;
        bytes record;
    };
    struct Swap {
        Sender from;
        std::size_t record_index;  // delivered after its successor
    };

    std::vector<BitFlip> bit_flips;
    std::vector<Truncation> truncations;
    std::vector<Injection> injections;
    std::vector<Swap> swaps;

    bool empty() const {
        return bit_flips.empty() && truncations.empty() && injections.empty() && swaps.empty();
    }
};

struct RecordTraceEntry {
    Sender from;
    ContentType type;
    std::size_t length;  // payload length, header excluded
};

enum class KeyUpdateActor { none, client, server, both };

struct ScenarioOptions {
    ClientConfig client;
    ServerConfig server;
    std::optional<uint64_t> seed;  // seeds both engines deterministically
    std::size_t app_echo_bytes = 0;
    KeyUpdateActor key_update = KeyUpdateActor::none;
    bool key_update_request_peer = true;
    bool post_hs_auth = false;
    bool orderly_close = true;
    bool threaded = false;  // run the engines on two handoff threads
    FaultScript faults;
    std::vector<std::pair<std::string, bytes>>* trace_sink = nullptr;  // "c2s"/"s2c"
    KeylogCallback keylog;  // attached to the client engine
};

struct ConnectionReport {
    std::string outcome;  // "completed" or "aborted"
    std::optional<Alert> abort_alert;
    std::string abort_side;  // "client" or "server"
    std::string abort_reason;
    NegotiationResult negotiation;
    std::vector<std::pair<std::string, std::string>> client_checkpoints;
    std::vector<std::pair<std::string, std::string>> server_checkpoints;
    std::vector<std::pair<std::string, std::string>> client_secrets;
    std::vector<std::pair<std::string, std::string>> server_secrets;
    std::vector<RecordTraceEntry> records;
    std::vector<PreSharedKey> tickets;  // as stored by the client
    std::size_t echo_bytes = 0;
    bool echo_ok = false;
    bool key_update_ok = false;
    bool post_hs_auth_ok = false;
    bool half_close_ok = false;
};

struct ScenarioReport {
    std::vector<ConnectionReport> connections;
    std::string to_text() const;
};

struct HarnessError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Pumps one client and one server engine over an in-memory pipe until both
// sides settle, then walks the scripted post-handshake actions.
ConnectionReport run_loopback(const ScenarioOptions& options);

// run_loopback, then a second resumed connection when resume is set.
struct SimulationOptions : ScenarioOptions {
    bool resume = false;
};
ScenarioReport run_simulation(const SimulationOptions& options);

// ---------------------------------------------------------------------------
// Ticket persistence: one line per ticket,
// identity_hex TAB secret_hex TAB hash TAB age_add TAB lifetime TAB issued_ms

std::string ticket_store_save(const std::vector<PreSharedKey>& tickets);
// Entries past their lifetime (or past seven days) at `now_ms` are skipped.
std::vector<PreSharedKey> ticket_store_load(const std::string& text, uint64_t now_ms);

}  // namespace tls13
