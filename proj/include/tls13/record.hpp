#pragma once

#include <optional>
#include <vector>

#include "tls13/bytes.hpp"
#include "tls13/crypto.hpp"
#include "tls13/key_schedule.hpp"
#include "tls13/wire.hpp"

namespace tls13 {

inline constexpr std::size_t record_header_size = 5;
inline constexpr std::size_t max_plaintext_fragment = 1u << 14;
inline constexpr std::size_t max_ciphertext_fragment = (1u << 14) + 256;

struct RecordView {
    ContentType type;
    uint16_t legacy_version;
    bytes_view payload;
    std::size_t consumed;  // header + payload
};

// Pulls one complete record off the front of buffer; nullopt when more bytes
// are needed. No length policing here beyond the u16 field itself.
std::optional<RecordView> next_record(bytes_view buffer);

bytes encode_record(ContentType type, uint16_t legacy_version, bytes_view payload);

// Splits payload into <= 2^14-byte fragments, one record each; empty payloads
// produce no records.
std::vector<bytes> fragment_payload(ContentType type, uint16_t legacy_version,
                                    bytes_view payload);

// sequence left-padded to iv length, XORed into the write IV
bytes per_record_nonce(uint64_t sequence, bytes_view write_iv);

// One direction's AEAD keys plus its 64-bit record sequence number. The
// sequence starts at 0, advances by one per protected or unprotected record,
// and resets whenever the keys change.
class DirectionState {
  public:
    DirectionState(TrafficSecret secret, const AeadDescriptor& aead);

    uint64_t sequence() const { return sequence_; }
    const TrafficSecret& secret() const { return secret_; }
    const AeadDescriptor& aead() const { return *aead_; }
    const TrafficKeys& keys() const { return keys_; }

    // Full TLSCiphertext record: 0x17 header (also the AAD) plus sealed
    // content || type || 0x00*pad.
    bytes protect(bytes_view content, ContentType content_type, std::size_t pad = 0);

    struct Unprotected {
        bytes content;
        ContentType content_type;
    };

    // Throws ProtocolError: record_overflow on oversized input (before any
    // decryption), bad_record_mac on AEAD failure (sequence not advanced),
    // unexpected_message on an all-zero inner plaintext.
    Unprotected unprotect(const RecordView& record);

    void install(TrafficSecret secret);  // rekey; sequence resets to 0

  private:
    TrafficSecret secret_;
    const AeadDescriptor* aead_;
    TrafficKeys keys_;
    uint64_t sequence_ = 0;
};

}  // namespace tls13
