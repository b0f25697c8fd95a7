#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "tls13/bytes.hpp"
#include "tls13/crypto.hpp"

namespace tls13 {

// Running hash over framed handshake messages (headers included, record
// headers excluded), kept buffered so checkpoints can re-hash.
class Transcript {
  public:
    explicit Transcript(HashKind hash) : hash_(hash) {}

    HashKind hash_kind() const { return hash_; }

    // framed_message must be a complete type || u24-length || body encoding.
    void append(bytes_view framed_message);

    bytes hash() const;

    // Replaces the initial ClientHello M1 by the synthetic message
    // 0xFE || 0x0000 || Hash.length || Hash(M1). Once per connection.
    void substitute_hrr();

    bool hrr_substituted() const { return substituted_; }
    std::size_t message_count() const { return messages_.size(); }
    const std::vector<bytes>& messages() const { return messages_; }

    static bytes synthetic_message(HashKind hash, bytes_view first_client_hello);

  private:
    HashKind hash_;
    std::vector<bytes> messages_;
    bool substituted_ = false;
};

// Hash of Truncate(CH): the framed ClientHello minus its trailing
// binders-list bytes, with the header's length field left as transmitted.
// `prior` carries (CH1, HRR) for the retry case, hashed un-substituted.
bytes truncated_transcript_hash(HashKind hash, bytes_view client_hello,
                                std::size_t binders_list_length,
                                const std::optional<std::pair<bytes, bytes>>& prior = std::nullopt);

}  // namespace tls13
