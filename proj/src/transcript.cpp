#include "tls13/transcript.hpp"

#include <stdexcept>

namespace tls13 {

void Transcript::append(bytes_view framed_message) {
    if (framed_message.size() < 4) throw DecodeError("transcript message missing header");
    messages_.push_back(to_bytes(framed_message));
}

bytes Transcript::hash() const {
    bytes all;
    for (const auto& m : messages_) tls13::append(all, m);
    return tls13::hash(hash_, all);
}

bytes Transcript::synthetic_message(HashKind hash, bytes_view first_client_hello) {
    bytes digest = tls13::hash(hash, first_client_hello);
    ByteWriter w;
    w.u8(0xFE);  // message_hash
    w.u24(static_cast<uint32_t>(digest.size()));
    w.raw(digest);
    return w.take();
}

void Transcript::substitute_hrr() {
    if (substituted_) {
        throw std::logic_error("HelloRetryRequest substitution already applied");
    }
    if (messages_.size() != 1) {
        throw std::logic_error("transcript must hold exactly the first ClientHello");
    }
    messages_[0] = synthetic_message(hash_, messages_[0]);
    substituted_ = true;
}

bytes truncated_transcript_hash(HashKind hash, bytes_view client_hello,
                                std::size_t binders_list_length,
                                const std::optional<std::pair<bytes, bytes>>& prior) {
    if (binders_list_length >= client_hello.size()) {
        throw EncodeError("binders list covers the whole message");
    }
    bytes all;
    if (prior.has_value()) {
        append(all, prior->first);
        append(all, prior->second);
    }
    append(all, client_hello.first(client_hello.size() - binders_list_length));
    return tls13::hash(hash, all);
}

}  // namespace tls13
