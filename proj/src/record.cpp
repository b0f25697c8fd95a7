#include "tls13/record.hpp"

namespace tls13 {

std::optional<RecordView> next_record(bytes_view buffer) {
    if (buffer.size() < record_header_size) return std::nullopt;
    auto type = static_cast<ContentType>(buffer[0]);
    uint16_t version = static_cast<uint16_t>(buffer[1] << 8 | buffer[2]);
    std::size_t length = static_cast<std::size_t>(buffer[3] << 8 | buffer[4]);
    if (buffer.size() < record_header_size + length) return std::nullopt;
    return RecordView{type, version, buffer.subspan(record_header_size, length),
                      record_header_size + length};
}

bytes encode_record(ContentType type, uint16_t legacy_version, bytes_view payload) {
    if (payload.size() > 0xFFFF) throw EncodeError("record payload exceeds u16 length");
    ByteWriter w;
    w.u8(static_cast<uint8_t>(type));
    w.u16(legacy_version);
    w.u16(static_cast<uint16_t>(payload.size()));
    w.raw(payload);
    return w.take();
}

std::vector<bytes> fragment_payload(ContentType type, uint16_t legacy_version,
                                    bytes_view payload) {
    std::vector<bytes> records;
    for (std::size_t off = 0; off < payload.size(); off += max_plaintext_fragment) {
        std::size_t n = std::min(max_plaintext_fragment, payload.size() - off);
        records.push_back(encode_record(type, legacy_version, payload.subspan(off, n)));
    }
    return records;
}

bytes per_record_nonce(uint64_t sequence, bytes_view write_iv) {
    if (write_iv.size() < 8) throw EncodeError("write_iv shorter than sequence number");
    bytes nonce = to_bytes(write_iv);
    for (int i = 0; i < 8; ++i) {
        nonce[nonce.size() - 1 - i] ^= static_cast<uint8_t>(sequence >> (8 * i));
    }
    return nonce;
}

DirectionState::DirectionState(TrafficSecret secret, const AeadDescriptor& aead)
    : secret_(std::move(secret)), aead_(&aead), keys_(make_traffic_keys(secret_, aead)) {}

void DirectionState::install(TrafficSecret secret) {
    secret_ = std::move(secret);
    keys_ = make_traffic_keys(secret_, *aead_);
    sequence_ = 0;
}

bytes DirectionState::protect(bytes_view content, ContentType content_type, std::size_t pad) {
    bytes inner = to_bytes(content);
    inner.push_back(static_cast<uint8_t>(content_type));
    inner.insert(inner.end(), pad, 0x00);
    std::size_t ciphertext_len = inner.size() + aead_->tag_length;
    if (ciphertext_len > max_ciphertext_fragment) {
        throw ProtocolError(AlertDescription::internal_error,
                            "protected record would exceed 2^14 + 256");
    }
    bytes aad;
    aad.push_back(static_cast<uint8_t>(ContentType::application_data));
    aad.push_back(0x03);
    aad.push_back(0x03);
    aad.push_back(static_cast<uint8_t>(ciphertext_len >> 8));
    aad.push_back(static_cast<uint8_t>(ciphertext_len));
    bytes nonce = per_record_nonce(sequence_, keys_.iv);
    bytes sealed = aead_seal(*aead_, keys_.key, nonce, aad, inner);
    ++sequence_;
    bytes record = aad;  // the AAD is exactly the record header
    append(record, sealed);
    return record;
}

DirectionState::Unprotected DirectionState::unprotect(const RecordView& record) {
    if (record.payload.size() > max_ciphertext_fragment) {
        throw ProtocolError(AlertDescription::record_overflow,
                            "ciphertext record exceeds 2^14 + 256");
    }
    bytes aad;
    aad.push_back(static_cast<uint8_t>(record.type));
    aad.push_back(static_cast<uint8_t>(record.legacy_version >> 8));
    aad.push_back(static_cast<uint8_t>(record.legacy_version));
    aad.push_back(static_cast<uint8_t>(record.payload.size() >> 8));
    aad.push_back(static_cast<uint8_t>(record.payload.size()));
    bytes nonce = per_record_nonce(sequence_, keys_.iv);
    auto inner = aead_open(*aead_, keys_.key, nonce, aad, record.payload);
    if (!inner.has_value()) {
        throw ProtocolError(AlertDescription::bad_record_mac, "record authentication failed");
    }
    // Padding strips from the end: the first nonzero byte is the content type.
    std::size_t end = inner->size();
    while (end > 0 && (*inner)[end - 1] == 0x00) --end;
    if (end == 0) {
        throw ProtocolError(AlertDescription::unexpected_message,
                            "inner plaintext carries no content type");
    }
    ++sequence_;
    auto content_type = static_cast<ContentType>((*inner)[end - 1]);
    inner->resize(end - 1);
    return {std::move(*inner), content_type};
}

}  // namespace tls13
