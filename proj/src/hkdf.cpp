#include "tls13/hkdf.hpp"

namespace tls13 {

secure_bytes hkdf_extract(HashKind hash, std::optional<bytes_view> salt, bytes_view ikm) {
    secure_bytes zeros;
    bytes_view key;
    if (salt.has_value()) {
        key = *salt;
    } else {
        zeros.assign(hash_alg(hash).output_length, 0);
        key = zeros;
    }
    return hmac(hash, key, ikm);
}

secure_bytes hkdf_expand(HashKind hash, bytes_view prk, bytes_view info,
                         std::size_t out_length) {
    std::size_t digest_len = hash_alg(hash).output_length;
    if (out_length == 0) throw EncodeError("hkdf_expand: zero output length");
    if (out_length > 255 * digest_len) {
        throw EncodeError("hkdf_expand: output exhausts the counter byte");
    }
    secure_bytes out;
    out.reserve(((out_length + digest_len - 1) / digest_len) * digest_len);
    secure_bytes block;
    uint8_t counter = 1;
    while (out.size() < out_length) {
        secure_bytes msg(block.begin(), block.end());
        msg.insert(msg.end(), info.begin(), info.end());
        msg.push_back(counter++);
        block = hmac(hash, prk, msg);
        out.insert(out.end(), block.begin(), block.end());
    }
    out.resize(out_length);
    return out;
}

bytes hkdf_label_info(std::string_view label, bytes_view context, std::size_t out_length) {
    std::string full = "tls13 ";
    full += label;
    if (full.size() > 255) throw EncodeError("hkdf label too long");
    if (context.size() > 255) throw EncodeError("hkdf context too long");
    ByteWriter w;
    w.u16(static_cast<uint16_t>(out_length));
    w.vector(bytes_view(reinterpret_cast<const uint8_t*>(full.data()), full.size()), 7, 255);
    w.vector(context, 0, 255);
    return w.take();
}

secure_bytes hkdf_expand_label(HashKind hash, bytes_view secret, std::string_view label,
                               bytes_view context, std::size_t out_length) {
    return hkdf_expand(hash, secret, hkdf_label_info(label, context, out_length), out_length);
}

secure_bytes derive_secret(HashKind hash, bytes_view secret, std::string_view label,
                           bytes_view transcript_hash) {
    return hkdf_expand_label(hash, secret, label, transcript_hash,
                             hash_alg(hash).output_length);
}

}  // namespace tls13
