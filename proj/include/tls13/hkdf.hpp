#pragma once

#include <optional>
#include <string_view>

#include "tls13/bytes.hpp"
#include "tls13/crypto.hpp"

namespace tls13 {

// HMAC-based extract-and-expand (RFC 5869) with the TLS 1.3 label encoding.
// An absent salt is replaced by Hash.length zeros.

secure_bytes hkdf_extract(HashKind hash, std::optional<bytes_view> salt, bytes_view ikm);

secure_bytes hkdf_expand(HashKind hash, bytes_view prk, bytes_view info, std::size_t out_length);

// out_length || "tls13 " + label (length-prefixed) || context (length-prefixed)
bytes hkdf_label_info(std::string_view label, bytes_view context, std::size_t out_length);

secure_bytes hkdf_expand_label(HashKind hash, bytes_view secret, std::string_view label,
                               bytes_view context, std::size_t out_length);

// hkdf_expand_label with out_length = Hash.length and the transcript hash as
// context.
secure_bytes derive_secret(HashKind hash, bytes_view secret, std::string_view label,
                           bytes_view transcript_hash);

}  // namespace tls13
