#include "tls13/bytes.hpp"

namespace tls13 {

std::string to_hex(bytes_view data) {
    static const char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(data.size() * 2);
    for (uint8_t b : data) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0x0F]);
    }
    return out;
}

namespace {
int hex_nibble(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}
}  // namespace

bytes from_hex(std::string_view hex) {
    if (hex.size() % 2 != 0) throw DecodeError("odd hex length");
    bytes out;
    out.reserve(hex.size() / 2);
    for (std::size_t i = 0; i < hex.size(); i += 2) {
        int hi = hex_nibble(hex[i]);
        int lo = hex_nibble(hex[i + 1]);
        if (hi < 0 || lo < 0) throw DecodeError("invalid hex digit");
        out.push_back(static_cast<uint8_t>(hi << 4 | lo));
    }
    return out;
}

bool ct_equal(bytes_view a, bytes_view b) {
    if (a.size() != b.size()) return false;
    uint8_t acc = 0;
    for (std::size_t i = 0; i < a.size(); ++i) acc |= a[i] ^ b[i];
    return acc == 0;
}

}  // namespace tls13
