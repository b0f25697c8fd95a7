#pragma once

#include <cstdint>
#include <cstring>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tls13 {

using bytes = std::vector<uint8_t>;
using bytes_view = std::span<const uint8_t>;

// Allocator that wipes memory before releasing it. Secrets held in
// secure_bytes never reach the heap allocator in readable form.
template <typename T>
struct zeroizing_allocator {
    using value_type = T;

    zeroizing_allocator() = default;
    template <typename U>
    zeroizing_allocator(const zeroizing_allocator<U>&) noexcept {}

    T* allocate(std::size_t n) { return std::allocator<T>{}.allocate(n); }

    void deallocate(T* p, std::size_t n) noexcept {
        if (p != nullptr && n != 0) {
            volatile uint8_t* vp = reinterpret_cast<volatile uint8_t*>(p);
            for (std::size_t i = 0; i < n * sizeof(T); ++i) {
                vp[i] = 0;
            }
        }
        std::allocator<T>{}.deallocate(p, n);
    }

    bool operator==(const zeroizing_allocator&) const { return true; }
};

using secure_bytes = std::vector<uint8_t, zeroizing_allocator<uint8_t>>;

inline bytes to_bytes(bytes_view v) { return bytes(v.begin(), v.end()); }
inline secure_bytes to_secure(bytes_view v) { return secure_bytes(v.begin(), v.end()); }

inline bytes operator+(bytes lhs, bytes_view rhs) {
    lhs.insert(lhs.end(), rhs.begin(), rhs.end());
    return lhs;
}

inline void append(bytes& out, bytes_view v) { out.insert(out.end(), v.begin(), v.end()); }

std::string to_hex(bytes_view data);
bytes from_hex(std::string_view hex);

// Constant-time equality; length mismatch returns false without a data-dependent branch.
bool ct_equal(bytes_view a, bytes_view b);

struct EncodeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DecodeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Width of the length prefix for a variable-length vector with the given
// byte ceiling: 1 below 2^8, 2 below 2^16, 3 below 2^24.
inline std::size_t length_prefix_width(std::size_t ceiling) {
    if (ceiling < (1u << 8)) return 1;
    if (ceiling < (1u << 16)) return 2;
    if (ceiling < (1u << 24)) return 3;
    throw EncodeError("vector ceiling exceeds 2^24-1");
}

class ByteWriter {
  public:
    void u8(uint8_t v) { out_.push_back(v); }
    void u16(uint16_t v) {
        out_.push_back(static_cast<uint8_t>(v >> 8));
        out_.push_back(static_cast<uint8_t>(v));
    }
    void u24(uint32_t v) {
        if (v >= (1u << 24)) throw EncodeError("u24 overflow");
        out_.push_back(static_cast<uint8_t>(v >> 16));
        out_.push_back(static_cast<uint8_t>(v >> 8));
        out_.push_back(static_cast<uint8_t>(v));
    }
    void u32(uint32_t v) {
        u16(static_cast<uint16_t>(v >> 16));
        u16(static_cast<uint16_t>(v));
    }
    void u64(uint64_t v) {
        u32(static_cast<uint32_t>(v >> 32));
        u32(static_cast<uint32_t>(v));
    }
    void raw(bytes_view v) { append(out_, v); }

    void vector(bytes_view items, std::size_t floor, std::size_t ceiling) {
        if (items.size() < floor || items.size() > ceiling) {
            throw EncodeError("vector length outside [floor, ceiling]");
        }
        put_length(items.size(), length_prefix_width(ceiling));
        raw(items);
    }

    // Opens a length slot of the ceiling-determined width; the matching
    // close() backpatches the number of bytes written in between.
    std::size_t open_length(std::size_t ceiling) {
        std::size_t width = length_prefix_width(ceiling);
        std::size_t pos = out_.size();
        out_.insert(out_.end(), width, 0);
        pending_.push_back({pos, width, ceiling});
        return pos;
    }

    void close_length() {
        if (pending_.empty()) throw EncodeError("close_length without open_length");
        auto [pos, width, ceiling] = pending_.back();
        pending_.pop_back();
        std::size_t len = out_.size() - pos - width;
        if (len > ceiling) throw EncodeError("vector length exceeds ceiling");
        for (std::size_t i = 0; i < width; ++i) {
            out_[pos + i] = static_cast<uint8_t>(len >> (8 * (width - 1 - i)));
        }
    }

    const bytes& data() const { return out_; }
    bytes take() { return std::move(out_); }
    std::size_t size() const { return out_.size(); }

  private:
    struct Pending {
        std::size_t pos;
        std::size_t width;
        std::size_t ceiling;
    };
    bytes out_;
    std::vector<Pending> pending_;

    void put_length(std::size_t len, std::size_t width) {
        for (std::size_t i = 0; i < width; ++i) {
            out_.push_back(static_cast<uint8_t>(len >> (8 * (width - 1 - i))));
        }
    }
};

class ByteReader {
  public:
    explicit ByteReader(bytes_view data) : data_(data) {}

    std::size_t remaining() const { return data_.size() - pos_; }
    bool empty() const { return remaining() == 0; }
    std::size_t consumed() const { return pos_; }

    uint8_t u8() { return take(1)[0]; }
    uint16_t u16() {
        auto b = take(2);
        return static_cast<uint16_t>(b[0] << 8 | b[1]);
    }
    uint32_t u24() {
        auto b = take(3);
        return static_cast<uint32_t>(b[0]) << 16 | static_cast<uint32_t>(b[1]) << 8 | b[2];
    }
    uint32_t u32() {
        auto b = take(4);
        return static_cast<uint32_t>(b[0]) << 24 | static_cast<uint32_t>(b[1]) << 16 |
               static_cast<uint32_t>(b[2]) << 8 | b[3];
    }
    uint64_t u64() {
        uint64_t hi = u32();
        return hi << 32 | u32();
    }

    bytes_view take(std::size_t n) {
        if (n > remaining()) throw DecodeError("input truncated");
        bytes_view v = data_.subspan(pos_, n);
        pos_ += n;
        return v;
    }

    bytes_view vector(std::size_t floor, std::size_t ceiling) {
        std::size_t width = length_prefix_width(ceiling);
        std::size_t len = 0;
        for (auto b : take(width)) len = len << 8 | b;
        if (len < floor || len > ceiling) {
            throw DecodeError("vector length outside [floor, ceiling]");
        }
        return take(len);
    }

    // Strict framing: a declared body must be consumed exactly.
    void expect_end() const {
        if (!empty()) throw DecodeError("trailing bytes after declared body");
    }

  private:
    bytes_view data_;
    std::size_t pos_ = 0;
};

inline bytes encode_vector(bytes_view items, std::size_t floor, std::size_t ceiling) {
    ByteWriter w;
    w.vector(items, floor, ceiling);
    return w.take();
}

struct DecodedVector {
    bytes items;
    std::size_t consumed;
};

inline DecodedVector decode_vector(bytes_view input, std::size_t floor, std::size_t ceiling) {
    ByteReader r(input);
    bytes_view items = r.vector(floor, ceiling);
    return {to_bytes(items), r.consumed()};
}

}  // namespace tls13
