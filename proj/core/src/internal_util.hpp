#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

namespace phalanx::detail {

// FNV-1a, used for provenance hashes. Not cryptographic; stable across
// platforms by construction.
struct Fnv1a {
    std::uint64_t h = 0xcbf29ce484222325ULL;

    void update_byte(std::uint8_t b) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    void update(std::string_view s) {
        for (unsigned char c : s) update_byte(c);
        update_byte(0xFF);  // field separator, keeps "ab","c" != "a","bc"
    }
    void update_u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) update_byte(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void update_double(double d) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", d);
        update(buf);
    }
};

inline double quantize(double x, int decimals) {
    double scale = std::pow(10.0, decimals);
    return std::round(x * scale) / scale;
}

inline std::string hex_u64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace phalanx::detail
