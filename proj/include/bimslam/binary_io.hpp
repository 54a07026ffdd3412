#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>

namespace bimslam::binary {

inline void write_u32(std::ostream& os, std::uint32_t v) {
    const std::array<char, 4> b{static_cast<char>(v & 0xFFu), static_cast<char>((v >> 8) & 0xFFu),
                                static_cast<char>((v >> 16) & 0xFFu), static_cast<char>((v >> 24) & 0xFFu)};
    os.write(b.data(), 4);
}

inline void write_f32(std::ostream& os, float v) { write_u32(os, std::bit_cast<std::uint32_t>(v)); }

inline bool read_u32(std::istream& is, std::uint32_t& v) {
    std::array<unsigned char, 4> b{};
    if (!is.read(reinterpret_cast<char*>(b.data()), 4)) return false;
    v = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
        (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    return true;
}

inline bool read_f32(std::istream& is, float& v) {
    std::uint32_t u = 0;
    if (!read_u32(is, u)) return false;
    v = std::bit_cast<float>(u);
    return true;
}

}  // namespace bimslam::binary
