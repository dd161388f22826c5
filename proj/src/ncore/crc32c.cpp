#include "ncore/crc32c.hpp"

#include <array>

namespace ncore {

namespace {

std::array<uint32_t, 256> make_table() {
    std::array<uint32_t, 256> table{};
    for (uint32_t i = 0; i < 256; ++i) {
        uint32_t c = i;
        for (int k = 0; k < 8; ++k) c = (c & 1) ? (0x82F63B78u ^ (c >> 1)) : (c >> 1);
        table[i] = c;
    }
    return table;
}

}  // namespace

uint32_t crc32c(std::string_view data, uint32_t seed) {
    static const std::array<uint32_t, 256> table = make_table();
    uint32_t crc = seed ^ 0xFFFFFFFFu;
    for (char ch : data) {
        crc = table[(crc ^ static_cast<unsigned char>(ch)) & 0xff] ^ (crc >> 8);
    }
    return crc ^ 0xFFFFFFFFu;
}

}  // namespace ncore
