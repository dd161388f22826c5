#pragma once

#include <cstdint>
#include <string_view>

namespace ncore {

// CRC-32C (Castagnoli polynomial 0x1EDC6F41), as used for journal entry
// checksums. crc32c("123456789") == 0xE3069283.
uint32_t crc32c(std::string_view data, uint32_t seed = 0);

}  // namespace ncore
