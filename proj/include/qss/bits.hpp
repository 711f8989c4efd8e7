#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace qss {

/// Ordered bit string, one bit per element (values 0 or 1).
using Bits = std::vector<std::uint8_t>;

/// Element-wise XOR. Throws std::invalid_argument on length mismatch.
Bits xor_bits(std::span<const std::uint8_t> lhs, std::span<const std::uint8_t> rhs);

/// Parity (XOR) of all bits.
std::uint8_t parity(std::span<const std::uint8_t> bits) noexcept;

/// Parity of the bits selected by `indices`.
std::uint8_t parity_at(std::span<const std::uint8_t> bits,
                       std::span<const std::size_t> indices);

std::size_t hamming_distance(std::span<const std::uint8_t> lhs,
                             std::span<const std::uint8_t> rhs);

/// "0110..." rendering.
std::string to_bit_string(std::span<const std::uint8_t> bits);
Bits from_bit_string(std::string_view text);

/// Hex encoding, most significant bit first; the final nibble is zero padded.
/// Decoding needs the bit length to strip the padding.
std::string to_hex(std::span<const std::uint8_t> bits);
Bits from_hex(std::string_view hex, std::size_t n_bits);

}  // namespace qss
