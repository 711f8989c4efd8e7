#include "qss/bits.hpp"

#include <stdexcept>

namespace qss {

Bits xor_bits(std::span<const std::uint8_t> lhs, std::span<const std::uint8_t> rhs) {
    if (lhs.size() != rhs.size()) {
        throw std::invalid_argument("xor_bits: length mismatch");
    }
    Bits out(lhs.size());
    for (std::size_t i = 0; i < lhs.size(); ++i) out[i] = (lhs[i] ^ rhs[i]) & 1U;
    return out;
}

std::uint8_t parity(std::span<const std::uint8_t> bits) noexcept {
    std::uint8_t p = 0;
    for (auto b : bits) p ^= b;
    return p & 1U;
}

std::uint8_t parity_at(std::span<const std::uint8_t> bits,
                       std::span<const std::size_t> indices) {
    std::uint8_t p = 0;
    for (auto i : indices) p ^= bits[i];
    return p & 1U;
}

std::size_t hamming_distance(std::span<const std::uint8_t> lhs,
                             std::span<const std::uint8_t> rhs) {
    if (lhs.size() != rhs.size()) {
        throw std::invalid_argument("hamming_distance: length mismatch");
    }
    std::size_t d = 0;
    for (std::size_t i = 0; i < lhs.size(); ++i) d += (lhs[i] != rhs[i]);
    return d;
}

std::string to_bit_string(std::span<const std::uint8_t> bits) {
    std::string s;
    s.reserve(bits.size());
    for (auto b : bits) s.push_back(b ? '1' : '0');
    return s;
}

Bits from_bit_string(std::string_view text) {
    Bits out;
    out.reserve(text.size());
    for (char c : text) {
        if (c != '0' && c != '1') {
            throw std::invalid_argument("from_bit_string: non-binary character");
        }
        out.push_back(c == '1');
    }
    return out;
}

std::string to_hex(std::span<const std::uint8_t> bits) {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string hex;
    hex.reserve((bits.size() + 3) / 4);
    for (std::size_t i = 0; i < bits.size(); i += 4) {
        unsigned nibble = 0;
        for (std::size_t j = 0; j < 4; ++j) {
            nibble <<= 1U;
            if (i + j < bits.size()) nibble |= bits[i + j] & 1U;
        }
        hex.push_back(kDigits[nibble]);
    }
    return hex;
}

Bits from_hex(std::string_view hex, std::size_t n_bits) {
    if (hex.size() != (n_bits + 3) / 4) {
        throw std::invalid_argument("from_hex: digit count does not match bit length");
    }
    Bits out;
    out.reserve(hex.size() * 4);
    for (char c : hex) {
        unsigned v = 0;
        if (c >= '0' && c <= '9') {
            v = static_cast<unsigned>(c - '0');
        } else if (c >= 'a' && c <= 'f') {
            v = static_cast<unsigned>(c - 'a' + 10);
        } else if (c >= 'A' && c <= 'F') {
            v = static_cast<unsigned>(c - 'A' + 10);
        } else {
            throw std::invalid_argument("from_hex: invalid hex digit");
        }
        for (int j = 3; j >= 0; --j) out.push_back((v >> static_cast<unsigned>(j)) & 1U);
    }
    for (std::size_t i = n_bits; i < out.size(); ++i) {
        if (out[i] != 0) throw std::invalid_argument("from_hex: nonzero padding bits");
    }
    out.resize(n_bits);
    return out;
}

}  // namespace qss
