#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>

namespace qss {

/// The four participants. A party's index doubles as its spatial mode
/// (Alice holds mode a, Bob mode b, ...).
enum class Party : std::uint8_t { alice = 0, bob = 1, claire = 2, david = 3 };

inline constexpr std::size_t kNumParties = 4;

inline constexpr std::array<Party, kNumParties> kAllParties{Party::alice, Party::bob,
                                                           Party::claire, Party::david};

constexpr std::size_t index_of(Party p) noexcept { return static_cast<std::size_t>(p); }

constexpr Party party_at(std::size_t i) noexcept { return static_cast<Party>(i); }

std::string_view party_name(Party p) noexcept;

/// Single-letter mode label: 'a'..'d'.
char mode_label(Party p) noexcept;

/// Accepts "alice"/"Alice"/"a"/"A" and the like.
std::optional<Party> parse_party(std::string_view text) noexcept;

}  // namespace qss
