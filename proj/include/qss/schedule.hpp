#pragma once

#include <array>
#include <cstdint>
#include <string_view>

#include "qss/party.hpp"
#include "qss/quantum.hpp"

namespace qss {

enum class BasisMode { qber, bell };

std::string_view basis_mode_name(BasisMode mode) noexcept;

/// Which two analyzer phases each party draws from on a given window.
///
/// QBER mode: every party uses {0, pi/2}. Bell mode: every party uses
/// {pi/4, -pi/4}, except that Bob switches to {0, pi/2} on windows whose
/// index is a multiple of `override_period`.
struct BasisSchedule {
    BasisMode mode = BasisMode::qber;
    std::array<double, 2> key_phases{};
    std::array<double, 2> override_phases{};
    std::uint64_t override_period = 5;

    static BasisSchedule qber();
    static BasisSchedule bell();

    /// True when `party` uses the override phases on `window`.
    bool is_override(Party party, std::uint64_t window) const noexcept;

    const std::array<double, 2>& phases_for(Party party, std::uint64_t window) const noexcept;

    /// Bell-check setting: override phases for Bob, key phases for the rest.
    BellSetting bell_setting() const noexcept;
};

inline constexpr Party kOverrideParty = Party::bob;

}  // namespace qss
