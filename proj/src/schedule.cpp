#include "qss/schedule.hpp"

#include <numbers>

namespace qss {

std::string_view basis_mode_name(BasisMode mode) noexcept {
    return mode == BasisMode::qber ? "QBER_MODE" : "BELL_MODE";
}

BasisSchedule BasisSchedule::qber() {
    BasisSchedule s;
    s.mode = BasisMode::qber;
    s.key_phases = {0.0, std::numbers::pi / 2.0};
    s.override_phases = s.key_phases;
    return s;
}

BasisSchedule BasisSchedule::bell() {
    BasisSchedule s;
    s.mode = BasisMode::bell;
    s.key_phases = {std::numbers::pi / 4.0, -std::numbers::pi / 4.0};
    s.override_phases = {0.0, std::numbers::pi / 2.0};
    return s;
}

bool BasisSchedule::is_override(Party party, std::uint64_t window) const noexcept {
    return mode == BasisMode::bell && party == kOverrideParty && override_period > 0 &&
           window % override_period == 0;
}

const std::array<double, 2>& BasisSchedule::phases_for(Party party,
                                                       std::uint64_t window) const noexcept {
    return is_override(party, window) ? override_phases : key_phases;
}

BellSetting BasisSchedule::bell_setting() const noexcept {
    BellSetting s;
    for (Party p : kAllParties) {
        s.phases[index_of(p)] = p == kOverrideParty ? override_phases : key_phases;
    }
    return s;
}

}  // namespace qss
