#include "qss/adversary.hpp"

#include <algorithm>
#include <stdexcept>

namespace qss {

void AttackConfig::validate() const {
    if (!(attack_fraction >= 0.0 && attack_fraction <= 1.0)) {
        throw std::invalid_argument("attack_fraction must lie in [0, 1]");
    }
    if (!attacked_modes.empty() && eve_bases.empty()) {
        throw std::invalid_argument("eve_bases must be nonempty when modes are attacked");
    }
}

std::vector<Party> AttackConfig::ordered_modes() const {
    std::vector<Party> modes = attacked_modes;
    std::sort(modes.begin(), modes.end());
    modes.erase(std::unique(modes.begin(), modes.end()), modes.end());
    return modes;
}

AttackConfig intercept_resend_on(Party mode, std::vector<double> eve_bases,
                                 double attack_fraction) {
    AttackConfig c;
    c.attacked_modes = {mode};
    c.eve_bases = std::move(eve_bases);
    c.attack_fraction = attack_fraction;
    c.validate();
    return c;
}

PureState apply_intercept_resend(const PureState& state, const AttackConfig& config, Rng& rng) {
    config.validate();
    if (!config.active() || !bernoulli(rng, config.attack_fraction)) return state;

    PureState current = state;
    for (Party mode : config.ordered_modes()) {
        const double phi = config.eve_bases[uniform_index(rng, config.eve_bases.size())];
        const double u = uniform01(rng);
        auto plus = collapse_after_single_mode_measurement(current, mode, phi, +1);
        if (plus.state && u < plus.probability) {
            current = *plus.state;
            continue;
        }
        auto minus = collapse_after_single_mode_measurement(current, mode, phi, -1);
        if (!minus.state) {
            // Only reachable when P(+) rounds to 1 and the draw lands above it.
            current = *plus.state;
            continue;
        }
        current = *minus.state;
    }
    return current;
}

std::vector<AttackBranch> enumerate_attack_branches(const PureState& state,
                                                    const AttackConfig& config) {
    config.validate();
    std::vector<AttackBranch> branches{{1.0, state}};
    if (config.attacked_modes.empty()) return branches;

    const double basis_weight = 1.0 / static_cast<double>(config.eve_bases.size());
    for (Party mode : config.ordered_modes()) {
        std::vector<AttackBranch> next;
        next.reserve(branches.size() * config.eve_bases.size() * 2);
        for (const auto& br : branches) {
            for (double phi : config.eve_bases) {
                for (int sign : {+1, -1}) {
                    auto c = collapse_after_single_mode_measurement(br.state, mode, phi, sign);
                    if (!c.state) continue;
                    next.push_back({br.weight * basis_weight * c.probability, *c.state});
                }
            }
        }
        branches = std::move(next);
    }
    return branches;
}

double expected_qber_under_attack(const AttackConfig& config,
                                  std::span<const double> protocol_bases,
                                  const NoiseModel& noise, const PureState& state) {
    config.validate();
    noise.validate();
    if (protocol_bases.empty()) {
        throw std::invalid_argument("expected_qber_under_attack: no protocol bases");
    }
    const auto branches = config.active() ? enumerate_attack_branches(state, config)
                                          : std::vector<AttackBranch>{};
    const double f = config.active() ? config.attack_fraction : 0.0;

    double total = 0.0;
    for (double phi : protocol_bases) {
        const Settings s = settings_from_phases(phi, phi, phi, phi);
        const double clean = outcome_distribution(state, s, noise).odd_parity_mass();
        double attacked = 0.0;
        for (const auto& br : branches) {
            attacked += br.weight * outcome_distribution(br.state, s, noise).odd_parity_mass();
        }
        total += (1.0 - f) * clean + f * attacked;
    }
    return total / static_cast<double>(protocol_bases.size());
}

}  // namespace qss
