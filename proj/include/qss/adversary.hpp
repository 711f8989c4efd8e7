#pragma once

// Intercept-resend eavesdropping on the photon modes.

#include <span>
#include <vector>

#include "qss/party.hpp"
#include "qss/quantum.hpp"
#include "qss/rng.hpp"

namespace qss {

struct AttackConfig {
    /// Modes Eve intercepts. Measured in a->d order regardless of listing order.
    std::vector<Party> attacked_modes;
    /// Analyzer phases Eve picks from uniformly.
    std::vector<double> eve_bases;
    /// Probability that a given round is attacked.
    double attack_fraction = 0.0;

    bool active() const noexcept { return !attacked_modes.empty() && attack_fraction > 0.0; }

    /// Throws std::invalid_argument on a fraction outside [0, 1] or an empty
    /// basis set while modes are attacked.
    void validate() const;

    /// Attacked modes sorted a->d without duplicates.
    std::vector<Party> ordered_modes() const;
};

/// Full-time intercept-resend on one mode with the given bases.
AttackConfig intercept_resend_on(Party mode, std::vector<double> eve_bases,
                                 double attack_fraction = 1.0);

/// Possibly intercepts the round: with probability attack_fraction Eve
/// measures each attacked mode in a random basis and resends the eigenstate
/// she observed. Returns the state the parties then measure.
PureState apply_intercept_resend(const PureState& state, const AttackConfig& config, Rng& rng);

/// One branch of Eve's measurement record on an attacked round.
struct AttackBranch {
    double weight = 0.0;  ///< basis-choice probability times Born probability
    PureState state;
};

/// Every (basis, outcome) sequence Eve can produce on an attacked round,
/// with zero-probability branches dropped. Weights sum to 1.
std::vector<AttackBranch> enumerate_attack_branches(const PureState& state,
                                                    const AttackConfig& config);

/// Expected error fraction of sifted bits, where all four parties measure in
/// one phase drawn uniformly from `protocol_bases`. Exact enumeration.
double expected_qber_under_attack(const AttackConfig& config,
                                  std::span<const double> protocol_bases,
                                  const NoiseModel& noise,
                                  const PureState& state = make_psi4_minus());

}  // namespace qss
