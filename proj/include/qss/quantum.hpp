#pragma once

// Exact state-vector model of the four-photon polarization state, the
// phase analyzers each party uses, and the derived correlation statistics.
//
// Basis index convention: a four-bit pattern (b_a b_b b_c b_d) is stored at
// index (b_a << 3) | (b_b << 2) | (b_c << 1) | b_d. For amplitudes bit 0 is H
// and bit 1 is V; for outcome distributions bit 0 is the transmitted port
// (analyzer eigenvalue +1) and bit 1 the reflected port (eigenvalue -1).

#include <array>
#include <complex>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

#include "qss/party.hpp"

namespace qss {

using Complex = std::complex<double>;

inline constexpr std::size_t kNumPatterns = 16;

constexpr std::size_t pattern_index(unsigned a, unsigned b, unsigned c, unsigned d) noexcept {
    return (a << 3U) | (b << 2U) | (c << 1U) | d;
}

/// Bit of `pattern` belonging to party/mode `p`.
constexpr unsigned pattern_bit(std::size_t pattern, Party p) noexcept {
    return static_cast<unsigned>(pattern >> (3U - index_of(p))) & 1U;
}

constexpr unsigned pattern_parity(std::size_t pattern) noexcept {
    return static_cast<unsigned>((pattern ^ (pattern >> 1U) ^ (pattern >> 2U) ^ (pattern >> 3U)) & 1U);
}

/// Parses "HHVV"-style labels (H = 0, V = 1).
std::size_t pattern_from_label(std::string_view hv);
std::string pattern_label(std::size_t pattern);

/// Sixteen amplitudes in the H/V product basis.
class PureState {
public:
    using Amplitudes = std::array<Complex, kNumPatterns>;

    PureState() = default;
    explicit PureState(const Amplitudes& amplitudes) : amp_(amplitudes) {}

    const Complex& operator[](std::size_t pattern) const { return amp_[pattern]; }
    const Amplitudes& amplitudes() const noexcept { return amp_; }

    /// Sum of squared magnitudes.
    double norm_squared() const noexcept;

    bool is_normalized(double tol = 1e-9) const noexcept;

private:
    Amplitudes amp_{};
};

/// The four-photon resource state
///   (2|HHVV> - |HVHV> - |HVVH> - |VHHV> - |VHVH> + 2|VVHH>) / (2 sqrt 3).
PureState make_psi4_minus();

/// One analyzer eigenstate as an (H, V) amplitude pair.
struct SinglePhoton {
    Complex h;
    Complex v;
};

/// H/V components of (|R> + sign e^{i phi} |L>) / sqrt 2 with
/// |R> = (|H> + i|V>)/sqrt 2 and |L> = (|H> - i|V>)/sqrt 2.
/// `sign` is +1 (transmitted, bit 0) or -1 (reflected, bit 1).
SinglePhoton analyzer_eigenstate(double phi, int sign);

/// Analyzer phase of one party.
struct AnalyzerSetting {
    double phi = 0.0;
};

using Settings = std::array<AnalyzerSetting, kNumParties>;

Settings settings_from_phases(double phi_a, double phi_b, double phi_c, double phi_d) noexcept;

/// White-noise admixture: observed = V * ideal + (1 - V) * uniform.
struct NoiseModel {
    double visibility = 1.0;

    /// Throws std::invalid_argument when visibility lies outside [0, 1].
    void validate() const;
};

struct OutcomeDistribution {
    std::array<double, kNumPatterns> probs{};

    double total() const noexcept;
    /// Total probability of the patterns with odd parity.
    double odd_parity_mass() const noexcept;
    /// Distribution of one party's bit: {P(0), P(1)}.
    std::array<double, 2> marginal(Party p) const noexcept;
};

OutcomeDistribution uniform_distribution() noexcept;

/// Born-rule distribution of the four analyzer outcomes, mixed with white
/// noise. Throws std::invalid_argument if the state's squared norm deviates
/// from 1 by more than 1e-9.
OutcomeDistribution outcome_distribution(const PureState& state, const Settings& settings,
                                         const NoiseModel& noise = {});

/// Closed-form correlation of the resource state:
/// (2/3) cos(a + b - c - d) + (1/3) cos(a - b) cos(c - d).
double correlation_analytic(double phi_a, double phi_b, double phi_c, double phi_d) noexcept;

/// Expectation of the product of the four +-1 outcomes.
double correlation_from_distribution(const OutcomeDistribution& dist) noexcept;

/// Two phases per party for the four-party Bell quantity.
struct BellSetting {
    std::array<std::array<double, 2>, kNumParties> phases{};
};

/// The setting that maximally separates the resource state from local models:
/// Bob uses {0, pi/2}, the others {pi/4, -pi/4}.
BellSetting standard_bell_setting() noexcept;

using CorrelationFn = std::function<double(double, double, double, double)>;

/// S = 1/16 sum_{s in {+-1}^4} | sum_{k,l,m,n in {1,2}} s_a^k s_b^l s_c^m s_d^n E(...) |.
double bell_S(const BellSetting& setting, const CorrelationFn& correlation);

/// Same sum over a table of correlations indexed by the 4-bit setting
/// combination (k-1, l-1, m-1, n-1) packed like an outcome pattern.
double bell_S_from_table(const std::array<double, kNumPatterns>& correlations) noexcept;

/// Partial derivatives of bell_S_from_table with respect to each table entry.
std::array<double, kNumPatterns> bell_S_gradient(
    const std::array<double, kNumPatterns>& correlations) noexcept;

/// (1 - v_bar) / 2. Throws std::invalid_argument outside [0, 1].
double qber_from_visibility(double v_bar);

struct CollapseResult {
    double probability = 0.0;
    /// Empty when the outcome probability is below 1e-15.
    std::optional<PureState> state;
};

/// Projects `mode` onto the analyzer eigenstate |sign, phi> and renormalizes.
CollapseResult collapse_after_single_mode_measurement(const PureState& state, Party mode,
                                                      double phi, int outcome_sign);

}  // namespace qss
