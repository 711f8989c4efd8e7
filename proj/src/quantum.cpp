#include "qss/quantum.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace qss {

namespace {

constexpr double kConstructionTol = 1e-12;
constexpr double kInputTol = 1e-9;
constexpr double kUnusableProbability = 1e-15;

void require_normalized(const PureState& state, const char* what) {
    if (!state.is_normalized(kInputTol)) {
        throw std::invalid_argument(std::string(what) + ": state is not normalized");
    }
}

// conj(<e_x(bit)|H>), conj(<e_x(bit)|V>) for each mode, i.e. the bra rows
// of the analyzer basis.
using BraTable = std::array<std::array<std::array<Complex, 2>, 2>, kNumParties>;

BraTable bra_table(const Settings& settings) {
    BraTable t{};
    for (std::size_t x = 0; x < kNumParties; ++x) {
        for (unsigned bit = 0; bit < 2; ++bit) {
            const auto e = analyzer_eigenstate(settings[x].phi, bit == 0 ? +1 : -1);
            t[x][bit] = {std::conj(e.h), std::conj(e.v)};
        }
    }
    return t;
}

}  // namespace

std::size_t pattern_from_label(std::string_view hv) {
    if (hv.size() != 4) throw std::invalid_argument("pattern label needs four characters");
    std::size_t p = 0;
    for (char c : hv) {
        p <<= 1U;
        if (c == 'V' || c == 'v' || c == '1') {
            p |= 1U;
        } else if (c != 'H' && c != 'h' && c != '0') {
            throw std::invalid_argument("pattern label must use H/V or 0/1");
        }
    }
    return p;
}

std::string pattern_label(std::size_t pattern) {
    std::string s(4, 'H');
    for (std::size_t x = 0; x < 4; ++x) {
        if (pattern_bit(pattern, party_at(x))) s[x] = 'V';
    }
    return s;
}

double PureState::norm_squared() const noexcept {
    double n = 0.0;
    for (const auto& a : amp_) n += std::norm(a);
    return n;
}

bool PureState::is_normalized(double tol) const noexcept {
    return std::abs(norm_squared() - 1.0) <= tol;
}

PureState make_psi4_minus() {
    const double s = 1.0 / (2.0 * std::sqrt(3.0));
    PureState::Amplitudes amp{};
    amp[pattern_from_label("HHVV")] = 2.0 * s;
    amp[pattern_from_label("HVHV")] = -s;
    amp[pattern_from_label("HVVH")] = -s;
    amp[pattern_from_label("VHHV")] = -s;
    amp[pattern_from_label("VHVH")] = -s;
    amp[pattern_from_label("VVHH")] = 2.0 * s;
    PureState state(amp);
    if (!state.is_normalized(kConstructionTol)) {
        throw std::logic_error("make_psi4_minus: construction lost normalization");
    }
    return state;
}

SinglePhoton analyzer_eigenstate(double phi, int sign) {
    if (sign != 1 && sign != -1) throw std::invalid_argument("analyzer_eigenstate: sign must be +-1");
    const Complex i{0.0, 1.0};
    const Complex e = std::polar(1.0, phi) * static_cast<double>(sign);
    return {(1.0 + e) / 2.0, i * (1.0 - e) / 2.0};
}

Settings settings_from_phases(double phi_a, double phi_b, double phi_c, double phi_d) noexcept {
    return {AnalyzerSetting{phi_a}, AnalyzerSetting{phi_b}, AnalyzerSetting{phi_c},
            AnalyzerSetting{phi_d}};
}

void NoiseModel::validate() const {
    if (!(visibility >= 0.0 && visibility <= 1.0)) {
        throw std::invalid_argument("visibility must lie in [0, 1]");
    }
}

double OutcomeDistribution::total() const noexcept {
    double t = 0.0;
    for (double p : probs) t += p;
    return t;
}

double OutcomeDistribution::odd_parity_mass() const noexcept {
    double t = 0.0;
    for (std::size_t b = 0; b < kNumPatterns; ++b) {
        if (pattern_parity(b)) t += probs[b];
    }
    return t;
}

std::array<double, 2> OutcomeDistribution::marginal(Party p) const noexcept {
    std::array<double, 2> m{0.0, 0.0};
    for (std::size_t b = 0; b < kNumPatterns; ++b) m[pattern_bit(b, p)] += probs[b];
    return m;
}

OutcomeDistribution uniform_distribution() noexcept {
    OutcomeDistribution d;
    d.probs.fill(1.0 / static_cast<double>(kNumPatterns));
    return d;
}

OutcomeDistribution outcome_distribution(const PureState& state, const Settings& settings,
                                         const NoiseModel& noise) {
    require_normalized(state, "outcome_distribution");
    noise.validate();
    const BraTable bra = bra_table(settings);

    OutcomeDistribution dist;
    for (std::size_t out = 0; out < kNumPatterns; ++out) {
        Complex overlap{0.0, 0.0};
        for (std::size_t hv = 0; hv < kNumPatterns; ++hv) {
            if (state[hv] == Complex{0.0, 0.0}) continue;
            Complex w{1.0, 0.0};
            for (std::size_t x = 0; x < kNumParties; ++x) {
                const Party p = party_at(x);
                w *= bra[x][pattern_bit(out, p)][pattern_bit(hv, p)];
            }
            overlap += w * state[hv];
        }
        dist.probs[out] = std::norm(overlap);
    }

    const double v = noise.visibility;
    const double floor = (1.0 - v) / static_cast<double>(kNumPatterns);
    for (auto& p : dist.probs) p = v * p + floor;
    return dist;
}

double correlation_analytic(double phi_a, double phi_b, double phi_c, double phi_d) noexcept {
    return (2.0 / 3.0) * std::cos(phi_a + phi_b - phi_c - phi_d) +
           (1.0 / 3.0) * std::cos(phi_a - phi_b) * std::cos(phi_c - phi_d);
}

double correlation_from_distribution(const OutcomeDistribution& dist) noexcept {
    double e = 0.0;
    for (std::size_t b = 0; b < kNumPatterns; ++b) {
        e += pattern_parity(b) ? -dist.probs[b] : dist.probs[b];
    }
    return e;
}

BellSetting standard_bell_setting() noexcept {
    constexpr double q = std::numbers::pi / 4.0;
    BellSetting s;
    s.phases[index_of(Party::alice)] = {q, -q};
    s.phases[index_of(Party::bob)] = {0.0, std::numbers::pi / 2.0};
    s.phases[index_of(Party::claire)] = {q, -q};
    s.phases[index_of(Party::david)] = {q, -q};
    return s;
}

namespace {

// Weight s_a^k s_b^l s_c^m s_d^n of one setting combination for one sign
// vector. Setting label 0 means exponent 1 (the sign itself), label 1 means
// exponent 2 (always +1). Sign vector bit 1 means s_x = -1.
double sign_weight(std::size_t sign_vector, std::size_t combo) noexcept {
    double w = 1.0;
    for (std::size_t x = 0; x < kNumParties; ++x) {
        const Party p = party_at(x);
        if (pattern_bit(combo, p) == 0 && pattern_bit(sign_vector, p) == 1) w = -w;
    }
    return w;
}

}  // namespace

double bell_S_from_table(const std::array<double, kNumPatterns>& correlations) noexcept {
    double total = 0.0;
    for (std::size_t s = 0; s < kNumPatterns; ++s) {
        double inner = 0.0;
        for (std::size_t combo = 0; combo < kNumPatterns; ++combo) {
            inner += sign_weight(s, combo) * correlations[combo];
        }
        total += std::abs(inner);
    }
    return total / 16.0;
}

std::array<double, kNumPatterns> bell_S_gradient(
    const std::array<double, kNumPatterns>& correlations) noexcept {
    std::array<double, kNumPatterns> grad{};
    for (std::size_t s = 0; s < kNumPatterns; ++s) {
        double inner = 0.0;
        for (std::size_t combo = 0; combo < kNumPatterns; ++combo) {
            inner += sign_weight(s, combo) * correlations[combo];
        }
        const double sgn = inner > 0.0 ? 1.0 : (inner < 0.0 ? -1.0 : 0.0);
        for (std::size_t combo = 0; combo < kNumPatterns; ++combo) {
            grad[combo] += sgn * sign_weight(s, combo) / 16.0;
        }
    }
    return grad;
}

double bell_S(const BellSetting& setting, const CorrelationFn& correlation) {
    std::array<double, kNumPatterns> table{};
    for (std::size_t combo = 0; combo < kNumPatterns; ++combo) {
        std::array<double, kNumParties> phi{};
        for (std::size_t x = 0; x < kNumParties; ++x) {
            phi[x] = setting.phases[x][pattern_bit(combo, party_at(x))];
        }
        table[combo] = correlation(phi[0], phi[1], phi[2], phi[3]);
    }
    return bell_S_from_table(table);
}

double qber_from_visibility(double v_bar) {
    if (!(v_bar >= 0.0 && v_bar <= 1.0)) {
        throw std::invalid_argument("qber_from_visibility: visibility must lie in [0, 1]");
    }
    return (1.0 - v_bar) / 2.0;
}

CollapseResult collapse_after_single_mode_measurement(const PureState& state, Party mode,
                                                      double phi, int outcome_sign) {
    require_normalized(state, "collapse_after_single_mode_measurement");
    const SinglePhoton e = analyzer_eigenstate(phi, outcome_sign);
    const std::array<Complex, 2> ket{e.h, e.v};
    const std::array<Complex, 2> bra{std::conj(e.h), std::conj(e.v)};
    const std::size_t shift = 3U - index_of(mode);
    const std::size_t mask = std::size_t{1} << shift;

    PureState::Amplitudes out{};
    for (std::size_t rest = 0; rest < kNumPatterns; ++rest) {
        if (rest & mask) continue;
        // <e| applied to the measured mode, for fixed other modes.
        const Complex reduced = bra[0] * state[rest] + bra[1] * state[rest | mask];
        out[rest] = ket[0] * reduced;
        out[rest | mask] = ket[1] * reduced;
    }

    CollapseResult result;
    double prob = 0.0;
    for (const auto& a : out) prob += std::norm(a);
    result.probability = prob;
    if (prob < kUnusableProbability) return result;

    const double scale = 1.0 / std::sqrt(prob);
    for (auto& a : out) a *= scale;
    result.state = PureState(out);
    return result;
}

}  // namespace qss
