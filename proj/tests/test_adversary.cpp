#include <doctest.h>

#include <cmath>
#include <numbers>

#include "qss/adversary.hpp"
#include "qss/source.hpp"

using namespace qss;
using std::numbers::pi;

namespace {
const std::array<double, 2> kBb84{0.0, pi / 2.0};
}

TEST_CASE("attack config validation") {
    AttackConfig c;
    c.attack_fraction = 1.5;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c.attack_fraction = 0.5;
    c.attacked_modes = {Party::bob};
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c.eve_bases = {0.0};
    CHECK_NOTHROW(c.validate());
    c.attacked_modes = {Party::david, Party::alice, Party::david};
    CHECK(c.ordered_modes() == std::vector<Party>{Party::alice, Party::david});
}

TEST_CASE("zero attack fraction leaves the state untouched") {
    const PureState psi = make_psi4_minus();
    auto cfg = intercept_resend_on(Party::bob, {0.0, pi / 2}, 0.0);
    Rng rng(1);
    for (int i = 0; i < 10; ++i) {
        const auto out = apply_intercept_resend(psi, cfg, rng);
        for (std::size_t b = 0; b < kNumPatterns; ++b) CHECK(out[b] == psi[b]);
    }
    CHECK(expected_qber_under_attack(cfg, kBb84, NoiseModel{1.0}) == doctest::Approx(0.0));
    CHECK(expected_qber_under_attack(cfg, kBb84, NoiseModel{0.9}) == doctest::Approx(0.05));
}

TEST_CASE("full intercept-resend on one mode") {
    const auto cfg = intercept_resend_on(Party::bob, {0.0, pi / 2});
    const double q = expected_qber_under_attack(cfg, kBb84, NoiseModel{1.0});
    CHECK(q > 0.0);
    CHECK(q < 0.5);
    // Wrong-basis half of Eve's guesses randomizes the parity.
    CHECK(q == doctest::Approx(0.25).epsilon(1e-12));

    SUBCASE("branch weights sum to one") {
        double total = 0.0;
        for (const auto& br : enumerate_attack_branches(make_psi4_minus(), cfg)) total += br.weight;
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("Eve in the parties' basis preserves the parity law") {
        for (double phi : kBb84) {
            const auto same = intercept_resend_on(Party::bob, {phi});
            const std::array<double, 1> bases{phi};
            CHECK(expected_qber_under_attack(same, bases, NoiseModel{1.0}) < 1e-12);
        }
    }
    SUBCASE("single-party marginals stay uniform") {
        for (double phi : kBb84) {
            const Settings s = settings_from_phases(phi, phi, phi, phi);
            OutcomeDistribution mix;
            for (const auto& br : enumerate_attack_branches(make_psi4_minus(), cfg)) {
                const auto d = outcome_distribution(br.state, s);
                for (std::size_t b = 0; b < kNumPatterns; ++b) mix.probs[b] += br.weight * d.probs[b];
            }
            for (Party p : kAllParties) {
                CHECK(std::abs(mix.marginal(p)[0] - 0.5) < 1e-12);
            }
        }
    }
    SUBCASE("Monte Carlo agrees with enumeration") {
        SessionSpec spec;
        spec.attack = cfg;
        spec.source.four_photon_rate = 5.0;  // nearly every window registers
        const auto recs = run_session(300'000, spec, RngStreams(31337));
        double n = 0, errors = 0;
        for (const auto& r : recs) {
            if (!r.detected() || !r.all_bases_equal()) continue;
            ++n;
            errors += pattern_parity(*r.outcome);
        }
        CHECK(n > 30'000);
        const double sigma = std::sqrt(q * (1 - q) / n);
        CHECK(std::abs(errors / n - q) < 3 * sigma);
    }
}

TEST_CASE("expected QBER is nondecreasing in the attack fraction") {
    for (Party mode : kAllParties) {
        double prev = -1.0;
        for (int k = 0; k <= 10; ++k) {
            const auto cfg = intercept_resend_on(mode, {0.0, pi / 2}, k / 10.0);
            const double q = expected_qber_under_attack(cfg, kBb84, NoiseModel{0.95});
            CHECK(q >= prev - 1e-15);
            prev = q;
        }
    }
}

TEST_CASE("attacking several modes composes in mode order") {
    AttackConfig cfg;
    cfg.attacked_modes = {Party::david, Party::bob};
    cfg.eve_bases = {0.0, pi / 2};
    cfg.attack_fraction = 1.0;
    const double q = expected_qber_under_attack(cfg, kBb84, NoiseModel{1.0});
    CHECK(q > 0.0);
    CHECK(q <= 0.5);
    double total = 0.0;
    const auto branches = enumerate_attack_branches(make_psi4_minus(), cfg);
    for (const auto& br : branches) total += br.weight;
    CHECK(total == doctest::Approx(1.0));

    Rng r1(5), r2(5);
    const auto s1 = apply_intercept_resend(make_psi4_minus(), cfg, r1);
    const auto s2 = apply_intercept_resend(make_psi4_minus(), cfg, r2);
    for (std::size_t b = 0; b < kNumPatterns; ++b) CHECK(s1[b] == s2[b]);
}
