#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "qss/protocol.hpp"

using namespace qss;

namespace {

constexpr double kPi = std::numbers::pi;

Announcements one_round(std::uint64_t window, std::array<std::uint8_t, 4> bases) {
    Announcements a;
    for (std::size_t p = 0; p < kNumParties; ++p) a[p].push_back({0, window, bases[p]});
    return a;
}

ProtocolConfig qber_config(std::uint64_t seed, double visibility, std::size_t target) {
    ProtocolConfig c;
    c.seed = seed;
    c.session.noise.visibility = visibility;
    c.session.source.first_event_only = false;
    c.session.source.four_photon_rate = 2.0;
    c.target_sifted_bits = target;
    return c;
}

std::vector<BellObservation> sample_bell(const BellSetting& setting, double visibility,
                                         std::size_t per_combo, Rng& rng) {
    std::vector<BellObservation> obs;
    const auto state = make_psi4_minus();
    for (unsigned combo = 0; combo < kNumPatterns; ++combo) {
        BellObservation o;
        std::array<double, 4> phi{};
        for (std::size_t p = 0; p < kNumParties; ++p) {
            o.setting[p] = static_cast<std::uint8_t>((combo >> (3 - p)) & 1U);
            phi[p] = setting.phases[p][o.setting[p]];
        }
        const auto dist = outcome_distribution(state, settings_from_phases(phi[0], phi[1], phi[2], phi[3]),
                                               NoiseModel{visibility});
        for (std::size_t k = 0; k < per_combo; ++k) {
            double u = uniform01(rng);
            std::uint8_t b = 0;
            while (b + 1 < kNumPatterns && u >= dist.probs[b]) u -= dist.probs[b++];
            o.outcome = b;
            obs.push_back(o);
        }
    }
    return obs;
}

}  // namespace

TEST_CASE("sift keeps rounds with four equal bases") {
    const auto qber = BasisSchedule::qber();
    CHECK(sift(one_round(1, {0, 0, 0, 0}), qber).key_rounds.size() == 1);
    CHECK(sift(one_round(1, {1, 1, 1, 1}), qber).key_rounds.size() == 1);
    CHECK(sift(one_round(1, {0, 1, 0, 0}), qber).key_rounds.empty());
    CHECK(sift(one_round(0, {0, 0, 0, 0}), qber).bell_rounds.empty());
}

TEST_CASE("sift routes Bob override rounds to the Bell pool") {
    const auto bell = BasisSchedule::bell();
    const auto r = sift(one_round(5, {0, 0, 1, 0}), bell);
    CHECK(r.key_rounds.empty());
    CHECK(r.bell_rounds.size() == 1);
    const auto equal = sift(one_round(10, {1, 1, 1, 1}), bell);
    CHECK(equal.key_rounds.empty());
    CHECK(equal.bell_rounds.size() == 1);
    CHECK(sift(one_round(6, {1, 1, 1, 1}), bell).key_rounds.size() == 1);
}

TEST_CASE("sift rejects incomplete announcements") {
    auto a = one_round(1, {0, 0, 0, 0});
    a[2].clear();
    CHECK_THROWS_AS(sift(a, BasisSchedule::qber()), std::invalid_argument);
    auto b = one_round(1, {0, 0, 0, 0});
    b[3][0].round = 7;
    CHECK_THROWS_AS(sift(b, BasisSchedule::qber()), std::invalid_argument);
}

TEST_CASE("QBER sample of 200 from 2000 leaves 1800") {
    SiftedKey key;
    for (std::size_t i = 0; i < 2000; ++i) {
        key.rounds.push_back(3 * i);
        for (auto& b : key.bits) b.push_back(0);
    }
    Rng rng(7);
    Channel ch;
    const auto r = estimate_qber(key, Party::alice, 0.1, rng, ch);
    CHECK(r.report.sample_size == 200);
    CHECK(r.remaining.size() == 1800);
    CHECK(r.report.estimate == 0.0);
    CHECK(r.report.verdict == Verdict::proceed);
    CHECK(audit_outcome_hygiene(ch.transcript()).empty());
}

TEST_CASE("QBER check rejects bad fractions and empty keys") {
    SiftedKey key;
    Rng rng(1);
    Channel ch;
    CHECK_THROWS_AS(estimate_qber(key, Party::alice, 0.1, rng, ch), InsufficientStatistics);
    CHECK_THROWS_AS(choose_sample_positions(10, 0.0, rng), std::invalid_argument);
    CHECK_THROWS_AS(choose_sample_positions(10, 1.0, rng), std::invalid_argument);
    key.rounds = {0, 1, 2};
    for (auto& b : key.bits) b = {0, 0, 0};
    CHECK_THROWS_AS(estimate_qber(key, Party::alice, 0.1, rng, ch), InsufficientStatistics);
}

TEST_CASE("noiseless session estimates zero QBER and obeys the parity law") {
    const auto r = run_protocol(qber_config(11, 1.0, 2000));
    CHECK(r.sifted.size() == 2000);
    CHECK(r.key.size() == 1800);
    CHECK(r.check.estimate == 0.0);
    CHECK(r.status == SessionStatus::completed);
    CHECK(r.sifted.parity_errors(Party::alice) == 0);
    const auto xs = r.sifted.access_xor(Party::alice);
    for (std::size_t i = 0; i < r.sifted.size(); ++i) {
        CHECK(reconstruct_dealer_bit(r.sifted.of(Party::bob)[i], r.sifted.of(Party::claire)[i],
                                     r.sifted.of(Party::david)[i]) == xs[i]);
    }
}

TEST_CASE("revealed positions never appear in the key") {
    const auto r = run_protocol(qber_config(12, 0.9, 2000));
    std::vector<std::uint64_t> kept = r.key.rounds;
    std::vector<std::uint64_t> all = r.sifted.rounds;
    std::size_t removed = 0;
    for (auto x : all) removed += !std::binary_search(kept.begin(), kept.end(), x);
    CHECK(removed == r.check.sample_size);
    CHECK(kept.size() + removed == all.size());
}

TEST_CASE("V=0.92 QBER estimate lies within 3 sigma of the 4% to 5% band") {
    const auto r = run_protocol(qber_config(13, 0.92, 2000));
    const double sigma = std::sqrt(0.045 * 0.955 / 200.0);
    CHECK(r.check.sample_size == 200);
    CHECK(r.check.estimate >= 0.04 - 3 * sigma);
    CHECK(r.check.estimate <= 0.05 + 3 * sigma);
}

TEST_CASE("heavy noise aborts and the abort is broadcast") {
    const auto r = run_protocol(qber_config(14, 0.5, 2000));
    CHECK(r.status == SessionStatus::aborted);
    CHECK(r.check.verdict == Verdict::abort);
    CHECK(r.transcript.back().message.type == MessageType::abort);
}

TEST_CASE("any party can deal") {
    for (Party dealer : kAllParties) {
        auto c = qber_config(15, 1.0, 400);
        c.dealer = dealer;
        const auto r = run_protocol(c);
        CHECK(r.check.estimate == 0.0);
        CHECK(r.transcript.front().message.sender != dealer);
        CHECK(r.sifted.parity_errors(dealer) == 0);
    }
}

TEST_CASE("too few windows is insufficient statistics") {
    ProtocolConfig c;
    c.n_windows = 3;
    CHECK_THROWS_AS(run_protocol(c), InsufficientStatistics);
}

TEST_CASE("transcripts are identical for equal seeds") {
    const auto a = run_protocol(qber_config(21, 0.9, 300));
    const auto b = run_protocol(qber_config(21, 0.9, 300));
    std::ostringstream fa, fb;
    write_frames(fa, a.transcript);
    write_frames(fb, b.transcript);
    CHECK(fa.str() == fb.str());
    const auto c = run_protocol(qber_config(22, 0.9, 300));
    std::ostringstream fc;
    write_frames(fc, c.transcript);
    CHECK(fa.str() != fc.str());
}

TEST_CASE("sift ratio is one eighth in QBER mode") {
    ProtocolConfig c;
    c.seed = 31;
    c.n_windows = 400000;
    const auto r = run_protocol(c);
    const double n = static_cast<double>(r.detected);
    const double p = static_cast<double>(r.sifted.size()) / n;
    CHECK(n > 1e5);
    CHECK(std::abs(p - 0.125) < 3 * std::sqrt(0.125 * 0.875 / n));
}

TEST_CASE("exact Bell check at the paper angles") {
    const auto r = bell_check_exact(standard_bell_setting(), correlation_analytic);
    CHECK(r.estimate == doctest::Approx(1.886).epsilon(0.0005));
    CHECK(r.verdict == Verdict::proceed);
    CHECK(r.kind == CheckKind::bell);
}

TEST_CASE("Bell estimate at V=0.943 scales linearly") {
    Rng rng(41);
    const auto obs = sample_bell(standard_bell_setting(), 0.943, 20000, rng);
    const auto est = estimate_bell(obs);
    CHECK(std::abs(est.S - 0.943 * 4 * std::sqrt(2.0) / 3) < 3 * est.standard_error);
    CHECK(bell_check(obs).verdict == Verdict::proceed);
}

TEST_CASE("uniform records give S near zero and abort") {
    Rng rng(42);
    const auto obs = sample_bell(standard_bell_setting(), 0.0, 5000, rng);
    const auto est = estimate_bell(obs);
    // |sum of 16 noisy zeros| has mean 4 sqrt(2/pi) sigma_E.
    CHECK(est.S < 6 / std::sqrt(5000.0));
    CHECK(bell_check(obs).verdict == Verdict::abort);
}

TEST_CASE("missing setting combination is insufficient statistics") {
    Rng rng(43);
    auto obs = sample_bell(standard_bell_setting(), 1.0, 10, rng);
    obs.resize(150);
    CHECK_THROWS_AS(estimate_bell(obs), InsufficientStatistics);
}

TEST_CASE("Bell mode session violates the classical bound") {
    ProtocolConfig c;
    c.seed = 44;
    c.session.schedule = BasisSchedule::bell();
    c.session.noise.visibility = 0.943;
    c.session.source.first_event_only = false;
    c.session.source.four_photon_rate = 3.0;
    c.n_windows = 40000;
    const auto r = run_protocol(c);
    REQUIRE(r.bell);
    CHECK(r.bell_pool > 20000);
    CHECK(std::abs(r.check.estimate - 1.778) < 3 * r.check.standard_error + 0.01);
    CHECK(r.status == SessionStatus::completed);
    CHECK(r.key.size() == r.sifted.size());
    CHECK(r.sifted.parity_errors(Party::alice) < r.sifted.size() / 10);
}

TEST_CASE("reconstruct_dealer_bit") {
    CHECK(reconstruct_dealer_bit(0, 1, 1) == 0);
    CHECK(reconstruct_dealer_bit(0, 0, 0) == 0);
    CHECK(reconstruct_dealer_bit(1, 0, 0) == 1);
    CHECK(reconstruct_dealer_bit(1, 1, 1) == 1);
}

TEST_CASE("semi-access predictor") {
    const std::array<Party, 2> bc{Party::bob, Party::claire};
    CHECK(semi_access_predictor(Party::alice, bc, std::array<std::uint8_t, 2>{0, 0})[1] ==
          doctest::Approx(1.0));
    CHECK(semi_access_predictor(Party::alice, bc, std::array<std::uint8_t, 2>{0, 1})[0] ==
          doctest::Approx(0.8));
    const std::array<Party, 1> b{Party::bob};
    CHECK(semi_access_predictor(Party::alice, b, std::array<std::uint8_t, 1>{0})[0] ==
          doctest::Approx(2.0 / 3.0));

    const std::array<Party, 3> bcd{Party::bob, Party::claire, Party::david};
    CHECK_THROWS_AS(semi_access_predictor(Party::alice, bcd, std::array<std::uint8_t, 3>{0, 0, 0}),
                    std::invalid_argument);
    CHECK_THROWS_AS(semi_access_predictor(Party::alice, std::span<const Party>{},
                                          std::span<const std::uint8_t>{}),
                    std::invalid_argument);
    const std::array<Party, 1> a{Party::alice};
    CHECK_THROWS_AS(semi_access_predictor(Party::alice, a, std::array<std::uint8_t, 1>{0}),
                    std::invalid_argument);
}

TEST_CASE("semi-access MAP accuracy stays below one") {
    ProtocolConfig c;
    c.seed = 51;
    c.session.source.first_event_only = false;
    c.session.source.four_photon_rate = 2.0;
    c.target_sifted_bits = 40000;
    const auto r = run_protocol(c);
    const auto& key = r.sifted;
    const double n = static_cast<double>(key.size());

    // Key rounds are at a common phase of 0 or pi/2; both give the same answer.
    for (double phi : {0.0, kPi / 2}) {
        const std::array<Party, 1> b{Party::bob};
        CHECK(semi_access_predictor(Party::alice, b, std::array<std::uint8_t, 1>{1}, phi)[1] ==
              doctest::Approx(2.0 / 3.0));
    }

    auto accuracy = [&](std::span<const Party> subset) {
        std::size_t hits = 0;
        std::vector<std::uint8_t> bits(subset.size());
        for (std::size_t i = 0; i < key.size(); ++i) {
            for (std::size_t k = 0; k < subset.size(); ++k) bits[k] = key.of(subset[k])[i];
            const auto p = semi_access_predictor(Party::alice, subset, bits);
            const std::uint8_t guess = p[1] > p[0] ? 1 : 0;
            hits += guess == key.of(Party::alice)[i];
        }
        return static_cast<double>(hits) / n;
    };
    // Bob is positively correlated with Alice (2/3); Claire and David are
    // anticorrelated with her (5/6).
    for (Party p : {Party::bob, Party::claire, Party::david}) {
        const std::array<Party, 1> s{p};
        const double expected = p == Party::bob ? 2.0 / 3.0 : 5.0 / 6.0;
        const double acc = accuracy(s);
        CHECK(acc < 1.0);
        CHECK(std::abs(acc - expected) < 3 * std::sqrt(expected * (1 - expected) / n));
    }
    const std::array<std::array<Party, 2>, 3> pairs{{{Party::bob, Party::claire},
                                                     {Party::bob, Party::david},
                                                     {Party::claire, Party::david}}};
    for (const auto& s : pairs) {
        const double acc = accuracy(s);
        CHECK(acc < 1.0);
        CHECK(std::abs(acc - 5.0 / 6.0) < 3 * std::sqrt(5.0 / 36.0 / n));
    }
}

TEST_CASE("key transcript has four rows and the XOR row") {
    SiftedKey key;
    key.rounds = {0, 1, 2};
    key.bits = {Bits{0, 1, 1}, Bits{0, 1, 0}, Bits{1, 1, 0}, Bits{1, 1, 1}};
    std::ostringstream out;
    write_key_transcript(out, key, Party::alice);
    CHECK(out.str() ==
          "# dealer=Alice bits=3 errors=0\n"
          "# bits 0-2\n"
          "x_A  011\n"
          "x_B  010\n"
          "x_C  110\n"
          "x_D  111\n"
          "x_AS 011\n\n");
}
