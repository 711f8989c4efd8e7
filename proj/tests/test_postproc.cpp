#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "qss/postproc.hpp"

using namespace qss;

namespace {

Bits random_bits(std::mt19937_64& gen, std::size_t n) {
    Bits b(n);
    for (auto& x : b) x = static_cast<std::uint8_t>(gen() & 1U);
    return b;
}

Bits with_errors(const Bits& key, double p, std::mt19937_64& gen) {
    std::bernoulli_distribution flip(p);
    Bits out = key;
    for (auto& b : out) b ^= static_cast<std::uint8_t>(flip(gen));
    return out;
}

std::size_t parities_in(const std::vector<TranscriptEntry>& transcript) {
    std::size_t n = 0;
    for (const auto& e : transcript) {
        if (e.message.payload.contains("parities")) n += e.message.payload["parities"].size();
    }
    return n;
}

}  // namespace

TEST_CASE("key material stages only move forward") {
    KeyMaterial k{KeyStage::sifted, {1, 0, 1}, 0, 0.05};
    const auto r = k.advance(KeyStage::reconciled, {1, 0, 1}, 7);
    CHECK(r.leaked_bits == 7);
    CHECK(r.stage == KeyStage::reconciled);
    CHECK_THROWS_AS(r.advance(KeyStage::sifted, {}), std::logic_error);
    CHECK_THROWS_AS(r.advance(KeyStage::reconciled, {}), std::logic_error);
    CHECK(r.advance(KeyStage::final, {1}).stage == KeyStage::final);
}

TEST_CASE("reconciliation") {
    std::mt19937_64 gen(8);
    Rng dealer_rng(99);

    SUBCASE("identical inputs need no corrections") {
        Channel ch;
        const Bits key = random_bits(gen, 1800);
        const auto r = reconcile(key, key, 0.05, ch, Party::alice, Party::bob, dealer_rng);
        CHECK(r.access_key == key);
        CHECK(r.corrected_bits == 0);
        CHECK(r.passes == 2);
        CHECK(r.verified);
        // Only the mandatory block parities plus the verification subsets.
        const std::size_t k1 = first_block_size(1800, 0.05);
        const std::size_t blocks = (1800 + k1 - 1) / k1 + (1800 + 2 * k1 - 1) / (2 * k1);
        CHECK(r.leaked_bits == blocks + 20);
    }
    SUBCASE("single error is located and flipped") {
        Channel ch;
        const Bits key = random_bits(gen, 500);
        Bits noisy = key;
        noisy[321] ^= 1U;
        const auto r = reconcile(key, noisy, 0.01, ch, Party::alice, Party::claire, dealer_rng);
        CHECK(r.access_key == key);
        CHECK(r.corrected_bits == 1);
    }
    SUBCASE("leak count equals the parities on the wire") {
        Channel ch;
        const Bits key = random_bits(gen, 1800);
        const auto r = reconcile(key, with_errors(key, 0.05, gen), 0.05, ch, Party::alice,
                                 Party::bob, dealer_rng);
        CHECK(r.access_key == key);
        CHECK(r.leaked_bits == parities_in(ch.transcript()));
        CHECK(audit_outcome_hygiene(ch.transcript()).empty());
        for (const auto& e : ch.transcript()) {
            CHECK(e.message.type == MessageType::parity_exchange);
            if (e.message.sender == Party::bob) CHECK_FALSE(e.message.payload.contains("parities"));
        }
    }
    SUBCASE("block size rule") {
        CHECK(first_block_size(1800, 0.05) == 15);
        CHECK(first_block_size(1800, 0.04) == 19);
        CHECK(first_block_size(1800, 0.0) == 1800);
        CHECK(first_block_size(10, 0.01) == 10);
    }
    SUBCASE("errors") {
        Channel ch;
        CHECK_THROWS_AS(reconcile({1, 0}, {1}, 0.1, ch, Party::alice, Party::bob, dealer_rng),
                        std::invalid_argument);
        ReconcileConfig bad;
        bad.pass_budget = 1;
        CHECK_THROWS_AS(reconcile({1}, {1}, 0.1, ch, Party::alice, Party::bob, dealer_rng, bad),
                        std::invalid_argument);
    }
    SUBCASE("non-convergence is reported") {
        // One pass over blocks of two bits cannot see an error pair inside a
        // block, and the verification then fails.
        Channel ch;
        ReconcileConfig tight;
        tight.core_passes = 1;
        tight.pass_budget = 1;
        tight.block_factor = 1.0;
        const Bits key(64, 0);
        Bits noisy = key;
        noisy[0] = noisy[1] = 1;
        CHECK_THROWS_AS(reconcile(key, noisy, 0.5, ch, Party::alice, Party::bob, dealer_rng, tight),
                        ReconciliationError);
    }
    SUBCASE("success rate at 5% QBER over 1000 seeded trials") {
        int ok = 0;
        for (int t = 0; t < 1000; ++t) {
            std::mt19937_64 g(static_cast<std::uint64_t>(t) + 1);
            Rng dr(static_cast<std::uint64_t>(t) + 7777);
            Channel ch;
            const Bits key = random_bits(g, 1800);
            try {
                const auto r = reconcile(key, with_errors(key, 0.05, g), 0.05, ch, Party::alice,
                                         Party::bob, dr);
                ok += r.access_key == key;
            } catch (const ReconciliationError&) {
            }
        }
        CHECK(ok >= 999);
    }
}

TEST_CASE("permutations are seeded and complete") {
    const auto p = seeded_permutation(100, 5);
    CHECK(p == seeded_permutation(100, 5));
    CHECK_FALSE(p == seeded_permutation(100, 6));
    auto sorted = p;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < 100; ++i) CHECK(sorted[i] == i);
}

TEST_CASE("secure key length") {
    CHECK(binary_entropy(0.5) == doctest::Approx(1.0));
    CHECK(binary_entropy(0.0) == 0.0);
    CHECK(binary_entropy(0.25) == doctest::Approx(0.811278).epsilon(1e-6));
    CHECK(final_key_length(1800, 0.0, 0, 40) == 1760);
    CHECK(final_key_length(1800, 0.25, 0, 40) == 0);
    CHECK(final_key_length(10, 0.0, 100, 0) == 0);
    // floor(1800 * (1 - 2 h2(0.05))) = 768.
    CHECK(final_key_length(1800, 0.05, 0, 0) == 768);
    CHECK_THROWS_AS(final_key_length(100, 0.5, 0, 0), std::invalid_argument);
    CHECK_THROWS_AS(final_key_length(100, -0.1, 0, 0), std::invalid_argument);
}

TEST_CASE("privacy amplification") {
    SUBCASE("hand-computed product") {
        ToeplitzSeed seed{8, 4, from_bit_string("10011101011")};
        const Bits key = from_bit_string("01101001");
        CHECK(to_bit_string(privacy_amplify(key, seed, 4)) == "1000");
        CHECK(privacy_amplify(key, seed, 4) == oracle::toeplitz_multiply(seed.bits, key, 4));
    }
    SUBCASE("zero key maps to zero") {
        Rng rng(3);
        const auto seed = ToeplitzSeed::random(100, 30, rng);
        CHECK(privacy_amplify(Bits(100, 0), seed, 30) == Bits(30, 0));
    }
    SUBCASE("GF(2) linearity and agreement with the matrix oracle") {
        std::mt19937_64 gen(12);
        Rng rng(4);
        for (int t = 0; t < 50; ++t) {
            const std::size_t n_in = 1 + gen() % 300, n_out = 1 + gen() % n_in;
            const auto seed = ToeplitzSeed::random(n_in, n_out, rng);
            const Bits k1 = random_bits(gen, n_in), k2 = random_bits(gen, n_in);
            const Bits lhs = privacy_amplify(xor_bits(k1, k2), seed, n_out);
            const Bits rhs = xor_bits(privacy_amplify(k1, seed, n_out), privacy_amplify(k2, seed, n_out));
            CHECK(lhs == rhs);
            CHECK(privacy_amplify(k1, seed, n_out) == oracle::toeplitz_multiply(seed.bits, k1, n_out));
        }
    }
    SUBCASE("dimension mismatch") {
        Rng rng(5);
        const auto seed = ToeplitzSeed::random(10, 4, rng);
        CHECK_THROWS_AS(privacy_amplify(Bits(9, 0), seed, 4), std::invalid_argument);
        CHECK_THROWS_AS(privacy_amplify(Bits(10, 0), seed, 5), std::invalid_argument);
        ToeplitzSeed broken{10, 4, Bits(12, 0)};
        CHECK_THROWS_AS(privacy_amplify(Bits(10, 0), broken, 4), std::invalid_argument);
    }
}

TEST_CASE("Vernam cipher") {
    SUBCASE("worked example") {
        OneTimePad pad(from_bit_string("0110"));
        const auto ct = vernam_encrypt(from_bit_string("1010"), pad);
        CHECK(to_bit_string(ct.bits) == "1100");
        CHECK(pad.remaining() == 0);
        CHECK_THROWS_AS(vernam_encrypt(from_bit_string("1"), pad), KeyReuse);
        OneTimePad peer(from_bit_string("0110"));
        CHECK(to_bit_string(vernam_decrypt(ct, peer)) == "1010");
        CHECK_THROWS_AS(vernam_decrypt(ct, peer), KeyReuse);
    }
    SUBCASE("round trip over random messages") {
        std::mt19937_64 gen(21);
        for (int t = 0; t < 1000; ++t) {
            const std::size_t n = gen() % 64;
            const Bits key = random_bits(gen, n + gen() % 8);
            const Bits m = random_bits(gen, n);
            OneTimePad a(key), b(key);
            CHECK(vernam_decrypt(vernam_encrypt(m, a), b) == m);
        }
    }
    SUBCASE("key too short") {
        OneTimePad pad(Bits(3, 1));
        CHECK_THROWS_AS(pad.encrypt(Bits(4, 0)), KeyTooShort);
        Ciphertext ct{2, Bits(2, 0)};
        CHECK_THROWS_AS(pad.decrypt(ct), KeyTooShort);
    }
    SUBCASE("consecutive messages use fresh pad bits") {
        OneTimePad a(from_bit_string("11110000")), b(from_bit_string("11110000"));
        const auto c1 = a.encrypt(from_bit_string("0000"));
        const auto c2 = a.encrypt(from_bit_string("0000"));
        CHECK(c1.key_offset == 0);
        CHECK(c2.key_offset == 4);
        CHECK(to_bit_string(c1.bits) == "1111");
        CHECK(to_bit_string(c2.bits) == "0000");
        CHECK(to_bit_string(b.decrypt(c2)) == "0000");
        CHECK_THROWS_AS(b.decrypt(c1), KeyReuse);
    }
}

TEST_CASE("key files") {
    KeyMaterial k{KeyStage::final, from_bit_string("1011001110001"), 412, 0.05};
    std::stringstream ss;
    write_key_file(ss, k, "f1");
    CHECK(ss.str() == "# qss-key stage=final length=13 leaked=412 formula=f1\nb388\n");
    const auto back = read_key_file(ss);
    CHECK(back.stage == "final");
    CHECK(back.bits == k.bits);
    CHECK(back.leaked_bits == 412);

    std::stringstream cs;
    write_ciphertext_file(cs, Ciphertext{5, from_bit_string("101")}, 9, "f1");
    const auto ct = read_key_file(cs);
    CHECK(ct.stage == "ciphertext");
    CHECK(ct.key_offset == 5);
    CHECK(to_bit_string(ct.bits) == "101");

    std::istringstream bad("hello\n00\n");
    CHECK_THROWS(read_key_file(bad));
}
