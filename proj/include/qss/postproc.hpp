#pragma once

// Classical post-processing between the dealer and the access set:
// interactive block-parity reconciliation, Toeplitz-hash privacy
// amplification, the secure-length rule, and a one-time pad.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

#include "qss/bits.hpp"
#include "qss/channel.hpp"
#include "qss/rng.hpp"

namespace qss {

enum class KeyStage { sifted = 0, reconciled = 1, final = 2 };

std::string_view key_stage_name(KeyStage stage) noexcept;

/// Bits at one stage of the pipeline plus the information disclosed so far.
struct KeyMaterial {
    KeyStage stage = KeyStage::sifted;
    Bits bits;
    std::size_t leaked_bits = 0;
    double qber_estimate = 0.0;

    /// Moves to a later stage. Throws std::logic_error when `next` is not
    /// strictly after the current stage.
    KeyMaterial advance(KeyStage next, Bits new_bits, std::size_t extra_leak = 0) const;
};

// ---------------------------------------------------------------- reconcile

struct ReconcileConfig {
    /// Passes always run before the first verification.
    std::size_t core_passes = 2;
    /// Hard limit on passes including extra ones after a failed verification.
    std::size_t pass_budget = 4;
    /// First-pass block size is ceil(block_factor / qber).
    double block_factor = 0.73;
    /// Random-subset parities compared after the passes; an undetected
    /// mismatch survives with probability at most 2^-verify_bits.
    std::size_t verify_bits = 20;

    void validate() const;
};

struct ReconcileResult {
    Bits dealer_key;
    Bits access_key;
    std::size_t leaked_bits = 0;
    std::size_t corrected_bits = 0;
    std::size_t passes = 0;
    std::size_t first_block_size = 0;
    bool verified = false;
};

class ReconciliationError : public std::runtime_error {
public:
    ReconciliationError(const std::string& what, std::size_t leaked)
        : std::runtime_error(what), leaked_bits(leaked) {}
    std::size_t leaked_bits;
};

/// First-pass block size for a given error-rate estimate.
std::size_t first_block_size(std::size_t n, double qber_estimate, double block_factor = 0.73);

/// Equalizes the access set's combined key with the dealer's. Only the
/// dealer discloses parities (as ParityExchange messages on `channel`); the
/// access side corrects its own copy by binary search. `access` is the
/// party speaking for the access set. Randomness for pass permutations and
/// verification subsets is the dealer's, drawn from `dealer_rng`.
/// Throws ReconciliationError if verification still fails when the pass
/// budget is spent.
ReconcileResult reconcile(const Bits& dealer_key, const Bits& access_key, double qber_estimate,
                          Channel& channel, Party dealer, Party access, Rng& dealer_rng,
                          const ReconcileConfig& config = {});

/// Fisher-Yates permutation of [0, n) driven by `seed`.
std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed);

// -------------------------------------------------------- secure length, PA

double binary_entropy(double p);

/// Identifier printed alongside every secure-length result.
inline constexpr std::string_view kFinalLengthFormula = "floor(n*(1-2*h2(q)))-leak-eps";

/// max(0, floor(n (1 - 2 h2(qber))) - leaked_bits - epsilon_exponent).
/// Throws std::invalid_argument unless 0 <= qber < 0.5.
std::size_t final_key_length(std::size_t n, double qber, std::size_t leaked_bits,
                             std::size_t epsilon_exponent);

/// Defines the n_out x n_in Toeplitz matrix T[i][j] = bits[i - j + n_in - 1].
struct ToeplitzSeed {
    std::size_t n_in = 0;
    std::size_t n_out = 0;
    Bits bits;

    static ToeplitzSeed random(std::size_t n_in, std::size_t n_out, Rng& rng);
    void validate() const;
};

/// T(seed) * key over GF(2). Throws std::invalid_argument on a dimension mismatch.
Bits privacy_amplify(std::span<const std::uint8_t> key, const ToeplitzSeed& seed, std::size_t n_out);

// ------------------------------------------------------------------ Vernam

class VernamError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};
class KeyTooShort : public VernamError {
public:
    using VernamError::VernamError;
};
class KeyReuse : public VernamError {
public:
    using VernamError::VernamError;
};

struct Ciphertext {
    std::size_t key_offset = 0;  ///< first pad bit used
    Bits bits;

    bool operator==(const Ciphertext&) const = default;
};

/// Final key used as a one-time pad: bits are consumed front to back and
/// can never be used twice.
class OneTimePad {
public:
    OneTimePad() = default;
    explicit OneTimePad(Bits key) : key_(std::move(key)) {}

    std::size_t size() const noexcept { return key_.size(); }
    std::size_t remaining() const noexcept { return key_.size() - cursor_; }
    std::size_t spent() const noexcept { return cursor_; }

    /// XORs `message` with the next unused pad bits.
    /// KeyTooShort if the pad could never hold it, KeyReuse if that would
    /// require spent bits.
    Ciphertext encrypt(std::span<const std::uint8_t> message);

    /// Inverts encrypt on the counterpart's copy of the pad. Bits before
    /// `key_offset` are marked spent; KeyReuse if the range was spent already.
    Bits decrypt(const Ciphertext& ciphertext);

private:
    Bits key_;
    std::size_t cursor_ = 0;
};

Ciphertext vernam_encrypt(std::span<const std::uint8_t> message, OneTimePad& pad);
Bits vernam_decrypt(const Ciphertext& ciphertext, OneTimePad& pad);

// -------------------------------------------------------------- key files

/// One-line header then the hex bits:
///   # qss-key stage=<stage> length=<bits> leaked=<n> formula=<id>
///   <hex>
void write_key_file(std::ostream& out, const KeyMaterial& key, std::string_view formula);
/// Ciphertext variant; header carries stage=ciphertext and key_offset.
void write_ciphertext_file(std::ostream& out, const Ciphertext& ct, std::size_t leaked_bits,
                           std::string_view formula);

struct KeyFile {
    std::string stage;
    std::size_t length = 0;
    std::size_t leaked_bits = 0;
    std::size_t key_offset = 0;
    std::string formula;
    Bits bits;
};
KeyFile read_key_file(std::istream& in);

}  // namespace qss
