#pragma once

// The four-party secret-sharing protocol: per-party state machines talking
// over the classical channel, sifting, the two eavesdropping checks, and
// the dealer-key reconstruction rules.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qss/bits.hpp"
#include "qss/channel.hpp"
#include "qss/quantum.hpp"
#include "qss/schedule.hpp"
#include "qss/source.hpp"

namespace qss {

class InsufficientStatistics : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class CheckKind { qber, bell };
enum class Verdict { proceed, abort };

std::string_view check_kind_name(CheckKind kind) noexcept;
std::string_view verdict_name(Verdict verdict) noexcept;

struct Thresholds {
    /// QBER mode aborts above this estimate.
    double max_qber = 0.11;
    /// Bell mode proceeds only if S > classical_bound + bell_sigma_margin * stderr(S).
    double bell_sigma_margin = 2.0;
    double classical_bound = 1.0;
};

struct CheckReport {
    CheckKind kind = CheckKind::qber;
    std::size_t sample_size = 0;
    double estimate = 0.0;
    double standard_error = 0.0;
    double threshold = 0.0;  ///< the value the estimate was compared against
    Verdict verdict = Verdict::abort;
};

/// Aligned per-party keys. bits[p][i] belongs to round rounds[i].
struct SiftedKey {
    std::array<Bits, kNumParties> bits{};
    std::vector<std::uint64_t> rounds;

    std::size_t size() const noexcept { return rounds.size(); }
    const Bits& of(Party p) const { return bits[index_of(p)]; }

    /// XOR of every party other than `dealer`.
    Bits access_xor(Party dealer) const;

    /// Positions where the dealer's bit differs from the access XOR.
    std::size_t parity_errors(Party dealer) const;

    /// Checks equal lengths and strictly increasing rounds.
    void validate() const;

    /// Copy without the given positions (which must be sorted).
    SiftedKey without_positions(std::span<const std::size_t> positions) const;
};

// ------------------------------------------------------------- sifting

/// What one party announces about one detected round: never the outcome.
struct BasisAnnouncementEntry {
    std::uint64_t round = 0;
    std::uint64_t window = 0;
    std::uint8_t basis = 0;
};

using Announcements = std::array<std::vector<BasisAnnouncementEntry>, kNumParties>;

struct SiftResult {
    std::vector<std::uint64_t> key_rounds;
    std::vector<std::uint64_t> bell_rounds;
};

/// Keeps detected rounds where all four announced bases agree. In Bell mode,
/// rounds on which Bob used the override phases go to the Bell pool instead.
/// Throws std::invalid_argument if a round is announced by some parties but
/// not all, or rounds are not strictly increasing.
SiftResult sift(const Announcements& announcements, const BasisSchedule& schedule);

// -------------------------------------------------------------- checks

/// Chooses round(sample_fraction * n) distinct positions of an n-bit key, sorted.
std::vector<std::size_t> choose_sample_positions(std::size_t n, double sample_fraction, Rng& rng);

/// Error fraction of the dealer's bits against the access XOR at `positions`.
CheckReport qber_report(const SiftedKey& key, Party dealer, std::span<const std::size_t> positions,
                        const Thresholds& thresholds);

struct QberCheckResult {
    CheckReport report;
    SiftedKey remaining;  ///< key with the revealed positions removed
};

/// Sampling check run over `channel`: the dealer broadcasts a SampleRequest,
/// every other party answers with a SampleReveal of its bits there.
QberCheckResult estimate_qber(const SiftedKey& key, Party dealer, double sample_fraction, Rng& rng,
                              Channel& channel, const Thresholds& thresholds = {});

/// One Bell-pool round: each party's setting label (0 or 1) and the outcome pattern.
struct BellObservation {
    std::array<std::uint8_t, kNumParties> setting{};
    std::uint8_t outcome = 0;
};

struct BellEstimate {
    std::array<double, kNumPatterns> correlation{};
    std::array<std::size_t, kNumPatterns> counts{};
    double S = 0.0;
    double standard_error = 0.0;
};

/// Per-combination empirical correlations (unweighted across combinations)
/// and S with a delta-method standard error. Throws InsufficientStatistics
/// if any of the 16 setting combinations has no observation.
BellEstimate estimate_bell(std::span<const BellObservation> observations);

/// Compares an S estimate to the classical bound plus the margin.
CheckReport bell_report(double S, double standard_error, std::size_t sample_size,
                        const Thresholds& thresholds);

/// estimate_bell followed by bell_report.
CheckReport bell_check(std::span<const BellObservation> observations, const Thresholds& thresholds = {});

/// S from an exact correlation table (no sampling error).
CheckReport bell_check_exact(const BellSetting& setting, const CorrelationFn& correlation,
                             const Thresholds& thresholds = {});

// ------------------------------------------------- access structure

/// The access set's reconstruction of the dealer bit.
std::uint8_t reconstruct_dealer_bit(std::uint8_t x1, std::uint8_t x2, std::uint8_t x3) noexcept;

/// Exact conditional distribution {P(0), P(1)} of the dealer's bit given the
/// bits of `subset` in a round where all parties measured at phase `phi`.
/// The subset must be nonempty, exclude the dealer, and hold at most two
/// parties; the full access set is rejected (use reconstruct_dealer_bit).
std::array<double, 2> semi_access_predictor(Party dealer, std::span<const Party> subset,
                                            std::span<const std::uint8_t> bits, double phi = 0.0);

// ------------------------------------------------------ orchestration

struct ProtocolConfig {
    std::uint64_t seed = 1;
    Party dealer = Party::alice;
    SessionSpec session{};
    /// Number of acquisition windows; ignored when target_sifted_bits is set.
    std::uint64_t n_windows = 0;
    /// Measure until the key pool holds this many rounds, then stop.
    std::optional<std::size_t> target_sifted_bits;
    /// Safety limit on windows when running to a target.
    std::uint64_t max_windows = 50'000'000;
    double sample_fraction = 0.1;
    Thresholds thresholds{};
};

enum class SessionStatus { completed, aborted };

struct SessionResult {
    SessionStatus status = SessionStatus::aborted;
    CheckReport check;
    std::optional<BellEstimate> bell;
    SiftedKey sifted;     ///< the whole key pool, before the check
    SiftedKey key;        ///< after removing revealed positions
    std::uint64_t windows = 0;
    std::uint64_t detected = 0;
    std::size_t bell_pool = 0;
    double seconds = 0.0;
    std::vector<TranscriptEntry> transcript;
};

/// Runs the source (optionally under attack), then lets the four parties
/// execute the protocol over an in-process channel under a deterministic
/// round-robin scheduler. Throws InsufficientStatistics when the check
/// cannot be evaluated.
SessionResult run_protocol(const ProtocolConfig& config);

/// Same, but replaying previously recorded rounds.
SessionResult run_protocol_on_records(const ProtocolConfig& config,
                                      const std::vector<RoundRecord>& records);

/// Four aligned rows x_A..x_D and the access XOR row x_AS, 100 bits per block.
void write_key_transcript(std::ostream& out, const SiftedKey& key, Party dealer,
                          std::size_t bits_per_block = 100);

}  // namespace qss
