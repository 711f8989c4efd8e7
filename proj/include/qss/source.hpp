#pragma once

// Pulsed four-photon source and coincidence detection as a stochastic
// process: Poisson emissions per acquisition window, per-photon detector
// loss, and Born-rule outcome sampling.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "qss/adversary.hpp"
#include "qss/quantum.hpp"
#include "qss/rng.hpp"
#include "qss/schedule.hpp"

namespace qss {

struct SourceConfig {
    double four_photon_rate = 0.4;   ///< events per second
    double window_seconds = 1.0;
    /// Keep only the first four-photon event of a window. When false every
    /// event of the window is registered as its own record.
    bool first_event_only = true;
    double detector_efficiency = 1.0;  ///< per-photon survival probability
    double dead_time_seconds = 0.0;    ///< analyzer re-orientation time per window

    /// Source with the laboratory's 40% detectors.
    static SourceConfig lab_detectors();

    /// Throws std::invalid_argument on out-of-range fields.
    void validate() const;

    /// Probability that a window yields a registered event (first-event rule).
    double detection_probability() const noexcept;
};

/// One registered (or empty) acquisition record.
struct RoundRecord {
    std::uint64_t round_index = 0;   ///< position in the session
    std::uint64_t window_index = 0;  ///< acquisition window
    std::uint32_t event_index = 0;   ///< event number inside the window
    std::array<std::uint8_t, kNumParties> basis{};  ///< 0 or 1 per party
    std::array<double, kNumParties> phase{};
    /// Four outcome bits as a pattern index; empty when nothing was detected.
    std::optional<std::uint8_t> outcome;

    bool detected() const noexcept { return outcome.has_value(); }
    bool all_bases_equal() const noexcept;
    unsigned bit(Party p) const noexcept;

    bool operator==(const RoundRecord&) const = default;
};

/// Samples one window under the first-event rule.
std::optional<std::uint8_t> sample_window(const SourceConfig& config,
                                          const OutcomeDistribution& dist, Rng& rng);

/// Draws a pattern index from `dist` by inversion.
std::uint8_t sample_outcome(const OutcomeDistribution& dist, Rng& rng);

struct SessionSpec {
    BasisSchedule schedule = BasisSchedule::qber();
    PureState state = make_psi4_minus();
    NoiseModel noise{};
    SourceConfig source{};
    AttackConfig attack{};
};

/// Generates acquisition windows one at a time, so a caller can stop once
/// enough key material has accumulated.
class SessionRunner {
public:
    SessionRunner(SessionSpec spec, const RngStreams& streams);

    /// Appends the records of the next window to `out`.
    void run_window(std::vector<RoundRecord>& out);

    std::uint64_t windows() const noexcept { return window_; }
    const SessionSpec& spec() const noexcept { return spec_; }

private:
    std::optional<std::uint8_t> register_event(const Settings& settings, std::size_t cache_key);

    SessionSpec spec_;
    Rng source_rng_;
    Rng eve_rng_;
    std::array<Rng, kNumParties> basis_rng_{};
    // Unattacked distributions only depend on the four basis labels and
    // whether the override applies, so 32 entries cover every window.
    std::array<std::optional<OutcomeDistribution>, 32> cache_{};
    std::uint64_t window_ = 0;
};

/// Runs `n_windows` acquisition windows. Randomness comes from the streams
/// "source", "basis.<party>" and "eve" of `streams`.
std::vector<RoundRecord> run_session(std::uint64_t n_windows, const SessionSpec& spec,
                                     const RngStreams& streams);

/// Wall-clock time the session represents.
double session_seconds(std::uint64_t n_windows, const SourceConfig& config) noexcept;

// Record files: one record per line, whitespace separated, in the order
//   round window event basis_a basis_b basis_c basis_d
//   phase_a phase_b phase_c phase_d outcome
// where phases are radians and outcome is four bits (a..d) or '-' when the
// window registered nothing. Lines starting with '#' are comments.
void write_records(std::ostream& out, const std::vector<RoundRecord>& records);
std::vector<RoundRecord> read_records(std::istream& in);

}  // namespace qss
