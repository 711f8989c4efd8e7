#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "qss/postproc.hpp"
#include "qss/protocol.hpp"

namespace qss {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// "45deg", "-0.25 rad", "90 deg". The unit suffix is mandatory.
double parse_angle(std::string_view text);

/// Comma-separated angles, each with its own unit.
std::vector<double> parse_angle_list(std::string_view text);

/// Every setting of a run. Populated from a flat `key = value` file and
/// command-line overrides through set().
struct ExperimentConfig {
    std::uint64_t seed = 1;
    BasisMode mode = BasisMode::qber;
    Party dealer = Party::alice;
    double visibility = 1.0;
    SourceConfig source{};
    std::vector<Party> attacked_modes;
    double attack_fraction = 1.0;
    std::vector<double> eve_bases;  ///< empty: the keying phases of the mode
    std::optional<std::uint64_t> windows;
    std::optional<std::size_t> target_bits;
    std::uint64_t max_windows = 50'000'000;
    double sample_fraction = 0.1;
    Thresholds thresholds{};
    std::size_t epsilon = 40;
    ReconcileConfig reconcile{};
    std::string message = "QSS demo";
    std::array<double, 4> phases{};  ///< histogram settings
    std::uint64_t samples = 100000;
    double scan_start = 0.0;
    double scan_stop = 0.0;
    double scan_step = 0.0;
    std::uint64_t scan_samples = 2000;
    bool analytic = false;
    std::filesystem::path out_dir = ".";

    ExperimentConfig();

    /// Sets one key from its text form. Throws ConfigError on an unknown key
    /// or an unparsable value.
    void set(std::string_view key, std::string_view value);

    /// Throws ConfigError when a value is outside its domain.
    void validate() const;

    SessionSpec session_spec() const;
    ProtocolConfig protocol_config() const;
};

/// Keys accepted by ExperimentConfig::set, in documentation order.
const std::vector<std::string_view>& config_keys();

/// Parses `key = value` lines; '#' starts a comment.
ExperimentConfig parse_config(std::string_view text, ExperimentConfig base = {});
ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {});

// ---------------------------------------------------------------- histogram

struct HistogramResult {
    std::array<double, 4> phases{};
    double visibility = 1.0;
    std::uint64_t samples = 0;
    std::array<double, kNumPatterns> probabilities{};
    std::array<std::uint64_t, kNumPatterns> counts{};
    double correlation_analytic = 0.0;
    double correlation_sampled = 0.0;
    double standard_error = 0.0;
};

HistogramResult run_histogram(const ExperimentConfig& config);
std::string histogram_csv(const HistogramResult& r);
std::string histogram_report(const HistogramResult& r);

// --------------------------------------------------------- correlation scan

struct ScanPoint {
    double phi_b = 0.0;
    double analytic = 0.0;  ///< visibility-scaled
    double sampled = 0.0;
    double standard_error = 0.0;
};

struct ScanResult {
    std::array<double, 4> phases{};  ///< fixed phases; entry for Bob unused
    double visibility = 1.0;
    std::uint64_t samples_per_point = 0;
    std::vector<ScanPoint> points;
    double fitted_visibility = 0.0;
    double fit_standard_error = 0.0;
};

ScanResult run_correlation_scan(const ExperimentConfig& config);

/// Least-squares amplitude V of sampled = V * ideal, with the standard error
/// from the residual variance. Returns {V, stderr}.
std::array<double, 2> fit_visibility(std::span<const double> ideal, std::span<const double> sampled);

std::string scan_csv(const ScanResult& r);
std::string scan_report(const ScanResult& r);

// ------------------------------------------------------------------ qss-run

enum class RunStatus { completed, check_abort, reconcile_failed, no_secure_key };

std::string_view run_status_name(RunStatus status) noexcept;

struct QssRunResult {
    RunStatus status = RunStatus::check_abort;
    SessionResult session;
    std::optional<ReconcileResult> reconciliation;
    std::size_t leaked_bits = 0;
    double error_rate = 0.0;  ///< rate fed into the secure-length formula
    std::size_t final_length = 0;
    Bits dealer_final;
    Bits access_final;
    std::optional<Ciphertext> ciphertext;
    Bits message;
    Bits decrypted;
    std::vector<TranscriptEntry> postproc_transcript;

    bool keys_match() const { return !dealer_final.empty() && dealer_final == access_final; }
    bool vernam_ok() const { return ciphertext && decrypted == message; }
};

QssRunResult run_qss(const ExperimentConfig& config);
std::string qss_report(const ExperimentConfig& config, const QssRunResult& r);

/// One JSON object per line for every message of both transcripts.
std::string transcript_jsonl(const QssRunResult& r);

// ----------------------------------------------------------------- bell-test

struct BellTestResult {
    bool analytic = false;
    double visibility = 1.0;
    CheckReport report;
    std::optional<BellEstimate> estimate;
    std::size_t pool = 0;
    std::uint64_t windows = 0;
    double predicted = 0.0;  ///< V times the ideal value
};

BellTestResult run_bell_test(const ExperimentConfig& config);
std::string bell_report_text(const BellTestResult& r);
std::string bell_csv(const BellTestResult& r);

// ------------------------------------------------------------ file output

/// Writes each command's files under config.out_dir and returns their paths.
std::vector<std::filesystem::path> write_histogram_files(const ExperimentConfig& config,
                                                         const HistogramResult& r);
std::vector<std::filesystem::path> write_scan_files(const ExperimentConfig& config, const ScanResult& r);
std::vector<std::filesystem::path> write_qss_files(const ExperimentConfig& config, const QssRunResult& r);
std::vector<std::filesystem::path> write_bell_files(const ExperimentConfig& config,
                                                    const BellTestResult& r);

}  // namespace qss
