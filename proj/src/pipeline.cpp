#include "qss/pipeline.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace qss {

namespace {

constexpr double kPi = std::numbers::pi;

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

double parse_double(std::string_view key, std::string_view text) {
    text = trim(text);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(v)) {
        throw ConfigError(fmt::format("{}: '{}' is not a number", key, text));
    }
    return v;
}

std::uint64_t parse_uint(std::string_view key, std::string_view text) {
    text = trim(text);
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw ConfigError(fmt::format("{}: '{}' is not a non-negative integer", key, text));
    }
    return v;
}

bool parse_bool(std::string_view key, std::string_view text) {
    text = trim(text);
    if (text == "true" || text == "yes" || text == "1") return true;
    if (text == "false" || text == "no" || text == "0") return false;
    throw ConfigError(fmt::format("{}: '{}' is not a boolean", key, text));
}

Party parse_party_value(std::string_view key, std::string_view text) {
    if (auto p = parse_party(trim(text))) return *p;
    throw ConfigError(fmt::format("{}: unknown party '{}'", key, text));
}

std::vector<Party> parse_modes(std::string_view text) {
    text = trim(text);
    std::vector<Party> out;
    if (text.empty() || text == "none" || text == "off") return out;
    for (char c : text) {
        if (c == ',' || c == ' ') continue;
        const auto p = parse_party(std::string_view(&c, 1));
        if (!p) throw ConfigError(fmt::format("attack: unknown mode '{}'", c));
        if (std::find(out.begin(), out.end(), *p) == out.end()) out.push_back(*p);
    }
    return out;
}

std::string format_angle(double rad) { return fmt::format("{:.6f}", rad); }

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

std::filesystem::path prepare_dir(const ExperimentConfig& config) {
    std::filesystem::create_directories(config.out_dir);
    return config.out_dir;
}

Bits text_to_bits(std::string_view text) {
    Bits bits;
    for (unsigned char c : text) {
        for (int k = 7; k >= 0; --k) bits.push_back(static_cast<std::uint8_t>((c >> k) & 1U));
    }
    return bits;
}

std::string bits_to_text(const Bits& bits) {
    std::string out;
    for (std::size_t i = 0; i + 8 <= bits.size(); i += 8) {
        unsigned c = 0;
        for (std::size_t k = 0; k < 8; ++k) c = (c << 1U) | bits[i + k];
        out.push_back(static_cast<char>(c));
    }
    return out;
}

Party access_speaker(Party dealer) {
    for (Party p : kAllParties) {
        if (p != dealer) return p;
    }
    return dealer;
}

}  // namespace

double parse_angle(std::string_view text) {
    text = trim(text);
    double scale = 0.0;
    std::string_view number;
    if (text.size() > 3 && text.substr(text.size() - 3) == "deg") {
        scale = kPi / 180.0;
        number = text.substr(0, text.size() - 3);
    } else if (text.size() > 3 && text.substr(text.size() - 3) == "rad") {
        scale = 1.0;
        number = text.substr(0, text.size() - 3);
    } else {
        throw ConfigError(fmt::format("angle '{}' needs a 'deg' or 'rad' suffix", text));
    }
    return parse_double("angle", number) * scale;
}

std::vector<double> parse_angle_list(std::string_view text) {
    std::vector<double> out;
    if (trim(text).empty()) return out;
    for (auto part : split(text, ',')) out.push_back(parse_angle(part));
    return out;
}

// -------------------------------------------------------------- config

ExperimentConfig::ExperimentConfig() : scan_stop(4 * kPi), scan_step(kPi / 8) {}

const std::vector<std::string_view>& config_keys() {
    static const std::vector<std::string_view> keys{
        "seed",          "mode",          "dealer",        "visibility",     "rate",
        "window",        "first_event_only", "efficiency", "dead_time",      "attack",
        "attack_fraction", "eve_bases",   "windows",       "target_bits",    "max_windows",
        "sample_fraction", "max_qber",    "bell_margin",   "epsilon",        "block_factor",
        "pass_budget",   "message",       "phases",        "samples",        "scan_start",
        "scan_stop",     "scan_step",     "scan_samples",  "analytic",       "out_dir"};
    return keys;
}

void ExperimentConfig::set(std::string_view key, std::string_view value) {
    key = trim(key);
    value = trim(value);
    if (key == "seed") {
        seed = parse_uint(key, value);
    } else if (key == "mode") {
        if (value == "qber" || value == "QBER_MODE") mode = BasisMode::qber;
        else if (value == "bell" || value == "BELL_MODE") mode = BasisMode::bell;
        else throw ConfigError(fmt::format("mode: expected qber or bell, got '{}'", value));
    } else if (key == "dealer") {
        dealer = parse_party_value(key, value);
    } else if (key == "visibility") {
        visibility = parse_double(key, value);
    } else if (key == "rate") {
        source.four_photon_rate = parse_double(key, value);
    } else if (key == "window") {
        source.window_seconds = parse_double(key, value);
    } else if (key == "first_event_only") {
        source.first_event_only = parse_bool(key, value);
    } else if (key == "efficiency") {
        source.detector_efficiency = parse_double(key, value);
    } else if (key == "dead_time") {
        source.dead_time_seconds = parse_double(key, value);
    } else if (key == "attack") {
        attacked_modes = parse_modes(value);
    } else if (key == "attack_fraction") {
        attack_fraction = parse_double(key, value);
    } else if (key == "eve_bases") {
        eve_bases = parse_angle_list(value);
    } else if (key == "windows") {
        windows = parse_uint(key, value);
        target_bits.reset();
    } else if (key == "target_bits") {
        target_bits = parse_uint(key, value);
        windows.reset();
    } else if (key == "max_windows") {
        max_windows = parse_uint(key, value);
    } else if (key == "sample_fraction") {
        sample_fraction = parse_double(key, value);
    } else if (key == "max_qber") {
        thresholds.max_qber = parse_double(key, value);
    } else if (key == "bell_margin") {
        thresholds.bell_sigma_margin = parse_double(key, value);
    } else if (key == "epsilon") {
        epsilon = parse_uint(key, value);
    } else if (key == "block_factor") {
        reconcile.block_factor = parse_double(key, value);
    } else if (key == "pass_budget") {
        reconcile.pass_budget = parse_uint(key, value);
    } else if (key == "message") {
        message = std::string(value);
    } else if (key == "phases") {
        const auto list = parse_angle_list(value);
        if (list.size() != kNumParties) throw ConfigError("phases: expected four angles");
        std::copy(list.begin(), list.end(), phases.begin());
    } else if (key == "samples") {
        samples = parse_uint(key, value);
    } else if (key == "scan_start") {
        scan_start = parse_angle(value);
    } else if (key == "scan_stop") {
        scan_stop = parse_angle(value);
    } else if (key == "scan_step") {
        scan_step = parse_angle(value);
    } else if (key == "scan_samples") {
        scan_samples = parse_uint(key, value);
    } else if (key == "analytic") {
        analytic = parse_bool(key, value);
    } else if (key == "out_dir") {
        out_dir = std::filesystem::path(std::string(value));
    } else {
        throw ConfigError(fmt::format("unknown key '{}'", key));
    }
}

void ExperimentConfig::validate() const {
    try {
        NoiseModel{visibility}.validate();
        source.validate();
        session_spec().attack.validate();
        reconcile.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (!(sample_fraction > 0.0 && sample_fraction < 1.0)) {
        throw ConfigError("sample_fraction must lie in (0, 1)");
    }
    if (!(thresholds.max_qber >= 0.0 && thresholds.max_qber < 0.5)) {
        throw ConfigError("max_qber must lie in [0, 0.5)");
    }
    if (thresholds.bell_sigma_margin < 0.0) throw ConfigError("bell_margin must be non-negative");
    if (!(scan_step > 0.0)) throw ConfigError("scan_step must be positive");
    if (scan_stop < scan_start) throw ConfigError("scan_stop must not precede scan_start");
    if ((scan_stop - scan_start) / scan_step > 1e6) throw ConfigError("scan has too many points");
    if (windows && *windows == 0) throw ConfigError("windows must be positive");
    if (target_bits && *target_bits == 0) throw ConfigError("target_bits must be positive");
}

SessionSpec ExperimentConfig::session_spec() const {
    SessionSpec spec;
    spec.schedule = mode == BasisMode::qber ? BasisSchedule::qber() : BasisSchedule::bell();
    spec.noise.visibility = visibility;
    spec.source = source;
    if (!attacked_modes.empty()) {
        spec.attack.attacked_modes = attacked_modes;
        spec.attack.attack_fraction = attack_fraction;
        spec.attack.eve_bases = eve_bases.empty()
                                    ? std::vector<double>(spec.schedule.key_phases.begin(),
                                                          spec.schedule.key_phases.end())
                                    : eve_bases;
    }
    return spec;
}

ProtocolConfig ExperimentConfig::protocol_config() const {
    ProtocolConfig c;
    c.seed = seed;
    c.dealer = dealer;
    c.session = session_spec();
    if (windows) {
        c.n_windows = *windows;
    } else {
        c.target_sifted_bits = target_bits.value_or(2000);
    }
    c.max_windows = max_windows;
    c.sample_fraction = sample_fraction;
    c.thresholds = thresholds;
    return c;
}

ExperimentConfig parse_config(std::string_view text, ExperimentConfig base) {
    std::size_t line_no = 0;
    for (auto line : split(text, '\n')) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError(fmt::format("line {}: expected 'key = value'", line_no));
        }
        try {
            base.set(line.substr(0, eq), line.substr(eq + 1));
        } catch (const ConfigError& e) {
            throw ConfigError(fmt::format("line {}: {}", line_no, e.what()));
        }
    }
    return base;
}

ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), std::move(base));
}

// ----------------------------------------------------------- histogram

HistogramResult run_histogram(const ExperimentConfig& config) {
    config.validate();
    HistogramResult r;
    r.phases = config.phases;
    r.visibility = config.visibility;
    r.samples = config.samples;
    const auto& p = config.phases;
    const auto dist = outcome_distribution(make_psi4_minus(), settings_from_phases(p[0], p[1], p[2], p[3]),
                                           NoiseModel{config.visibility});
    r.probabilities = dist.probs;
    r.correlation_analytic = correlation_from_distribution(dist);
    if (r.samples == 0) return r;

    Rng rng = RngStreams(config.seed).stream("histogram");
    double sum = 0.0;
    for (std::uint64_t i = 0; i < r.samples; ++i) {
        const auto b = sample_outcome(dist, rng);
        ++r.counts[b];
        sum += pattern_parity(b) ? -1.0 : 1.0;
    }
    const double n = static_cast<double>(r.samples);
    r.correlation_sampled = sum / n;
    r.standard_error = std::sqrt(std::max(0.0, 1.0 - r.correlation_sampled * r.correlation_sampled) / n);
    return r;
}

std::string histogram_csv(const HistogramResult& r) {
    std::string out = r.samples > 0 ? "outcome,pattern,probability,count,frequency\n"
                                    : "outcome,pattern,probability\n";
    for (std::size_t b = 0; b < kNumPatterns; ++b) {
        out += fmt::format("{},{},{:.10f}", b, pattern_label(b), r.probabilities[b]);
        if (r.samples > 0) {
            out += fmt::format(",{},{:.10f}", r.counts[b],
                               static_cast<double>(r.counts[b]) / static_cast<double>(r.samples));
        }
        out += '\n';
    }
    return out;
}

std::string histogram_report(const HistogramResult& r) {
    std::string out = "command: histogram\n";
    out += fmt::format("phases_rad: {},{},{},{}\n", format_angle(r.phases[0]), format_angle(r.phases[1]),
                       format_angle(r.phases[2]), format_angle(r.phases[3]));
    out += fmt::format("visibility: {:.6f}\n", r.visibility);
    out += fmt::format("samples: {}\n", r.samples);
    out += fmt::format("correlation_analytic: {:.6f}\n", r.correlation_analytic);
    if (r.samples > 0) {
        out += fmt::format("correlation_sampled: {:.6f}\n", r.correlation_sampled);
        out += fmt::format("standard_error: {:.6f}\n", r.standard_error);
    }
    return out;
}

// ---------------------------------------------------- correlation scan

std::array<double, 2> fit_visibility(std::span<const double> ideal, std::span<const double> sampled) {
    if (ideal.size() != sampled.size() || ideal.size() < 2) {
        throw std::invalid_argument("fit_visibility: need at least two matching points");
    }
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < ideal.size(); ++i) {
        sxx += ideal[i] * ideal[i];
        sxy += ideal[i] * sampled[i];
    }
    if (sxx <= 0.0) throw std::invalid_argument("fit_visibility: ideal curve is identically zero");
    const double v = sxy / sxx;
    double rss = 0.0;
    for (std::size_t i = 0; i < ideal.size(); ++i) {
        const double e = sampled[i] - v * ideal[i];
        rss += e * e;
    }
    const double s2 = rss / static_cast<double>(ideal.size() - 1);
    return {v, std::sqrt(s2 / sxx)};
}

ScanResult run_correlation_scan(const ExperimentConfig& config) {
    config.validate();
    ScanResult r;
    r.phases = config.phases;
    r.visibility = config.visibility;
    r.samples_per_point = config.scan_samples;
    Rng rng = RngStreams(config.seed).stream("scan");
    const auto state = make_psi4_minus();
    const auto& p = config.phases;

    const auto n_points =
        static_cast<std::size_t>(std::floor((config.scan_stop - config.scan_start) / config.scan_step + 1e-9)) + 1;
    std::vector<double> ideal, sampled;
    for (std::size_t k = 0; k < n_points; ++k) {
        const double phi_b = config.scan_start + static_cast<double>(k) * config.scan_step;
        ScanPoint pt;
        pt.phi_b = phi_b;
        const double e_ideal = correlation_analytic(p[0], phi_b, p[2], p[3]);
        pt.analytic = config.visibility * e_ideal;
        if (config.scan_samples > 0) {
            const auto dist = outcome_distribution(state, settings_from_phases(p[0], phi_b, p[2], p[3]),
                                                   NoiseModel{config.visibility});
            double sum = 0.0;
            for (std::uint64_t i = 0; i < config.scan_samples; ++i) {
                sum += pattern_parity(sample_outcome(dist, rng)) ? -1.0 : 1.0;
            }
            const double n = static_cast<double>(config.scan_samples);
            pt.sampled = sum / n;
            pt.standard_error = std::sqrt(std::max(0.0, 1.0 - pt.sampled * pt.sampled) / n);
        } else {
            pt.sampled = pt.analytic;
        }
        ideal.push_back(e_ideal);
        sampled.push_back(pt.sampled);
        r.points.push_back(pt);
    }
    if (r.points.size() >= 2) {
        const auto fit = fit_visibility(ideal, sampled);
        r.fitted_visibility = fit[0];
        r.fit_standard_error = fit[1];
    } else {
        r.fitted_visibility = ideal[0] != 0.0 ? sampled[0] / ideal[0] : 0.0;
    }
    return r;
}

std::string scan_csv(const ScanResult& r) {
    std::string out = "phi_b_rad,phi_b_deg,e_analytic,e_sampled,standard_error\n";
    for (const auto& pt : r.points) {
        out += fmt::format("{},{:.4f},{:.6f},{:.6f},{:.6f}\n", format_angle(pt.phi_b), pt.phi_b * 180.0 / kPi,
                           pt.analytic, pt.sampled, pt.standard_error);
    }
    return out;
}

std::string scan_report(const ScanResult& r) {
    std::string out = "command: correlation-scan\n";
    out += fmt::format("fixed_phases_rad: a={} c={} d={}\n", format_angle(r.phases[0]),
                       format_angle(r.phases[2]), format_angle(r.phases[3]));
    out += fmt::format("visibility: {:.6f}\n", r.visibility);
    out += fmt::format("points: {}\n", r.points.size());
    out += fmt::format("samples_per_point: {}\n", r.samples_per_point);
    out += fmt::format("fitted_visibility: {:.6f}\n", r.fitted_visibility);
    out += fmt::format("fit_standard_error: {:.6f}\n", r.fit_standard_error);
    return out;
}

// ------------------------------------------------------------- qss-run

std::string_view run_status_name(RunStatus status) noexcept {
    switch (status) {
        case RunStatus::completed: return "completed";
        case RunStatus::check_abort: return "check_abort";
        case RunStatus::reconcile_failed: return "reconcile_failed";
        case RunStatus::no_secure_key: return "no_secure_key";
    }
    return "?";
}

QssRunResult run_qss(const ExperimentConfig& config) {
    config.validate();
    QssRunResult r;
    r.session = run_protocol(config.protocol_config());
    if (r.session.status == SessionStatus::aborted) {
        r.status = RunStatus::check_abort;
        return r;
    }

    const Party dealer = config.dealer;
    const Party speaker = access_speaker(dealer);
    const Bits dealer_key = r.session.key.of(dealer);
    const Bits access_key = r.session.key.access_xor(dealer);
    const std::size_t n = dealer_key.size();

    // Bell mode has no direct error estimate; the violation bounds the noise.
    double prior = r.session.check.estimate;
    if (config.mode == BasisMode::bell) {
        const double ideal = bell_S(config.session_spec().schedule.bell_setting(), correlation_analytic);
        prior = std::clamp((1.0 - r.session.check.estimate / ideal) / 2.0, 0.01, 0.25);
    }

    RngStreams streams(config.seed);
    Rng dealer_rng = streams.stream("postproc." + std::string(party_name(dealer)));
    Channel channel;
    try {
        r.reconciliation = reconcile(dealer_key, access_key, prior, channel, dealer, speaker, dealer_rng,
                                     config.reconcile);
    } catch (const ReconciliationError& e) {
        r.leaked_bits = e.leaked_bits;
        r.postproc_transcript = channel.transcript();
        r.status = RunStatus::reconcile_failed;
        return r;
    }
    r.leaked_bits = r.reconciliation->leaked_bits;
    r.error_rate = config.mode == BasisMode::qber
                       ? r.session.check.estimate
                       : static_cast<double>(r.reconciliation->corrected_bits) / static_cast<double>(n);
    r.error_rate = std::min(r.error_rate, 0.4999);
    r.final_length = final_key_length(n, r.error_rate, r.leaked_bits, config.epsilon);
    if (r.final_length == 0) {
        r.postproc_transcript = channel.transcript();
        r.status = RunStatus::no_secure_key;
        return r;
    }

    const auto seed = ToeplitzSeed::random(n, r.final_length, dealer_rng);
    channel.broadcast(ProtocolMessage{MessageType::hash_seed, dealer, std::nullopt,
                                      {{"n_in", seed.n_in}, {"n_out", seed.n_out}, {"seed", to_hex(seed.bits)}}});
    const auto received = channel.try_recv(speaker);
    ToeplitzSeed access_seed{received->payload.at("n_in").get<std::size_t>(),
                             received->payload.at("n_out").get<std::size_t>(), {}};
    access_seed.bits = from_hex(received->payload.at("seed").get<std::string>(),
                                access_seed.n_in + access_seed.n_out - 1);
    r.dealer_final = privacy_amplify(r.reconciliation->dealer_key, seed, r.final_length);
    r.access_final = privacy_amplify(r.reconciliation->access_key, access_seed, r.final_length);

    r.message = text_to_bits(config.message);
    if (!r.message.empty() && r.message.size() <= r.final_length) {
        OneTimePad dealer_pad(r.dealer_final);
        OneTimePad access_pad(r.access_final);
        const auto ct = dealer_pad.encrypt(r.message);
        channel.broadcast(ProtocolMessage{MessageType::ciphertext, dealer, std::nullopt,
                                          {{"key_offset", ct.key_offset},
                                           {"length", ct.bits.size()},
                                           {"ciphertext", to_hex(ct.bits)}}});
        const auto msg = channel.try_recv(speaker);
        Ciphertext got{msg->payload.at("key_offset").get<std::size_t>(),
                       from_hex(msg->payload.at("ciphertext").get<std::string>(),
                                msg->payload.at("length").get<std::size_t>())};
        r.ciphertext = ct;
        r.decrypted = access_pad.decrypt(got);
    }
    r.postproc_transcript = channel.transcript();
    r.status = RunStatus::completed;
    return r;
}

std::string qss_report(const ExperimentConfig& config, const QssRunResult& r) {
    const auto& s = r.session;
    std::string out = "command: qss-run\n";
    out += fmt::format("seed: {}\n", config.seed);
    out += fmt::format("mode: {}\n", basis_mode_name(config.mode));
    out += fmt::format("dealer: {}\n", party_name(config.dealer));
    out += fmt::format("visibility: {:.6f}\n", config.visibility);
    std::string modes;
    for (Party p : config.attacked_modes) modes += mode_label(p);
    out += fmt::format("attack: {}\n", modes.empty() ? "none" : modes);
    if (!modes.empty()) out += fmt::format("attack_fraction: {:.6f}\n", config.attack_fraction);
    out += fmt::format("windows: {}\n", s.windows);
    out += fmt::format("seconds: {:.1f}\n", s.seconds);
    out += fmt::format("detected_rounds: {}\n", s.detected);
    out += fmt::format("sifted_bits: {}\n", s.sifted.size());
    out += fmt::format("bell_pool: {}\n", s.bell_pool);
    out += fmt::format("sifted_parity_errors: {}\n", s.sifted.parity_errors(config.dealer));
    out += fmt::format("check: {}\n", check_kind_name(s.check.kind));
    out += fmt::format("check_sample_size: {}\n", s.check.sample_size);
    out += fmt::format("check_estimate: {:.6f}\n", s.check.estimate);
    out += fmt::format("check_standard_error: {:.6f}\n", s.check.standard_error);
    out += fmt::format("check_threshold: {:.6f}\n", s.check.threshold);
    out += fmt::format("verdict: {}\n", verdict_name(s.check.verdict));
    out += fmt::format("key_bits_after_check: {}\n", s.key.size());
    if (r.reconciliation) {
        const auto& rc = *r.reconciliation;
        out += fmt::format("reconcile_first_block: {}\n", rc.first_block_size);
        out += fmt::format("reconcile_passes: {}\n", rc.passes);
        out += fmt::format("reconcile_corrected: {}\n", rc.corrected_bits);
        out += fmt::format("reconcile_verified: {}\n", rc.verified);
    }
    if (r.status != RunStatus::check_abort) {
        out += fmt::format("leaked_bits: {}\n", r.leaked_bits);
        out += fmt::format("final_formula: {}\n", kFinalLengthFormula);
        out += fmt::format("final_error_rate: {:.6f}\n", r.error_rate);
        out += fmt::format("epsilon: {}\n", config.epsilon);
        out += fmt::format("final_key_bits: {}\n", r.final_length);
        out += fmt::format("final_keys_match: {}\n", r.keys_match());
    }
    if (r.ciphertext) {
        out += fmt::format("vernam_message_bits: {}\n", r.message.size());
        out += fmt::format("vernam_decrypted: {}\n", bits_to_text(r.decrypted));
        out += fmt::format("vernam_round_trip: {}\n", r.vernam_ok());
    }
    out += fmt::format("status: {}\n", run_status_name(r.status));
    return out;
}

std::string transcript_jsonl(const QssRunResult& r) {
    std::string out;
    auto emit = [&out](std::string_view stage, const std::vector<TranscriptEntry>& entries) {
        for (const auto& e : entries) {
            Json j;
            j["stage"] = stage;
            j["seq"] = e.sequence;
            Json to = Json::array();
            for (Party p : e.recipients) to.push_back(party_name(p));
            j["to"] = std::move(to);
            j["type"] = message_type_name(e.message.type);
            j["sender"] = party_name(e.message.sender);
            j["round"] = e.message.round ? Json(*e.message.round) : Json(nullptr);
            j["payload"] = e.message.payload;
            out += j.dump();
            out += '\n';
        }
    };
    emit("protocol", r.session.transcript);
    emit("postproc", r.postproc_transcript);
    return out;
}

// ----------------------------------------------------------- bell-test

BellTestResult run_bell_test(const ExperimentConfig& config) {
    ExperimentConfig c = config;
    c.mode = BasisMode::bell;
    c.validate();
    BellTestResult r;
    r.analytic = c.analytic;
    r.visibility = c.visibility;
    const BellSetting setting = BasisSchedule::bell().bell_setting();
    const double ideal = bell_S(setting, correlation_analytic);
    r.predicted = c.visibility * ideal;
    if (c.analytic) {
        const double v = c.visibility;
        r.report = bell_check_exact(
            setting, [v](double a, double b, double cc, double d) { return v * correlation_analytic(a, b, cc, d); },
            c.thresholds);
        return r;
    }
    const auto session = run_protocol(c.protocol_config());
    r.report = session.check;
    r.estimate = session.bell;
    r.pool = session.bell_pool;
    r.windows = session.windows;
    return r;
}

std::string bell_report_text(const BellTestResult& r) {
    std::string out = "command: bell-test\n";
    out += fmt::format("analytic: {}\n", r.analytic);
    out += fmt::format("visibility: {:.6f}\n", r.visibility);
    if (!r.analytic) {
        out += fmt::format("windows: {}\n", r.windows);
        out += fmt::format("bell_pool: {}\n", r.pool);
    }
    out += fmt::format("S: {:.6f}\n", r.report.estimate);
    out += fmt::format("standard_error: {:.6f}\n", r.report.standard_error);
    out += "classical_bound: 1\n";
    out += fmt::format("predicted_S: {:.6f}\n", r.predicted);
    out += fmt::format("threshold: {:.6f}\n", r.report.threshold);
    out += fmt::format("verdict: {}\n", verdict_name(r.report.verdict));
    return out;
}

std::string bell_csv(const BellTestResult& r) {
    const BellSetting setting = BasisSchedule::bell().bell_setting();
    std::string out = "combo,k_a,k_b,k_c,k_d,count,e_estimate,e_predicted\n";
    for (std::size_t combo = 0; combo < kNumPatterns; ++combo) {
        std::array<double, 4> phi{};
        std::array<unsigned, 4> k{};
        for (std::size_t p = 0; p < kNumParties; ++p) {
            k[p] = (combo >> (3 - p)) & 1U;
            phi[p] = setting.phases[p][k[p]];
        }
        const double pred = r.visibility * correlation_analytic(phi[0], phi[1], phi[2], phi[3]);
        const double est = r.estimate ? r.estimate->correlation[combo] : pred;
        const std::size_t count = r.estimate ? r.estimate->counts[combo] : 0;
        out += fmt::format("{},{},{},{},{},{},{:.6f},{:.6f}\n", combo, k[0] + 1, k[1] + 1, k[2] + 1, k[3] + 1,
                           count, est, pred);
    }
    return out;
}

// ------------------------------------------------------- file output

std::vector<std::filesystem::path> write_histogram_files(const ExperimentConfig& config,
                                                         const HistogramResult& r) {
    const auto dir = prepare_dir(config);
    write_text(dir / "histogram.csv", histogram_csv(r));
    write_text(dir / "histogram_report.txt", histogram_report(r));
    return {dir / "histogram.csv", dir / "histogram_report.txt"};
}

std::vector<std::filesystem::path> write_scan_files(const ExperimentConfig& config, const ScanResult& r) {
    const auto dir = prepare_dir(config);
    write_text(dir / "correlation_scan.csv", scan_csv(r));
    write_text(dir / "correlation_scan_report.txt", scan_report(r));
    return {dir / "correlation_scan.csv", dir / "correlation_scan_report.txt"};
}

std::vector<std::filesystem::path> write_qss_files(const ExperimentConfig& config, const QssRunResult& r) {
    const auto dir = prepare_dir(config);
    std::vector<std::filesystem::path> files;
    auto put = [&](const std::string& name, const std::string& text) {
        write_text(dir / name, text);
        files.push_back(dir / name);
    };
    put("session_report.txt", qss_report(config, r));
    std::ostringstream sifted;
    write_key_transcript(sifted, r.session.sifted, config.dealer);
    put("sifted_key.txt", sifted.str());
    put("transcript.jsonl", transcript_jsonl(r));
    if (r.status == RunStatus::completed) {
        const KeyMaterial dealer_key{KeyStage::final, r.dealer_final, r.leaked_bits, r.error_rate};
        const KeyMaterial access_key{KeyStage::final, r.access_final, r.leaked_bits, r.error_rate};
        std::ostringstream d, a;
        write_key_file(d, dealer_key, kFinalLengthFormula);
        write_key_file(a, access_key, kFinalLengthFormula);
        put("final_key_dealer.hex", d.str());
        put("final_key_access.hex", a.str());
        if (r.ciphertext) {
            std::ostringstream c;
            write_ciphertext_file(c, *r.ciphertext, r.leaked_bits, kFinalLengthFormula);
            put("ciphertext.hex", c.str());
        }
    }
    return files;
}

std::vector<std::filesystem::path> write_bell_files(const ExperimentConfig& config,
                                                    const BellTestResult& r) {
    const auto dir = prepare_dir(config);
    write_text(dir / "bell_report.txt", bell_report_text(r));
    write_text(dir / "bell_correlations.csv", bell_csv(r));
    return {dir / "bell_report.txt", dir / "bell_correlations.csv"};
}

}  // namespace qss
