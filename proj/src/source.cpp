#include "qss/source.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace qss {

SourceConfig SourceConfig::lab_detectors() {
    SourceConfig c;
    c.detector_efficiency = 0.4;
    return c;
}

void SourceConfig::validate() const {
    if (!(four_photon_rate >= 0.0)) throw std::invalid_argument("four_photon_rate must be >= 0");
    if (!(window_seconds > 0.0)) throw std::invalid_argument("window_seconds must be > 0");
    if (!(detector_efficiency >= 0.0 && detector_efficiency <= 1.0)) {
        throw std::invalid_argument("detector_efficiency must lie in [0, 1]");
    }
    if (!(dead_time_seconds >= 0.0)) throw std::invalid_argument("dead_time_seconds must be >= 0");
}

double SourceConfig::detection_probability() const noexcept {
    const double p_event = 1.0 - std::exp(-four_photon_rate * window_seconds);
    return p_event * std::pow(detector_efficiency, 4.0);
}

bool RoundRecord::all_bases_equal() const noexcept {
    return basis[0] == basis[1] && basis[1] == basis[2] && basis[2] == basis[3];
}

unsigned RoundRecord::bit(Party p) const noexcept {
    return outcome ? pattern_bit(*outcome, p) : 0U;
}

std::uint8_t sample_outcome(const OutcomeDistribution& dist, Rng& rng) {
    const double u = uniform01(rng) * dist.total();
    double cdf = 0.0;
    std::uint8_t last_nonzero = 0;
    for (std::size_t b = 0; b < kNumPatterns; ++b) {
        if (dist.probs[b] <= 0.0) continue;
        cdf += dist.probs[b];
        last_nonzero = static_cast<std::uint8_t>(b);
        if (u < cdf) return last_nonzero;
    }
    return last_nonzero;
}

namespace {

bool all_photons_survive(const SourceConfig& config, Rng& rng) {
    if (config.detector_efficiency >= 1.0) return true;
    bool ok = true;
    for (std::size_t i = 0; i < kNumParties; ++i) ok &= bernoulli(rng, config.detector_efficiency);
    return ok;
}

}  // namespace

std::optional<std::uint8_t> sample_window(const SourceConfig& config,
                                          const OutcomeDistribution& dist, Rng& rng) {
    const auto n = poisson(rng, config.four_photon_rate * config.window_seconds);
    if (n == 0 || !all_photons_survive(config, rng)) return std::nullopt;
    return sample_outcome(dist, rng);
}

SessionRunner::SessionRunner(SessionSpec spec, const RngStreams& streams)
    : spec_(std::move(spec)),
      source_rng_(streams.stream("source")),
      eve_rng_(streams.stream("eve")) {
    spec_.source.validate();
    spec_.noise.validate();
    spec_.attack.validate();
    for (Party p : kAllParties) {
        basis_rng_[index_of(p)] = streams.stream("basis." + std::string(party_name(p)));
    }
}

std::optional<std::uint8_t> SessionRunner::register_event(const Settings& settings,
                                                          std::size_t cache_key) {
    if (!all_photons_survive(spec_.source, source_rng_)) return std::nullopt;
    if (spec_.attack.active()) {
        const PureState forwarded = apply_intercept_resend(spec_.state, spec_.attack, eve_rng_);
        return sample_outcome(outcome_distribution(forwarded, settings, spec_.noise), source_rng_);
    }
    auto& dist = cache_[cache_key];
    if (!dist) dist = outcome_distribution(spec_.state, settings, spec_.noise);
    return sample_outcome(*dist, source_rng_);
}

void SessionRunner::run_window(std::vector<RoundRecord>& out) {
    const std::uint64_t w = window_++;
    RoundRecord base;
    base.window_index = w;
    Settings settings{};
    std::size_t key = 0;
    for (Party p : kAllParties) {
        const auto x = index_of(p);
        base.basis[x] = static_cast<std::uint8_t>(uniform_index(basis_rng_[x], 2));
        base.phase[x] = spec_.schedule.phases_for(p, w)[base.basis[x]];
        settings[x].phi = base.phase[x];
        key = (key << 1U) | base.basis[x];
    }
    if (spec_.schedule.is_override(kOverrideParty, w)) key |= 16U;

    const double mean = spec_.source.four_photon_rate * spec_.source.window_seconds;
    const auto n_events = poisson(source_rng_, mean);
    const std::uint64_t considered =
        spec_.source.first_event_only ? std::min<std::uint64_t>(n_events, 1) : n_events;

    bool any = false;
    std::uint32_t event = 0;
    for (std::uint64_t e = 0; e < considered; ++e) {
        auto outcome = register_event(settings, key);
        if (!outcome) continue;
        RoundRecord r = base;
        r.round_index = out.size();
        r.event_index = event++;
        r.outcome = outcome;
        out.push_back(r);
        any = true;
    }
    if (!any) {
        base.round_index = out.size();
        out.push_back(base);
    }
}

std::vector<RoundRecord> run_session(std::uint64_t n_windows, const SessionSpec& spec,
                                     const RngStreams& streams) {
    SessionRunner runner(spec, streams);
    std::vector<RoundRecord> records;
    records.reserve(static_cast<std::size_t>(n_windows));
    for (std::uint64_t w = 0; w < n_windows; ++w) runner.run_window(records);
    return records;
}

double session_seconds(std::uint64_t n_windows, const SourceConfig& config) noexcept {
    return static_cast<double>(n_windows) * (config.window_seconds + config.dead_time_seconds);
}

void write_records(std::ostream& out, const std::vector<RoundRecord>& records) {
    out << "# qss-records v1\n"
        << "# round window event basis_a basis_b basis_c basis_d phase_a phase_b phase_c phase_d"
           " outcome\n";
    char buf[64];
    for (const auto& r : records) {
        out << r.round_index << ' ' << r.window_index << ' ' << r.event_index;
        for (auto b : r.basis) out << ' ' << static_cast<unsigned>(b);
        for (double ph : r.phase) {
            std::snprintf(buf, sizeof buf, " %.17g", ph);
            out << buf;
        }
        out << ' ';
        if (r.outcome) {
            for (Party p : kAllParties) out << pattern_bit(*r.outcome, p);
        } else {
            out << '-';
        }
        out << '\n';
    }
}

std::vector<RoundRecord> read_records(std::istream& in) {
    std::vector<RoundRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        RoundRecord r;
        std::string outcome;
        ls >> r.round_index >> r.window_index >> r.event_index;
        for (auto& b : r.basis) {
            unsigned v = 2;
            ls >> v;
            if (v > 1) throw std::runtime_error("record line " + std::to_string(line_no) + ": bad basis");
            b = static_cast<std::uint8_t>(v);
        }
        for (auto& ph : r.phase) ls >> ph;
        ls >> outcome;
        if (!ls) throw std::runtime_error("record line " + std::to_string(line_no) + ": truncated");
        if (outcome != "-") {
            if (outcome.size() != 4 || outcome.find_first_not_of("01") != std::string::npos) {
                throw std::runtime_error("record line " + std::to_string(line_no) + ": bad outcome");
            }
            r.outcome = static_cast<std::uint8_t>(pattern_from_label(outcome));
        }
        records.push_back(r);
    }
    return records;
}

}  // namespace qss
