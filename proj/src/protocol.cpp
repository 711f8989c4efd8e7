#include "qss/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <numeric>
#include <ostream>

namespace qss {

std::string_view check_kind_name(CheckKind kind) noexcept {
    return kind == CheckKind::qber ? "QBER" : "Bell";
}

std::string_view verdict_name(Verdict verdict) noexcept {
    return verdict == Verdict::proceed ? "proceed" : "abort";
}

Bits SiftedKey::access_xor(Party dealer) const {
    Bits out(size(), 0);
    for (Party p : kAllParties) {
        if (p == dealer) continue;
        for (std::size_t i = 0; i < out.size(); ++i) out[i] ^= of(p)[i];
    }
    return out;
}

std::size_t SiftedKey::parity_errors(Party dealer) const {
    return hamming_distance(of(dealer), access_xor(dealer));
}

void SiftedKey::validate() const {
    for (const auto& b : bits) {
        if (b.size() != rounds.size()) throw std::invalid_argument("SiftedKey: unequal lengths");
    }
    for (std::size_t i = 1; i < rounds.size(); ++i) {
        if (rounds[i] <= rounds[i - 1]) {
            throw std::invalid_argument("SiftedKey: rounds must be strictly increasing");
        }
    }
}

SiftedKey SiftedKey::without_positions(std::span<const std::size_t> positions) const {
    SiftedKey out;
    std::size_t next = 0;
    for (std::size_t i = 0; i < size(); ++i) {
        if (next < positions.size() && positions[next] == i) {
            ++next;
            continue;
        }
        out.rounds.push_back(rounds[i]);
        for (std::size_t x = 0; x < kNumParties; ++x) out.bits[x].push_back(bits[x][i]);
    }
    return out;
}

// ------------------------------------------------------------- sifting

SiftResult sift(const Announcements& announcements, const BasisSchedule& schedule) {
    const auto& first = announcements[0];
    for (const auto& list : announcements) {
        if (list.size() != first.size()) {
            throw std::invalid_argument("sift: parties announced different numbers of rounds");
        }
    }
    SiftResult out;
    for (std::size_t i = 0; i < first.size(); ++i) {
        const auto round = first[i].round;
        const auto window = first[i].window;
        if (i > 0 && round <= first[i - 1].round) {
            throw std::invalid_argument("sift: announced rounds must be strictly increasing");
        }
        bool same = true;
        for (const auto& list : announcements) {
            if (list[i].round != round || list[i].window != window) {
                throw std::invalid_argument("sift: missing announcement for round " +
                                            std::to_string(round));
            }
            same &= list[i].basis == first[i].basis;
        }
        if (schedule.is_override(kOverrideParty, window)) {
            out.bell_rounds.push_back(round);
        } else if (same) {
            out.key_rounds.push_back(round);
        }
    }
    return out;
}

// -------------------------------------------------------------- checks

std::vector<std::size_t> choose_sample_positions(std::size_t n, double sample_fraction, Rng& rng) {
    if (!(sample_fraction > 0.0 && sample_fraction < 1.0)) {
        throw std::invalid_argument("sample_fraction must lie in (0, 1)");
    }
    const auto m = static_cast<std::size_t>(std::llround(sample_fraction * static_cast<double>(n)));
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < m; ++i) {
        const auto j = i + static_cast<std::size_t>(uniform_index(rng, n - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(m);
    std::sort(idx.begin(), idx.end());
    return idx;
}

CheckReport qber_report(const SiftedKey& key, Party dealer, std::span<const std::size_t> positions,
                        const Thresholds& thresholds) {
    if (positions.empty()) throw InsufficientStatistics("QBER check: empty sample");
    const Bits access = key.access_xor(dealer);
    std::size_t errors = 0;
    for (auto i : positions) errors += key.of(dealer).at(i) != access.at(i);
    CheckReport r;
    r.kind = CheckKind::qber;
    r.sample_size = positions.size();
    r.estimate = static_cast<double>(errors) / static_cast<double>(positions.size());
    r.standard_error = std::sqrt(r.estimate * (1.0 - r.estimate) / static_cast<double>(positions.size()));
    r.threshold = thresholds.max_qber;
    r.verdict = r.estimate <= thresholds.max_qber ? Verdict::proceed : Verdict::abort;
    return r;
}

namespace {

template <class T>
Json to_json_array(const std::vector<T>& v) {
    Json a = Json::array();
    for (auto x : v) a.push_back(x);
    return a;
}

template <class T>
std::vector<T> from_json_array(const Json& j) {
    std::vector<T> v;
    v.reserve(j.size());
    for (const auto& x : j) v.push_back(x.get<T>());
    return v;
}

ProtocolMessage message(MessageType type, Party sender, Json payload) {
    return ProtocolMessage{type, sender, std::nullopt, std::move(payload)};
}

}  // namespace

QberCheckResult estimate_qber(const SiftedKey& key, Party dealer, double sample_fraction, Rng& rng,
                              Channel& channel, const Thresholds& thresholds) {
    key.validate();
    if (key.size() == 0) throw InsufficientStatistics("QBER check: empty sifted key");
    const auto positions = choose_sample_positions(key.size(), sample_fraction, rng);
    if (positions.empty()) throw InsufficientStatistics("QBER check: empty sample");

    channel.broadcast(message(MessageType::sample_request, dealer,
                              {{"check", "qber"}, {"positions", to_json_array(positions)}}));
    SiftedKey revealed;
    revealed.rounds = key.rounds;
    revealed.bits[index_of(dealer)] = key.of(dealer);
    for (Party p : kAllParties) {
        if (p == dealer) continue;
        const auto req = channel.try_recv(p);
        Json bits = Json::array();
        for (auto i : from_json_array<std::size_t>(req->payload.at("positions"))) bits.push_back(key.of(p).at(i));
        channel.send(message(MessageType::sample_reveal, p, {{"bits", std::move(bits)}}), dealer);
    }
    // The dealer rebuilds the access XOR only at the sampled positions.
    for (Party p : kAllParties) {
        if (p == dealer) continue;
        revealed.bits[index_of(p)].assign(key.size(), 0);
    }
    while (auto m = channel.try_recv(dealer)) {
        if (m->type != MessageType::sample_reveal) continue;
        const auto bits = from_json_array<std::uint8_t>(m->payload.at("bits"));
        for (std::size_t k = 0; k < positions.size(); ++k) {
            revealed.bits[index_of(m->sender)][positions[k]] = bits.at(k);
        }
    }
    QberCheckResult out;
    out.report = qber_report(revealed, dealer, positions, thresholds);
    out.remaining = key.without_positions(positions);
    return out;
}

BellEstimate estimate_bell(std::span<const BellObservation> observations) {
    BellEstimate est;
    std::array<double, kNumPatterns> sum{};
    for (const auto& o : observations) {
        std::size_t combo = 0;
        for (auto s : o.setting) combo = (combo << 1U) | (s & 1U);
        ++est.counts[combo];
        sum[combo] += pattern_parity(o.outcome) ? -1.0 : 1.0;
    }
    for (std::size_t c = 0; c < kNumPatterns; ++c) {
        if (est.counts[c] == 0) {
            throw InsufficientStatistics("Bell check: no observation for setting combination " +
                                         std::to_string(c));
        }
        est.correlation[c] = sum[c] / static_cast<double>(est.counts[c]);
    }
    est.S = bell_S_from_table(est.correlation);
    const auto grad = bell_S_gradient(est.correlation);
    double var = 0.0;
    for (std::size_t c = 0; c < kNumPatterns; ++c) {
        const double e = est.correlation[c];
        var += grad[c] * grad[c] * (1.0 - e * e) / static_cast<double>(est.counts[c]);
    }
    est.standard_error = std::sqrt(var);
    return est;
}

CheckReport bell_report(double S, double standard_error, std::size_t sample_size,
                        const Thresholds& thresholds) {
    CheckReport r;
    r.kind = CheckKind::bell;
    r.sample_size = sample_size;
    r.estimate = S;
    r.standard_error = standard_error;
    r.threshold = thresholds.classical_bound + thresholds.bell_sigma_margin * standard_error;
    r.verdict = S > r.threshold ? Verdict::proceed : Verdict::abort;
    return r;
}

CheckReport bell_check(std::span<const BellObservation> observations, const Thresholds& thresholds) {
    const auto est = estimate_bell(observations);
    return bell_report(est.S, est.standard_error, observations.size(), thresholds);
}

CheckReport bell_check_exact(const BellSetting& setting, const CorrelationFn& correlation,
                             const Thresholds& thresholds) {
    return bell_report(bell_S(setting, correlation), 0.0, 0, thresholds);
}

// ------------------------------------------------- access structure

std::uint8_t reconstruct_dealer_bit(std::uint8_t x1, std::uint8_t x2, std::uint8_t x3) noexcept {
    return (x1 ^ x2 ^ x3) & 1U;
}

std::array<double, 2> semi_access_predictor(Party dealer, std::span<const Party> subset,
                                            std::span<const std::uint8_t> bits, double phi) {
    if (subset.empty()) throw std::invalid_argument("semi_access_predictor: empty subset");
    if (subset.size() != bits.size()) {
        throw std::invalid_argument("semi_access_predictor: one bit per subset member required");
    }
    std::array<bool, kNumParties> seen{};
    for (Party p : subset) {
        if (p == dealer) throw std::invalid_argument("semi_access_predictor: subset contains the dealer");
        if (seen[index_of(p)]) throw std::invalid_argument("semi_access_predictor: duplicate party");
        seen[index_of(p)] = true;
    }
    if (subset.size() >= kNumParties - 1) {
        throw std::invalid_argument(
            "semi_access_predictor: the full access set reconstructs exactly; use reconstruct_dealer_bit");
    }
    const auto dist = outcome_distribution(make_psi4_minus(), settings_from_phases(phi, phi, phi, phi));
    std::array<double, 2> joint{0.0, 0.0};
    for (std::size_t b = 0; b < kNumPatterns; ++b) {
        bool match = true;
        for (std::size_t k = 0; k < subset.size(); ++k) match &= pattern_bit(b, subset[k]) == (bits[k] & 1U);
        if (match) joint[pattern_bit(b, dealer)] += dist.probs[b];
    }
    const double norm = joint[0] + joint[1];
    if (norm <= 0.0) throw std::invalid_argument("semi_access_predictor: observed bits have probability zero");
    return {joint[0] / norm, joint[1] / norm};
}

// ------------------------------------------------------ party nodes

namespace {

struct LocalRound {
    std::uint64_t window = 0;
    std::uint8_t basis = 0;
    bool detected = false;
    std::uint8_t bit = 0;
};

struct NodeSettings {
    Party dealer;
    BasisSchedule schedule;
    double sample_fraction;
    Thresholds thresholds;
};

// One participant. It sees only its own measurement log and its inbox.
class PartyNode {
public:
    PartyNode(Party self, std::vector<LocalRound> log, const NodeSettings& settings, Rng rng)
        : self_(self), log_(std::move(log)), settings_(settings), rng_(rng) {}

    bool is_dealer() const { return self_ == settings_.dealer; }

    void start(Channel& ch) {
        if (is_dealer()) return;
        Json rounds = Json::array(), windows = Json::array(), bases = Json::array();
        for (std::size_t r = 0; r < log_.size(); ++r) {
            if (!log_[r].detected) continue;
            rounds.push_back(r);
            windows.push_back(log_[r].window);
            bases.push_back(log_[r].basis);
        }
        ch.send(message(MessageType::detection_announcement, self_, {{"rounds", rounds}}),
                settings_.dealer);
        ch.send(message(MessageType::basis_announcement, self_,
                        {{"rounds", rounds}, {"windows", windows}, {"bases", bases}}),
                settings_.dealer);
    }

    void handle(const ProtocolMessage& m, Channel& ch) {
        switch (m.type) {
            case MessageType::detection_announcement:
                detections_[index_of(m.sender)] = from_json_array<std::uint64_t>(m.payload.at("rounds"));
                break;
            case MessageType::basis_announcement: on_basis_announcement(m, ch); break;
            case MessageType::sift_decision:
                sift_.key_rounds = from_json_array<std::uint64_t>(m.payload.at("key_rounds"));
                sift_.bell_rounds = from_json_array<std::uint64_t>(m.payload.at("bell_rounds"));
                break;
            case MessageType::sample_request: on_sample_request(m, ch); break;
            case MessageType::sample_reveal:
            case MessageType::bell_reveal:
                reveals_[index_of(m.sender)] = from_json_array<std::uint8_t>(m.payload.at("bits"));
                if (++reveal_count_ == kNumParties - 1) evaluate_check(ch);
                break;
            case MessageType::abort: aborted_ = true; break;
            default: break;
        }
    }

    const std::optional<CheckReport>& report() const { return report_; }
    const std::optional<BellEstimate>& bell() const { return bell_; }
    const std::optional<std::string>& failure() const { return failure_; }
    const SiftResult& sift_result() const { return sift_; }
    const std::vector<std::size_t>& sample_positions() const { return positions_; }
    bool aborted() const { return aborted_; }

    /// This party's bits on the key rounds.
    Bits key_bits() const {
        Bits b;
        b.reserve(sift_.key_rounds.size());
        for (auto r : sift_.key_rounds) b.push_back(log_.at(r).bit);
        return b;
    }

private:
    void on_basis_announcement(const ProtocolMessage& m, Channel& ch) {
        auto& entries = announced_[index_of(m.sender)];
        const auto rounds = from_json_array<std::uint64_t>(m.payload.at("rounds"));
        const auto windows = from_json_array<std::uint64_t>(m.payload.at("windows"));
        const auto bases = from_json_array<std::uint8_t>(m.payload.at("bases"));
        if (rounds != detections_[index_of(m.sender)]) {
            failure_ = "basis and detection announcements of " + std::string(party_name(m.sender)) +
                       " disagree";
        }
        for (std::size_t i = 0; i < rounds.size(); ++i) entries.push_back({rounds[i], windows[i], bases[i]});
        if (++announcement_count_ < kNumParties - 1) return;

        auto& own = announced_[index_of(self_)];
        for (std::size_t r = 0; r < log_.size(); ++r) {
            if (log_[r].detected) own.push_back({r, log_[r].window, log_[r].basis});
        }
        sift_ = sift(announced_, settings_.schedule);
        ch.broadcast(message(MessageType::sift_decision, self_,
                             {{"key_rounds", to_json_array(sift_.key_rounds)},
                              {"bell_rounds", to_json_array(sift_.bell_rounds)}}));

        if (settings_.schedule.mode == BasisMode::qber) {
            positions_ = choose_sample_positions(sift_.key_rounds.size(), settings_.sample_fraction, rng_);
            if (positions_.empty()) {
                failure_ = "QBER check: sample is empty (" + std::to_string(sift_.key_rounds.size()) +
                           " sifted bits)";
                return;
            }
            ch.broadcast(message(MessageType::sample_request, self_,
                                 {{"check", "qber"}, {"positions", to_json_array(positions_)}}));
        } else {
            if (sift_.bell_rounds.empty()) {
                failure_ = "Bell check: the Bell pool is empty";
                return;
            }
            ch.broadcast(message(MessageType::sample_request, self_, {{"check", "bell"}}));
        }
    }

    void on_sample_request(const ProtocolMessage& m, Channel& ch) {
        Json bits = Json::array();
        if (m.payload.at("check") == "qber") {
            positions_ = from_json_array<std::size_t>(m.payload.at("positions"));
            for (auto i : positions_) bits.push_back(log_.at(sift_.key_rounds.at(i)).bit);
            ch.send(message(MessageType::sample_reveal, self_, {{"bits", std::move(bits)}}), m.sender);
        } else {
            for (auto r : sift_.bell_rounds) bits.push_back(log_.at(r).bit);
            ch.send(message(MessageType::bell_reveal, self_, {{"bits", std::move(bits)}}), m.sender);
        }
    }

    void evaluate_check(Channel& ch) {
        try {
            if (settings_.schedule.mode == BasisMode::qber) {
                SiftedKey sample;
                sample.rounds.resize(positions_.size());
                std::iota(sample.rounds.begin(), sample.rounds.end(), std::uint64_t{0});
                for (Party p : kAllParties) {
                    auto& b = sample.bits[index_of(p)];
                    if (p == self_) {
                        for (auto i : positions_) b.push_back(log_.at(sift_.key_rounds[i]).bit);
                    } else {
                        b = reveals_[index_of(p)];
                    }
                }
                std::vector<std::size_t> all(positions_.size());
                std::iota(all.begin(), all.end(), std::size_t{0});
                report_ = qber_report(sample, self_, all, settings_.thresholds);
            } else {
                std::map<std::uint64_t, std::array<std::uint8_t, kNumParties>> setting_of;
                for (Party p : kAllParties) {
                    for (const auto& e : announced_[index_of(p)]) setting_of[e.round][index_of(p)] = e.basis;
                }
                std::vector<BellObservation> obs;
                obs.reserve(sift_.bell_rounds.size());
                for (std::size_t k = 0; k < sift_.bell_rounds.size(); ++k) {
                    const auto r = sift_.bell_rounds[k];
                    BellObservation o;
                    o.setting = setting_of.at(r);
                    unsigned pattern = 0;
                    for (Party p : kAllParties) {
                        const auto bit = p == self_ ? log_.at(r).bit : reveals_[index_of(p)].at(k);
                        pattern = (pattern << 1U) | (bit & 1U);
                    }
                    o.outcome = static_cast<std::uint8_t>(pattern);
                    obs.push_back(o);
                }
                bell_ = estimate_bell(obs);
                report_ = bell_report(bell_->S, bell_->standard_error, obs.size(), settings_.thresholds);
            }
        } catch (const InsufficientStatistics& e) {
            failure_ = e.what();
            return;
        }
        if (report_->verdict == Verdict::abort) {
            aborted_ = true;
            ch.broadcast(message(MessageType::abort, self_,
                                 {{"check", check_kind_name(report_->kind)},
                                  {"estimate", report_->estimate},
                                  {"threshold", report_->threshold}}));
        }
    }

    Party self_;
    std::vector<LocalRound> log_;
    NodeSettings settings_;
    Rng rng_;

    std::array<std::vector<std::uint64_t>, kNumParties> detections_{};
    Announcements announced_{};
    std::size_t announcement_count_ = 0;
    SiftResult sift_;
    std::vector<std::size_t> positions_;
    std::array<Bits, kNumParties> reveals_{};
    std::size_t reveal_count_ = 0;
    std::optional<CheckReport> report_;
    std::optional<BellEstimate> bell_;
    std::optional<std::string> failure_;
    bool aborted_ = false;
};

// Round-robin by party id: each pass gives every party one message.
void run_deterministic(std::array<std::unique_ptr<PartyNode>, kNumParties>& nodes, Channel& ch) {
    for (auto& n : nodes) n->start(ch);
    bool progressed = true;
    while (progressed) {
        progressed = false;
        for (Party p : kAllParties) {
            if (auto m = ch.try_recv(p)) {
                nodes[index_of(p)]->handle(*m, ch);
                progressed = true;
            }
        }
    }
}

}  // namespace

SessionResult run_protocol_on_records(const ProtocolConfig& config,
                                      const std::vector<RoundRecord>& records) {
    const RngStreams streams(config.seed);
    const NodeSettings settings{config.dealer, config.session.schedule, config.sample_fraction,
                                config.thresholds};

    std::array<std::vector<LocalRound>, kNumParties> logs{};
    SessionResult result;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (r.round_index != i) throw std::invalid_argument("records must be numbered 0, 1, 2, ...");
        result.detected += r.detected();
        for (Party p : kAllParties) {
            logs[index_of(p)].push_back({r.window_index, r.basis[index_of(p)], r.detected(),
                                         static_cast<std::uint8_t>(r.bit(p))});
        }
    }
    result.windows = records.empty() ? 0 : records.back().window_index + 1;
    result.seconds = session_seconds(result.windows, config.session.source);

    std::array<std::unique_ptr<PartyNode>, kNumParties> nodes;
    for (Party p : kAllParties) {
        nodes[index_of(p)] = std::make_unique<PartyNode>(
            p, std::move(logs[index_of(p)]), settings,
            streams.stream("dealer." + std::string(party_name(p))));
    }
    Channel channel;
    run_deterministic(nodes, channel);
    result.transcript = channel.transcript();

    const PartyNode& dealer = *nodes[index_of(config.dealer)];
    if (dealer.failure()) throw InsufficientStatistics(*dealer.failure());
    if (!dealer.report()) throw std::logic_error("run_protocol: the check never completed");

    result.check = *dealer.report();
    result.bell = dealer.bell();
    result.bell_pool = dealer.sift_result().bell_rounds.size();
    result.sifted.rounds = dealer.sift_result().key_rounds;
    for (Party p : kAllParties) result.sifted.bits[index_of(p)] = nodes[index_of(p)]->key_bits();
    result.key = config.session.schedule.mode == BasisMode::qber
                     ? result.sifted.without_positions(dealer.sample_positions())
                     : result.sifted;
    result.status = result.check.verdict == Verdict::proceed ? SessionStatus::completed
                                                             : SessionStatus::aborted;
    return result;
}

SessionResult run_protocol(const ProtocolConfig& config) {
    const RngStreams streams(config.seed);
    std::vector<RoundRecord> records;
    if (config.target_sifted_bits) {
        SessionRunner runner(config.session, streams);
        std::size_t key_rounds = 0;
        const auto& schedule = config.session.schedule;
        while (key_rounds < *config.target_sifted_bits) {
            if (runner.windows() >= config.max_windows) {
                throw InsufficientStatistics("run_protocol: window limit reached before the target key length");
            }
            const std::size_t before = records.size();
            runner.run_window(records);
            for (std::size_t i = before; i < records.size(); ++i) {
                const auto& r = records[i];
                if (r.detected() && r.all_bases_equal() &&
                    !schedule.is_override(kOverrideParty, r.window_index) &&
                    ++key_rounds == *config.target_sifted_bits) {
                    // Later events of this window are not registered.
                    records.resize(i + 1);
                    break;
                }
            }
        }
    } else {
        records = run_session(config.n_windows, config.session, streams);
    }
    return run_protocol_on_records(config, records);
}

void write_key_transcript(std::ostream& out, const SiftedKey& key, Party dealer,
                          std::size_t bits_per_block) {
    if (bits_per_block == 0) throw std::invalid_argument("bits_per_block must be positive");
    const Bits xs = key.access_xor(dealer);
    out << "# dealer=" << party_name(dealer) << " bits=" << key.size()
        << " errors=" << key.parity_errors(dealer) << '\n';
    for (std::size_t start = 0; start < key.size(); start += bits_per_block) {
        const std::size_t end = std::min(key.size(), start + bits_per_block);
        out << "# bits " << start << '-' << end - 1 << '\n';
        for (Party p : kAllParties) {
            out << "x_" << static_cast<char>('A' + index_of(p)) << "  ";
            for (std::size_t i = start; i < end; ++i) out << static_cast<char>('0' + key.of(p)[i]);
            out << '\n';
        }
        out << "x_AS ";
        for (std::size_t i = start; i < end; ++i) out << static_cast<char>('0' + xs[i]);
        out << "\n\n";
    }
}

}  // namespace qss
