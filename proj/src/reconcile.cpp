#include <algorithm>
#include <cmath>
#include <deque>
#include <optional>
#include <stdexcept>

#include "qss/postproc.hpp"

namespace qss {

namespace {

// Layout of one pass: key indices in pass order, cut into blocks of
// `block_size` consecutive positions.
struct PassLayout {
    std::size_t block_size = 0;
    std::vector<std::size_t> order;
    std::vector<std::size_t> position_of;  // inverse of order

    PassLayout(std::size_t n, std::size_t k, std::optional<std::uint64_t> perm_seed)
        : block_size(k) {
        if (perm_seed) {
            order = seeded_permutation(n, *perm_seed);
        } else {
            order.resize(n);
            for (std::size_t i = 0; i < n; ++i) order[i] = i;
        }
        position_of.resize(n);
        for (std::size_t pos = 0; pos < n; ++pos) position_of[order[pos]] = pos;
    }

    std::size_t num_blocks() const { return (order.size() + block_size - 1) / block_size; }
    std::size_t block_begin(std::size_t b) const { return b * block_size; }
    std::size_t block_end(std::size_t b) const {
        return std::min(order.size(), (b + 1) * block_size);
    }
    std::size_t block_of_index(std::size_t key_index) const {
        return position_of[key_index] / block_size;
    }

    std::uint8_t parity(const Bits& key, std::size_t begin, std::size_t end) const {
        std::uint8_t p = 0;
        for (std::size_t pos = begin; pos < end; ++pos) p ^= key[order[pos]];
        return p & 1U;
    }
};

Bits subset_parities(const Bits& key, std::uint64_t seed, std::size_t count) {
    Rng rng(seed);
    Bits out(count, 0);
    for (std::size_t s = 0; s < count; ++s) {
        std::uint8_t p = 0;
        for (std::size_t i = 0; i < key.size(); ++i) {
            if (rng() & 1U) p ^= key[i];
        }
        out[s] = p & 1U;
    }
    return out;
}

ProtocolMessage parity_message(Party sender, Json payload) {
    return ProtocolMessage{MessageType::parity_exchange, sender, std::nullopt, std::move(payload)};
}

// The dealer only ever answers with parities of its own key.
class DealerSide {
public:
    DealerSide(const Bits& key, Party self, Rng& rng) : key_(key), self_(self), rng_(rng) {}

    ProtocolMessage start_pass(std::size_t pass, std::size_t block_size) {
        std::optional<std::uint64_t> seed;
        if (pass > 0) seed = rng_();
        passes_.emplace_back(key_.size(), block_size, seed);
        const auto& layout = passes_.back();
        Json parities = Json::array();
        for (std::size_t b = 0; b < layout.num_blocks(); ++b) {
            parities.push_back(layout.parity(key_, layout.block_begin(b), layout.block_end(b)));
        }
        leaked_ += parities.size();
        return parity_message(self_, {{"kind", "pass"},
                                      {"pass", pass},
                                      {"block_size", block_size},
                                      {"perm_seed", seed ? Json(*seed) : Json(nullptr)},
                                      {"parities", std::move(parities)}});
    }

    ProtocolMessage answer(const ProtocolMessage& query) {
        Json parities = Json::array();
        for (const auto& r : query.payload.at("ranges")) {
            const auto& layout = passes_.at(r.at(0).get<std::size_t>());
            parities.push_back(layout.parity(key_, r.at(1).get<std::size_t>(), r.at(2).get<std::size_t>()));
        }
        leaked_ += parities.size();
        return parity_message(self_, {{"kind", "reply"}, {"parities", std::move(parities)}});
    }

    ProtocolMessage verify(std::size_t count) {
        const std::uint64_t seed = rng_();
        Json parities = Json::array();
        for (auto p : subset_parities(key_, seed, count)) parities.push_back(p);
        leaked_ += count;
        return parity_message(self_, {{"kind", "verify"}, {"seed", seed}, {"parities", std::move(parities)}});
    }

    std::size_t leaked() const { return leaked_; }

private:
    const Bits& key_;
    Party self_;
    Rng& rng_;
    std::vector<PassLayout> passes_;
    std::size_t leaked_ = 0;
};

// Holds the access set's combined key and corrects it in place.
class AccessSide {
public:
    AccessSide(Bits key, Party self) : key_(std::move(key)), self_(self) {}

    void on_pass(const ProtocolMessage& msg) {
        const auto& p = msg.payload;
        std::optional<std::uint64_t> seed;
        if (!p.at("perm_seed").is_null()) seed = p.at("perm_seed").get<std::uint64_t>();
        passes_.emplace_back(key_.size(), p.at("block_size").get<std::size_t>(), seed);
        dealer_block_parity_.emplace_back();
        for (const auto& bit : p.at("parities")) {
            dealer_block_parity_.back().push_back(bit.get<std::uint8_t>());
        }
        const std::size_t pass = passes_.size() - 1;
        for (std::size_t b = 0; b < passes_[pass].num_blocks(); ++b) {
            if (block_mismatch(pass, b)) pending_.push_back({pass, b});
        }
    }

    bool has_pending() const { return !pending_.empty(); }

    // Starts binary searches on every pending block of the oldest pending
    // pass. Blocks of one pass are disjoint, so their searches cannot
    // interfere with each other.
    void begin_wave() {
        searches_.clear();
        const std::size_t pass = pending_.front().pass;
        std::deque<PendingBlock> rest;
        std::vector<std::size_t> taken;
        for (const auto& pb : pending_) {
            if (pb.pass != pass) {
                rest.push_back(pb);
                continue;
            }
            // A flip since queuing may have repaired the block.
            if (!block_mismatch(pb.pass, pb.block)) continue;
            if (std::find(taken.begin(), taken.end(), pb.block) != taken.end()) continue;
            taken.push_back(pb.block);
            const auto& layout = passes_[pb.pass];
            searches_.push_back({pb.pass, layout.block_begin(pb.block), layout.block_end(pb.block)});
        }
        pending_ = std::move(rest);
    }

    bool searching() const {
        return std::any_of(searches_.begin(), searches_.end(),
                           [](const Search& s) { return s.end - s.begin > 1; });
    }

    ProtocolMessage query() const {
        Json ranges = Json::array();
        for (const auto& s : searches_) {
            if (s.end - s.begin <= 1) continue;
            ranges.push_back({s.pass, s.begin, midpoint(s)});
        }
        return parity_message(self_, {{"kind", "query"}, {"ranges", std::move(ranges)}});
    }

    void on_reply(const ProtocolMessage& msg) {
        const auto& parities = msg.payload.at("parities");
        std::size_t k = 0;
        for (auto& s : searches_) {
            if (s.end - s.begin <= 1) continue;
            const std::size_t mid = midpoint(s);
            const auto dealer = parities.at(k++).get<std::uint8_t>();
            if (passes_[s.pass].parity(key_, s.begin, mid) != dealer) {
                s.end = mid;
            } else {
                s.begin = mid;
            }
        }
    }

    // Flips the located errors and queues blocks of every pass whose parity
    // now disagrees with the dealer's.
    void finish_wave() {
        for (const auto& s : searches_) {
            const std::size_t idx = passes_[s.pass].order[s.begin];
            key_[idx] ^= 1U;
            ++corrected_;
            for (std::size_t q = 0; q < passes_.size(); ++q) {
                if (q == s.pass) continue;
                const std::size_t b = passes_[q].block_of_index(idx);
                if (block_mismatch(q, b)) pending_.push_back({q, b});
            }
        }
        searches_.clear();
    }

    ProtocolMessage check_verify(const ProtocolMessage& msg) {
        const auto seed = msg.payload.at("seed").get<std::uint64_t>();
        const auto& theirs = msg.payload.at("parities");
        const Bits ours = subset_parities(key_, seed, theirs.size());
        bool ok = true;
        for (std::size_t i = 0; i < ours.size(); ++i) ok &= ours[i] == theirs.at(i).get<std::uint8_t>();
        last_verify_ok_ = ok;
        return parity_message(self_, {{"kind", "verify_result"}, {"ok", ok}});
    }

    const Bits& key() const { return key_; }
    std::size_t corrected() const { return corrected_; }

private:
    struct PendingBlock {
        std::size_t pass;
        std::size_t block;
    };
    struct Search {
        std::size_t pass;
        std::size_t begin;
        std::size_t end;
    };

    static std::size_t midpoint(const Search& s) { return s.begin + (s.end - s.begin) / 2; }

    bool block_mismatch(std::size_t pass, std::size_t b) const {
        const auto& layout = passes_[pass];
        return layout.parity(key_, layout.block_begin(b), layout.block_end(b)) !=
               dealer_block_parity_[pass][b];
    }

    Bits key_;
    Party self_;
    std::vector<PassLayout> passes_;
    std::vector<Bits> dealer_block_parity_;
    std::deque<PendingBlock> pending_;
    std::vector<Search> searches_;
    std::size_t corrected_ = 0;
    bool last_verify_ok_ = false;
};

ProtocolMessage take(Channel& channel, Party who) {
    auto m = channel.try_recv(who);
    if (!m) throw std::logic_error("reconcile: expected a message in the inbox");
    return *m;
}

}  // namespace

void ReconcileConfig::validate() const {
    if (core_passes == 0) throw std::invalid_argument("reconcile: core_passes must be >= 1");
    if (pass_budget < core_passes) {
        throw std::invalid_argument("reconcile: pass_budget must be >= core_passes");
    }
    if (!(block_factor > 0.0)) throw std::invalid_argument("reconcile: block_factor must be > 0");
}

std::size_t first_block_size(std::size_t n, double qber_estimate, double block_factor) {
    if (n == 0) return 1;
    if (!(qber_estimate > 0.0)) return n;
    const double k = std::ceil(block_factor / qber_estimate);
    if (k >= static_cast<double>(n)) return n;
    return std::max<std::size_t>(1, static_cast<std::size_t>(k));
}

std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    Rng rng(seed);
    for (std::size_t i = n; i > 1; --i) {
        const auto j = static_cast<std::size_t>(uniform_index(rng, i));
        std::swap(perm[i - 1], perm[j]);
    }
    return perm;
}

ReconcileResult reconcile(const Bits& dealer_key, const Bits& access_key, double qber_estimate,
                          Channel& channel, Party dealer, Party access, Rng& dealer_rng,
                          const ReconcileConfig& config) {
    config.validate();
    if (dealer_key.size() != access_key.size()) {
        throw std::invalid_argument("reconcile: keys differ in length");
    }
    if (dealer == access) throw std::invalid_argument("reconcile: dealer cannot be the access party");

    const std::size_t n = dealer_key.size();
    ReconcileResult result;
    result.dealer_key = dealer_key;
    if (n == 0) {
        result.access_key = access_key;
        result.verified = true;
        return result;
    }

    DealerSide d(dealer_key, dealer, dealer_rng);
    AccessSide a(access_key, access);
    std::size_t block = first_block_size(n, qber_estimate, config.block_factor);
    result.first_block_size = block;

    for (std::size_t pass = 0; pass < config.pass_budget; ++pass) {
        channel.send(d.start_pass(pass, block), access);
        a.on_pass(take(channel, access));
        while (a.has_pending()) {
            a.begin_wave();
            while (a.searching()) {
                channel.send(a.query(), dealer);
                channel.send(d.answer(take(channel, dealer)), access);
                a.on_reply(take(channel, access));
            }
            a.finish_wave();
        }
        result.passes = pass + 1;
        block = std::min(n, block * 2);

        if (pass + 1 < config.core_passes) continue;
        channel.send(d.verify(config.verify_bits), access);
        channel.send(a.check_verify(take(channel, access)), dealer);
        const auto verdict = take(channel, dealer);
        if (verdict.payload.at("ok").get<bool>()) {
            result.verified = true;
            break;
        }
    }

    result.leaked_bits = d.leaked();
    if (!result.verified) {
        throw ReconciliationError("reconcile: keys still differ after " +
                                      std::to_string(config.pass_budget) + " passes",
                                  result.leaked_bits);
    }
    result.access_key = a.key();
    result.corrected_bits = a.corrected();
    return result;
}

}  // namespace qss
