#include "qss/channel.hpp"

#include <algorithm>
#include <array>
#include <istream>
#include <ostream>
#include <utility>

namespace qss {

namespace {

constexpr std::array<std::pair<MessageType, std::string_view>, 10> kTypeNames{{
    {MessageType::basis_announcement, "BasisAnnouncement"},
    {MessageType::detection_announcement, "DetectionAnnouncement"},
    {MessageType::sift_decision, "SiftDecision"},
    {MessageType::sample_request, "SampleRequest"},
    {MessageType::sample_reveal, "SampleReveal"},
    {MessageType::bell_reveal, "BellReveal"},
    {MessageType::parity_exchange, "ParityExchange"},
    {MessageType::hash_seed, "HashSeed"},
    {MessageType::ciphertext, "Ciphertext"},
    {MessageType::abort, "Abort"},
}};

std::optional<std::string> outcome_field_in(const ProtocolMessage& msg) {
    if (!msg.payload.is_object()) return std::nullopt;
    for (auto field : kOutcomeFields) {
        if (msg.payload.contains(std::string(field))) return std::string(field);
    }
    return std::nullopt;
}

}  // namespace

std::string_view message_type_name(MessageType type) noexcept {
    for (const auto& [t, name] : kTypeNames) {
        if (t == type) return name;
    }
    return "?";
}

std::optional<MessageType> parse_message_type(std::string_view name) noexcept {
    for (const auto& [t, n] : kTypeNames) {
        if (n == name) return t;
    }
    return std::nullopt;
}

bool may_carry_outcomes(MessageType type) noexcept {
    return type == MessageType::sample_reveal || type == MessageType::bell_reveal ||
           type == MessageType::parity_exchange;
}

void check_hygiene(const ProtocolMessage& msg) {
    if (may_carry_outcomes(msg.type)) return;
    if (auto field = outcome_field_in(msg)) {
        throw HygieneViolation(std::string(message_type_name(msg.type)) +
                               " must not carry field '" + *field + "'");
    }
}

DeliveryReceipt Channel::send(const ProtocolMessage& msg, Party to) {
    check_hygiene(msg);
    DeliveryReceipt receipt;
    {
        std::lock_guard lock(mu_);
        if (closed_) throw ChannelClosed();
        receipt = {transcript_.size(), msg.sender, to};
        transcript_.push_back({receipt.sequence, {to}, msg});
        inbox_[index_of(to)].push_back(msg);
    }
    cv_.notify_all();
    return receipt;
}

std::vector<DeliveryReceipt> Channel::broadcast(const ProtocolMessage& msg) {
    check_hygiene(msg);
    std::vector<DeliveryReceipt> receipts;
    {
        std::lock_guard lock(mu_);
        if (closed_) throw ChannelClosed();
        TranscriptEntry entry{transcript_.size(), {}, msg};
        for (Party p : kAllParties) {
            if (p == msg.sender) continue;
            entry.recipients.push_back(p);
            inbox_[index_of(p)].push_back(msg);
            receipts.push_back({entry.sequence, msg.sender, p});
        }
        transcript_.push_back(std::move(entry));
    }
    cv_.notify_all();
    return receipts;
}

std::optional<ProtocolMessage> Channel::try_recv(Party who) {
    std::lock_guard lock(mu_);
    auto& q = inbox_[index_of(who)];
    if (q.empty()) return std::nullopt;
    ProtocolMessage m = std::move(q.front());
    q.pop_front();
    return m;
}

std::optional<ProtocolMessage> Channel::recv(Party who, std::chrono::milliseconds timeout) {
    std::unique_lock lock(mu_);
    auto& q = inbox_[index_of(who)];
    cv_.wait_for(lock, timeout, [&] { return !q.empty() || closed_; });
    if (q.empty()) return std::nullopt;
    ProtocolMessage m = std::move(q.front());
    q.pop_front();
    return m;
}

std::size_t Channel::pending(Party who) const {
    std::lock_guard lock(mu_);
    return inbox_[index_of(who)].size();
}

void Channel::close() {
    {
        std::lock_guard lock(mu_);
        closed_ = true;
    }
    cv_.notify_all();
}

bool Channel::closed() const {
    std::lock_guard lock(mu_);
    return closed_;
}

std::vector<TranscriptEntry> Channel::transcript() const {
    std::lock_guard lock(mu_);
    return transcript_;
}

std::vector<std::uint8_t> encode_wire(const ProtocolMessage& msg) {
    Json obj;
    obj["type"] = message_type_name(msg.type);
    obj["sender"] = party_name(msg.sender);
    obj["round"] = msg.round ? Json(*msg.round) : Json(nullptr);
    obj["payload"] = msg.payload;
    const std::string body = obj.dump();
    const auto n = static_cast<std::uint32_t>(body.size());
    std::vector<std::uint8_t> frame;
    frame.reserve(body.size() + 4);
    for (int shift = 24; shift >= 0; shift -= 8) {
        frame.push_back(static_cast<std::uint8_t>((n >> static_cast<unsigned>(shift)) & 0xFFU));
    }
    frame.insert(frame.end(), body.begin(), body.end());
    return frame;
}

ProtocolMessage decode_wire(std::span<const std::uint8_t> frame) {
    if (frame.size() < 4) throw WireError("malformed frame: shorter than the length prefix");
    const std::uint32_t n = (std::uint32_t{frame[0]} << 24U) | (std::uint32_t{frame[1]} << 16U) |
                            (std::uint32_t{frame[2]} << 8U) | std::uint32_t{frame[3]};
    if (frame.size() - 4 != n) {
        throw WireError("length mismatch: prefix says " + std::to_string(n) + " bytes, frame has " +
                        std::to_string(frame.size() - 4));
    }
    Json obj;
    try {
        obj = Json::parse(frame.begin() + 4, frame.end());
    } catch (const Json::exception& e) {
        throw WireError(std::string("malformed frame: ") + e.what());
    }
    if (!obj.is_object() || !obj.contains("type") || !obj.contains("sender") ||
        !obj.contains("round") || !obj.contains("payload")) {
        throw WireError("malformed frame: missing field");
    }
    if (!obj["type"].is_string() || !obj["sender"].is_string()) {
        throw WireError("malformed frame: type and sender must be strings");
    }
    const auto type_name = obj["type"].get<std::string>();
    const auto type = parse_message_type(type_name);
    if (!type) throw WireError("unknown message type '" + type_name + "'");
    const auto sender = parse_party(obj["sender"].get<std::string>());
    if (!sender) throw WireError("unknown sender '" + obj["sender"].get<std::string>() + "'");

    ProtocolMessage msg;
    msg.type = *type;
    msg.sender = *sender;
    if (obj["round"].is_number_integer()) {
        msg.round = obj["round"].get<std::int64_t>();
    } else if (!obj["round"].is_null()) {
        throw WireError("malformed frame: round must be an integer or null");
    }
    msg.payload = std::move(obj["payload"]);
    return msg;
}

void write_frames(std::ostream& out, const std::vector<TranscriptEntry>& transcript) {
    for (const auto& e : transcript) {
        const auto frame = encode_wire(e.message);
        out.write(reinterpret_cast<const char*>(frame.data()),
                  static_cast<std::streamsize>(frame.size()));
    }
}

std::vector<ProtocolMessage> read_frames(std::istream& in) {
    std::vector<ProtocolMessage> msgs;
    while (true) {
        std::array<char, 4> prefix{};
        in.read(prefix.data(), 4);
        if (in.gcount() == 0) break;
        if (in.gcount() != 4) throw WireError("malformed frame: truncated length prefix");
        const std::uint32_t n = (std::uint32_t{static_cast<std::uint8_t>(prefix[0])} << 24U) |
                                (std::uint32_t{static_cast<std::uint8_t>(prefix[1])} << 16U) |
                                (std::uint32_t{static_cast<std::uint8_t>(prefix[2])} << 8U) |
                                std::uint32_t{static_cast<std::uint8_t>(prefix[3])};
        std::vector<std::uint8_t> frame(4 + static_cast<std::size_t>(n));
        std::copy(prefix.begin(), prefix.end(), frame.begin());
        in.read(reinterpret_cast<char*>(frame.data() + 4), static_cast<std::streamsize>(n));
        frame.resize(4 + static_cast<std::size_t>(in.gcount()));
        msgs.push_back(decode_wire(frame));
    }
    return msgs;
}

std::vector<HygieneFinding> audit_outcome_hygiene(std::span<const TranscriptEntry> transcript) {
    std::vector<HygieneFinding> findings;
    for (const auto& e : transcript) {
        if (may_carry_outcomes(e.message.type)) continue;
        if (auto field = outcome_field_in(e.message)) {
            findings.push_back({e.sequence, e.message.type, *field});
        }
    }
    return findings;
}

}  // namespace qss
