#pragma once

// Authenticated classical channel between the four parties: typed
// messages, per-party inboxes with per-sender FIFO order, a transcript of
// everything sent, and a length-prefixed JSON wire format.

#include <array>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <iosfwd>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "qss/party.hpp"

namespace qss {

using Json = nlohmann::json;

enum class MessageType {
    basis_announcement,
    detection_announcement,
    sift_decision,
    sample_request,
    sample_reveal,
    bell_reveal,
    parity_exchange,
    hash_seed,
    ciphertext,
    abort,
};

/// Wire name, e.g. "BasisAnnouncement".
std::string_view message_type_name(MessageType type) noexcept;
std::optional<MessageType> parse_message_type(std::string_view name) noexcept;

/// Payload fields that carry measurement outcomes or values derived from them.
inline constexpr std::string_view kOutcomeFields[] = {"bits", "outcomes", "parities"};

/// True for the message types allowed to carry outcome fields.
bool may_carry_outcomes(MessageType type) noexcept;

struct ProtocolMessage {
    MessageType type = MessageType::abort;
    Party sender = Party::alice;
    /// Round index, or the first bit index for range-addressed messages.
    std::optional<std::int64_t> round;
    Json payload = Json::object();

    bool operator==(const ProtocolMessage&) const = default;
};

class ChannelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ChannelClosed : public ChannelError {
public:
    ChannelClosed() : ChannelError("channel is closed") {}
};

/// Raised when a message would put outcome data into a public field.
class HygieneViolation : public ChannelError {
public:
    using ChannelError::ChannelError;
};

class WireError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Throws HygieneViolation if `msg` carries outcome fields it must not.
void check_hygiene(const ProtocolMessage& msg);

struct DeliveryReceipt {
    std::uint64_t sequence = 0;  ///< position in the channel transcript
    Party from = Party::alice;
    Party to = Party::alice;
};

struct TranscriptEntry {
    std::uint64_t sequence = 0;
    std::vector<Party> recipients;
    ProtocolMessage message;
};

/// In-process channel. Safe for concurrent senders and receivers; each
/// party's inbox must only be drained by that party.
class Channel {
public:
    Channel() = default;
    Channel(const Channel&) = delete;
    Channel& operator=(const Channel&) = delete;

    DeliveryReceipt send(const ProtocolMessage& msg, Party to);

    /// Delivers to every party except the sender.
    std::vector<DeliveryReceipt> broadcast(const ProtocolMessage& msg);

    /// Next message in `who`'s inbox, if any.
    std::optional<ProtocolMessage> try_recv(Party who);

    /// Blocks until a message arrives, the channel closes, or the timeout
    /// passes. Returns nothing on timeout or close with an empty inbox.
    std::optional<ProtocolMessage> recv(Party who, std::chrono::milliseconds timeout);

    std::size_t pending(Party who) const;

    void close();
    bool closed() const;

    std::vector<TranscriptEntry> transcript() const;

private:
    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::array<std::deque<ProtocolMessage>, kNumParties> inbox_{};
    std::vector<TranscriptEntry> transcript_;
    bool closed_ = false;
};

/// Frame: 4-byte big-endian payload length followed by a UTF-8 JSON object
/// {"type", "sender", "round", "payload"}.
std::vector<std::uint8_t> encode_wire(const ProtocolMessage& msg);

/// Decodes exactly one frame. Throws WireError on malformed frames, unknown
/// message types, or a length prefix that does not match the frame size.
ProtocolMessage decode_wire(std::span<const std::uint8_t> frame);

/// Writes the transcript as consecutive frames.
void write_frames(std::ostream& out, const std::vector<TranscriptEntry>& transcript);
std::vector<ProtocolMessage> read_frames(std::istream& in);

struct HygieneFinding {
    std::uint64_t sequence = 0;
    MessageType type = MessageType::abort;
    std::string field;
};

/// Scans a transcript for outcome fields outside SampleReveal, BellReveal
/// and ParityExchange payloads.
std::vector<HygieneFinding> audit_outcome_hygiene(std::span<const TranscriptEntry> transcript);

}  // namespace qss
