#include <doctest.h>

#include <random>
#include <sstream>
#include <thread>

#include "qss/channel.hpp"

using namespace qss;

namespace {

ProtocolMessage msg(MessageType t, Party from, std::int64_t round, Json payload = Json::object()) {
    return ProtocolMessage{t, from, round, std::move(payload)};
}

ProtocolMessage random_message(std::mt19937_64& gen) {
    std::uniform_int_distribution<int> type_d(0, 9), party_d(0, 3), len_d(0, 20), bit_d(0, 1);
    ProtocolMessage m;
    m.type = static_cast<MessageType>(type_d(gen));
    m.sender = party_at(static_cast<std::size_t>(party_d(gen)));
    if (bit_d(gen)) m.round = std::uniform_int_distribution<std::int64_t>(0, 1'000'000)(gen);
    Json ints = Json::array();
    for (int i = 0, n = len_d(gen); i < n; ++i) ints.push_back(len_d(gen));
    m.payload["indices"] = ints;
    m.payload["note"] = std::string(static_cast<std::size_t>(len_d(gen)), 'x');
    if (may_carry_outcomes(m.type)) {
        Json bits = Json::array();
        for (int i = 0, n = len_d(gen); i < n; ++i) bits.push_back(bit_d(gen));
        m.payload["bits"] = bits;
    }
    return m;
}

}  // namespace

TEST_CASE("point-to-point delivery") {
    Channel ch;
    const auto m = msg(MessageType::basis_announcement, Party::bob, 3, {{"bases", {0, 1, 1}}});
    const auto r = ch.send(m, Party::alice);
    CHECK(r.from == Party::bob);
    CHECK(r.to == Party::alice);
    CHECK(ch.pending(Party::alice) == 1);
    CHECK(ch.try_recv(Party::alice) == m);
    CHECK_FALSE(ch.try_recv(Party::alice).has_value());

    SUBCASE("FIFO per sender") {
        ch.send(msg(MessageType::hash_seed, Party::bob, 1), Party::alice);
        ch.send(msg(MessageType::hash_seed, Party::bob, 2), Party::alice);
        CHECK(ch.try_recv(Party::alice)->round == 1);
        CHECK(ch.try_recv(Party::alice)->round == 2);
    }
    SUBCASE("closed channel rejects sends") {
        ch.close();
        CHECK(ch.closed());
        CHECK_THROWS_AS(ch.send(m, Party::alice), ChannelClosed);
        CHECK_THROWS_AS(ch.broadcast(m), ChannelClosed);
    }
}

TEST_CASE("broadcast") {
    Channel ch;
    const auto ct = msg(MessageType::ciphertext, Party::alice, 0,
                        {{"ciphertext_hex", "a5"}});
    CHECK(ch.broadcast(ct).size() == 3);
    CHECK(ch.pending(Party::alice) == 0);
    for (Party p : {Party::bob, Party::claire, Party::david}) {
        CHECK(ch.pending(p) == 1);
        CHECK(ch.try_recv(p) == ct);
    }
    ch.broadcast(msg(MessageType::hash_seed, Party::bob, 0));
    CHECK(ch.pending(Party::bob) == 0);
    CHECK(ch.pending(Party::alice) == 1);

    SUBCASE("interleaved broadcasts keep each sender's order") {
        Channel c2;
        for (int i = 0; i < 5; ++i) {
            c2.broadcast(msg(MessageType::hash_seed, Party::alice, i));
            c2.broadcast(msg(MessageType::hash_seed, Party::bob, 100 + i));
        }
        std::int64_t last_a = -1, last_b = 99;
        while (auto m = c2.try_recv(Party::claire)) {
            if (m->sender == Party::alice) {
                CHECK(*m->round == last_a + 1);
                last_a = *m->round;
            } else {
                CHECK(*m->round == last_b + 1);
                last_b = *m->round;
            }
        }
        CHECK(last_a == 4);
        CHECK(last_b == 104);
    }
    CHECK(ch.transcript().size() == 2);
    CHECK(ch.transcript()[0].recipients.size() == 3);
}

TEST_CASE("outcome hygiene") {
    Channel ch;
    CHECK_THROWS_AS(ch.send(msg(MessageType::basis_announcement, Party::bob, 0, {{"bits", {1}}}),
                            Party::alice),
                    HygieneViolation);
    CHECK_NOTHROW(ch.send(msg(MessageType::sample_reveal, Party::bob, 0, {{"bits", {1}}}), Party::alice));
    CHECK_NOTHROW(ch.send(msg(MessageType::parity_exchange, Party::alice, 0, {{"parities", {1}}}),
                          Party::bob));
    CHECK(audit_outcome_hygiene(ch.transcript()).empty());

    std::vector<TranscriptEntry> forged{
        {0, {Party::alice}, msg(MessageType::detection_announcement, Party::bob, 0, {{"outcomes", {1}}})},
        {1, {Party::alice}, msg(MessageType::bell_reveal, Party::bob, 0, {{"bits", {1}}})},
    };
    const auto findings = audit_outcome_hygiene(forged);
    REQUIRE(findings.size() == 1);
    CHECK(findings[0].sequence == 0);
    CHECK(findings[0].field == "outcomes");
}

TEST_CASE("wire format") {
    const auto m = msg(MessageType::sift_decision, Party::alice, 7, {{"key_rounds", {1, 5, 9}}});
    const auto frame = encode_wire(m);
    const std::string body(frame.begin() + 4, frame.end());
    CHECK(frame[0] == 0);
    CHECK((std::size_t{frame[2]} << 8U | frame[3]) == body.size());
    CHECK(body == R"({"payload":{"key_rounds":[1,5,9]},"round":7,"sender":"Alice","type":"SiftDecision"})");
    CHECK(decode_wire(frame) == m);

    SUBCASE("null round") {
        auto n = m;
        n.round.reset();
        CHECK(decode_wire(encode_wire(n)) == n);
    }
    SUBCASE("truncated frame") {
        auto cut = frame;
        cut.pop_back();
        CHECK_THROWS_WITH_AS(decode_wire(cut), doctest::Contains("length mismatch"), WireError);
        CHECK_THROWS_AS(decode_wire(std::span(frame).first(3)), WireError);
    }
    SUBCASE("unknown type is named") {
        const std::string body2 = R"({"type":"Gossip","sender":"Bob","round":null,"payload":{}})";
        std::vector<std::uint8_t> f{0, 0, 0, static_cast<std::uint8_t>(body2.size())};
        f.insert(f.end(), body2.begin(), body2.end());
        CHECK_THROWS_WITH_AS(decode_wire(f), doctest::Contains("Gossip"), WireError);
    }
    SUBCASE("not JSON") {
        const std::string junk = "{not json";
        std::vector<std::uint8_t> f{0, 0, 0, static_cast<std::uint8_t>(junk.size())};
        f.insert(f.end(), junk.begin(), junk.end());
        CHECK_THROWS_AS(decode_wire(f), WireError);
    }
    SUBCASE("round trip over random messages") {
        std::mt19937_64 gen(404);
        for (int i = 0; i < 500; ++i) {
            const auto r = random_message(gen);
            CHECK(decode_wire(encode_wire(r)) == r);
        }
    }
    SUBCASE("frame stream") {
        Channel ch;
        std::mt19937_64 gen(405);
        for (int i = 0; i < 20; ++i) ch.send(random_message(gen), Party::alice);
        std::stringstream ss;
        write_frames(ss, ch.transcript());
        const auto back = read_frames(ss);
        const auto tr = ch.transcript();
        REQUIRE(back.size() == tr.size());
        for (std::size_t i = 0; i < back.size(); ++i) CHECK(back[i] == tr[i].message);
    }
}

TEST_CASE("concurrent producers and consumers") {
    Channel ch;
    constexpr int kPerSender = 2000;
    std::vector<std::thread> producers;
    for (Party from : {Party::bob, Party::claire, Party::david}) {
        producers.emplace_back([&ch, from] {
            for (int i = 0; i < kPerSender; ++i) {
                ch.send(msg(MessageType::detection_announcement, from, i), Party::alice);
            }
        });
    }
    std::array<std::int64_t, 4> last{-1, -1, -1, -1};
    int received = 0;
    std::thread consumer([&] {
        while (received < 3 * kPerSender) {
            auto m = ch.recv(Party::alice, std::chrono::milliseconds(2000));
            if (!m) break;
            auto& l = last[index_of(m->sender)];
            CHECK(*m->round == l + 1);
            l = *m->round;
            ++received;
        }
    });
    for (auto& t : producers) t.join();
    consumer.join();
    CHECK(received == 3 * kPerSender);
}
