#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "qss/postproc.hpp"

namespace qss {

std::string_view key_stage_name(KeyStage stage) noexcept {
    switch (stage) {
        case KeyStage::sifted: return "sifted";
        case KeyStage::reconciled: return "reconciled";
        case KeyStage::final: return "final";
    }
    return "?";
}

KeyMaterial KeyMaterial::advance(KeyStage next, Bits new_bits, std::size_t extra_leak) const {
    if (static_cast<int>(next) <= static_cast<int>(stage)) {
        throw std::logic_error("KeyMaterial: stages only move forward");
    }
    KeyMaterial k = *this;
    k.stage = next;
    k.bits = std::move(new_bits);
    k.leaked_bits += extra_leak;
    return k;
}

double binary_entropy(double p) {
    if (p <= 0.0 || p >= 1.0) return 0.0;
    return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

std::size_t final_key_length(std::size_t n, double qber, std::size_t leaked_bits,
                             std::size_t epsilon_exponent) {
    if (!(qber >= 0.0 && qber < 0.5)) {
        throw std::invalid_argument("final_key_length: qber must lie in [0, 0.5)");
    }
    const double raw = std::floor(static_cast<double>(n) * (1.0 - 2.0 * binary_entropy(qber)));
    const double len = raw - static_cast<double>(leaked_bits) - static_cast<double>(epsilon_exponent);
    return len > 0.0 ? static_cast<std::size_t>(len) : 0;
}

ToeplitzSeed ToeplitzSeed::random(std::size_t n_in, std::size_t n_out, Rng& rng) {
    ToeplitzSeed s;
    s.n_in = n_in;
    s.n_out = n_out;
    const std::size_t len = n_in + n_out == 0 ? 0 : n_in + n_out - 1;
    s.bits.resize(len);
    for (auto& b : s.bits) b = static_cast<std::uint8_t>(rng() & 1U);
    return s;
}

void ToeplitzSeed::validate() const {
    const std::size_t expected = n_in + n_out == 0 ? 0 : n_in + n_out - 1;
    if (bits.size() != expected) {
        throw std::invalid_argument("ToeplitzSeed: length does not match n_in + n_out - 1");
    }
}

Bits privacy_amplify(std::span<const std::uint8_t> key, const ToeplitzSeed& seed, std::size_t n_out) {
    seed.validate();
    if (seed.n_in != key.size() || seed.n_out != n_out) {
        throw std::invalid_argument("privacy_amplify: seed dimensions do not match the key");
    }
    Bits out(n_out, 0);
    if (n_out == 0 || key.empty()) return out;
    const std::size_t n_in = key.size();
    for (std::size_t i = 0; i < n_out; ++i) {
        // Row i reads seed bits i + n_in - 1 down to i.
        std::uint8_t acc = 0;
        const std::uint8_t* row = seed.bits.data() + i;
        for (std::size_t j = 0; j < n_in; ++j) acc ^= row[n_in - 1 - j] & key[j];
        out[i] = acc & 1U;
    }
    return out;
}

Ciphertext OneTimePad::encrypt(std::span<const std::uint8_t> message) {
    if (message.size() > key_.size()) {
        throw KeyTooShort("vernam: message of " + std::to_string(message.size()) +
                          " bits exceeds the " + std::to_string(key_.size()) + "-bit pad");
    }
    if (message.size() > remaining()) {
        throw KeyReuse("vernam: only " + std::to_string(remaining()) +
                       " unspent pad bits; refusing to reuse key material");
    }
    Ciphertext ct;
    ct.key_offset = cursor_;
    ct.bits.resize(message.size());
    for (std::size_t i = 0; i < message.size(); ++i) ct.bits[i] = (message[i] ^ key_[cursor_ + i]) & 1U;
    cursor_ += message.size();
    return ct;
}

Bits OneTimePad::decrypt(const Ciphertext& ct) {
    if (ct.key_offset + ct.bits.size() > key_.size()) {
        throw KeyTooShort("vernam: ciphertext extends past the end of the pad");
    }
    if (ct.key_offset < cursor_) {
        throw KeyReuse("vernam: pad bits at offset " + std::to_string(ct.key_offset) +
                       " were already spent");
    }
    Bits m(ct.bits.size());
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = (ct.bits[i] ^ key_[ct.key_offset + i]) & 1U;
    cursor_ = ct.key_offset + ct.bits.size();
    return m;
}

Ciphertext vernam_encrypt(std::span<const std::uint8_t> message, OneTimePad& pad) {
    return pad.encrypt(message);
}

Bits vernam_decrypt(const Ciphertext& ciphertext, OneTimePad& pad) { return pad.decrypt(ciphertext); }

void write_key_file(std::ostream& out, const KeyMaterial& key, std::string_view formula) {
    out << "# qss-key stage=" << key_stage_name(key.stage) << " length=" << key.bits.size()
        << " leaked=" << key.leaked_bits << " formula=" << formula << '\n'
        << to_hex(key.bits) << '\n';
}

void write_ciphertext_file(std::ostream& out, const Ciphertext& ct, std::size_t leaked_bits,
                           std::string_view formula) {
    out << "# qss-key stage=ciphertext length=" << ct.bits.size() << " leaked=" << leaked_bits
        << " formula=" << formula << " key_offset=" << ct.key_offset << '\n'
        << to_hex(ct.bits) << '\n';
}

KeyFile read_key_file(std::istream& in) {
    std::string header, hex;
    if (!std::getline(in, header) || header.rfind("# qss-key ", 0) != 0) {
        throw std::runtime_error("key file: missing '# qss-key' header");
    }
    std::getline(in, hex);
    KeyFile kf;
    bool have_length = false;
    std::istringstream hs(header.substr(10));
    std::string field;
    while (hs >> field) {
        const auto eq = field.find('=');
        if (eq == std::string::npos) throw std::runtime_error("key file: bad header field " + field);
        const auto name = field.substr(0, eq);
        const auto value = field.substr(eq + 1);
        if (name == "stage") {
            kf.stage = value;
        } else if (name == "length") {
            kf.length = std::stoull(value);
            have_length = true;
        } else if (name == "leaked") {
            kf.leaked_bits = std::stoull(value);
        } else if (name == "formula") {
            kf.formula = value;
        } else if (name == "key_offset") {
            kf.key_offset = std::stoull(value);
        }
    }
    if (!have_length) throw std::runtime_error("key file: header lacks length");
    kf.bits = from_hex(hex, kf.length);
    return kf;
}

}  // namespace qss
