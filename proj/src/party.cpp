#include "qss/party.hpp"

#include <algorithm>
#include <cctype>
#include <string>

namespace qss {

std::string_view party_name(Party p) noexcept {
    switch (p) {
        case Party::alice: return "Alice";
        case Party::bob: return "Bob";
        case Party::claire: return "Claire";
        case Party::david: return "David";
    }
    return "?";
}

char mode_label(Party p) noexcept { return static_cast<char>('a' + index_of(p)); }

std::optional<Party> parse_party(std::string_view text) noexcept {
    std::string lower(text);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "alice" || lower == "a") return Party::alice;
    if (lower == "bob" || lower == "b") return Party::bob;
    if (lower == "claire" || lower == "c") return Party::claire;
    if (lower == "david" || lower == "d") return Party::david;
    return std::nullopt;
}

}  // namespace qss
