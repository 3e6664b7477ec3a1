#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace snake_story {

enum class TextOrigin : std::uint8_t { Model, OfflineStub, Player };

inline std::string_view to_string(TextOrigin o) {
    switch (o) {
        case TextOrigin::Model: return "model";
        case TextOrigin::OfflineStub: return "offline_stub";
        case TextOrigin::Player: return "player";
    }
    return "?";
}

// One generated (or typed) continuation.
struct TextOption {
    std::string text;
    double temperature = 0.0;
    int word_count = 0;
    TextOrigin origin = TextOrigin::OfflineStub;

    friend bool operator==(const TextOption&, const TextOption&) = default;
};

}  // namespace snake_story
