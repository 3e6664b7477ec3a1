#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "snake_story/errors.hpp"

namespace snake_story {

struct GridPosition {
    int x = 0;  // column
    int y = 0;  // row

    friend constexpr auto operator<=>(const GridPosition&, const GridPosition&) = default;
};

enum class Direction : std::uint8_t { Up, Right, Down, Left };

// Fixed exploration order used wherever a deterministic tie-break is needed.
inline constexpr std::array<Direction, 4> kDirectionOrder = {
    Direction::Up, Direction::Right, Direction::Down, Direction::Left};

constexpr GridPosition offset(GridPosition p, Direction d) {
    switch (d) {
        case Direction::Up: return {p.x, p.y - 1};
        case Direction::Right: return {p.x + 1, p.y};
        case Direction::Down: return {p.x, p.y + 1};
        case Direction::Left: return {p.x - 1, p.y};
    }
    return p;
}

constexpr Direction opposite(Direction d) {
    switch (d) {
        case Direction::Up: return Direction::Down;
        case Direction::Right: return Direction::Left;
        case Direction::Down: return Direction::Up;
        case Direction::Left: return Direction::Right;
    }
    return d;
}

inline std::string_view to_string(Direction d) {
    switch (d) {
        case Direction::Up: return "up";
        case Direction::Right: return "right";
        case Direction::Down: return "down";
        case Direction::Left: return "left";
    }
    return "?";
}

inline std::optional<Direction> parse_direction(std::string_view s) {
    if (s == "up") return Direction::Up;
    if (s == "right") return Direction::Right;
    if (s == "down") return Direction::Down;
    if (s == "left") return Direction::Left;
    return std::nullopt;
}

// Ids are written verbatim into game logs ("Chose[1][3]" is slot 1, Green).
enum class CandyKind : std::uint8_t { White = 0, Black = 1, Red = 2, Green = 3, Blue = 4, Yellow = 5 };

inline constexpr std::size_t kCandyKindCount = 6;

inline constexpr std::array<CandyKind, kCandyKindCount> kAllCandyKinds = {
    CandyKind::White, CandyKind::Black, CandyKind::Red,
    CandyKind::Green, CandyKind::Blue, CandyKind::Yellow};

// Pool 1 (neutral/negative) carries the low-temperature text, pool 2
// (neutral/positive) the high-temperature one. Yellow is in neither.
inline constexpr std::array<CandyKind, 3> kPool1 = {CandyKind::White, CandyKind::Black, CandyKind::Red};
inline constexpr std::array<CandyKind, 3> kPool2 = {CandyKind::White, CandyKind::Green, CandyKind::Blue};

constexpr int kind_id(CandyKind k) { return static_cast<int>(k); }

inline std::optional<CandyKind> candy_kind_from_id(int id) {
    if (id < 0 || id >= static_cast<int>(kCandyKindCount)) {
        return std::nullopt;
    }
    return static_cast<CandyKind>(id);
}

inline std::string_view to_string(CandyKind k) {
    switch (k) {
        case CandyKind::White: return "white";
        case CandyKind::Black: return "black";
        case CandyKind::Red: return "red";
        case CandyKind::Green: return "green";
        case CandyKind::Blue: return "blue";
        case CandyKind::Yellow: return "yellow";
    }
    return "?";
}

// 0 = pool-1 text, 1 = pool-2 text, 2 = self-written text.
enum class OptionSlot : std::uint8_t { Pool1 = 0, Pool2 = 1, SelfWritten = 2 };

constexpr int slot_id(OptionSlot s) { return static_cast<int>(s); }

inline bool kind_allowed_in_slot(CandyKind k, OptionSlot s) {
    auto in = [k](std::span<const CandyKind> pool) {
        for (CandyKind c : pool) {
            if (c == k) return true;
        }
        return false;
    };
    switch (s) {
        case OptionSlot::Pool1: return in(kPool1);
        case OptionSlot::Pool2: return in(kPool2);
        case OptionSlot::SelfWritten: return k == CandyKind::Yellow;
    }
    return false;
}

struct GameConfig {
    int map_size = 15;
    int initial_lives = 3;
    int initial_snake_length = 3;
    int tick_interval_ms = 167;
    int pause_seconds = 25;
    int self_write_pause_seconds = 45;
    int obstacles_per_turn = 3;
    int option_word_limit = 30;
    int ending_word_limit = 80;
    double temperature_low = 0.6;
    double temperature_high = 1.4;

    friend bool operator==(const GameConfig&, const GameConfig&) = default;
};

inline void validate(const GameConfig& c) {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw ConfigError(std::string("invalid config: ") + what);
    };
    require(c.map_size > 0, "map_size must be positive");
    require(c.initial_lives > 0, "initial_lives must be positive");
    require(c.initial_snake_length > 0, "initial_snake_length must be positive");
    require(c.initial_snake_length < c.map_size * c.map_size,
            "initial_snake_length must be smaller than the tile count");
    require(c.tick_interval_ms > 0, "tick_interval_ms must be positive");
    require(c.pause_seconds > 0, "pause_seconds must be positive");
    require(c.self_write_pause_seconds > 0, "self_write_pause_seconds must be positive");
    require(c.obstacles_per_turn > 0, "obstacles_per_turn must be positive");
    require(c.option_word_limit > 0, "option_word_limit must be positive");
    require(c.ending_word_limit > 7, "ending_word_limit must leave room for the ending suffix");
    require(c.temperature_low < c.temperature_high, "temperature_low must be below temperature_high");
    require(c.pause_seconds < c.self_write_pause_seconds,
            "pause_seconds must be below self_write_pause_seconds");
}

}  // namespace snake_story
