#pragma once

// Deterministic state machine for the game version. Every operation takes a
// GameState by value and returns the successor; nothing here reads the wall
// clock or touches global state.

#include <algorithm>
#include <array>
#include <cstdint>
#include <deque>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "snake_story/errors.hpp"
#include "snake_story/game_types.hpp"
#include "snake_story/rng.hpp"
#include "snake_story/text_option.hpp"

namespace snake_story {

struct Candy {
    CandyKind kind = CandyKind::White;
    GridPosition position;
    OptionSlot slot = OptionSlot::Pool1;
    std::string text;

    // A Yellow candy stays inert until the player has typed something.
    bool inert() const { return slot == OptionSlot::SelfWritten && text.empty(); }

    friend bool operator==(const Candy&, const Candy&) = default;
};

struct Snake {
    std::vector<GridPosition> body;  // head first
    Direction heading = Direction::Right;

    GridPosition head() const { return body.front(); }
    std::size_t length() const { return body.size(); }

    friend bool operator==(const Snake&, const Snake&) = default;
};

namespace phase {
struct Paused {
    std::int64_t remaining_ms = 0;
    bool self_write_enabled = false;
    friend bool operator==(const Paused&, const Paused&) = default;
};
struct Moving {
    friend bool operator==(const Moving&, const Moving&) = default;
};
struct AwaitingTexts {
    friend bool operator==(const AwaitingTexts&, const AwaitingTexts&) = default;
};
struct Ended {
    friend bool operator==(const Ended&, const Ended&) = default;
};
}  // namespace phase

using Phase = std::variant<phase::Paused, phase::Moving, phase::AwaitingTexts, phase::Ended>;

inline std::string_view phase_name(const Phase& p) {
    switch (p.index()) {
        case 0: return "paused";
        case 1: return "moving";
        case 2: return "awaiting_texts";
        default: return "ended";
    }
}

enum class LifeLossCause : std::uint8_t { RedCandy, WallHit, SelfHit, ObstacleHit };

inline std::string_view to_string(LifeLossCause c) {
    switch (c) {
        case LifeLossCause::RedCandy: return "red_candy";
        case LifeLossCause::WallHit: return "wall_hit";
        case LifeLossCause::SelfHit: return "self_hit";
        case LifeLossCause::ObstacleHit: return "obstacle_hit";
    }
    return "?";
}

namespace event {
struct CandyEaten {
    CandyKind kind;
    OptionSlot slot;
    friend bool operator==(const CandyEaten&, const CandyEaten&) = default;
};
struct LifeLost {
    LifeLossCause cause;
    friend bool operator==(const LifeLost&, const LifeLost&) = default;
};
struct LifeGained {
    friend bool operator==(const LifeGained&, const LifeGained&) = default;
};
struct ObstaclesAdded {
    int count;
    friend bool operator==(const ObstaclesAdded&, const ObstaclesAdded&) = default;
};
struct SelfWriteUnlocked {
    friend bool operator==(const SelfWriteUnlocked&, const SelfWriteUnlocked&) = default;
};
struct TextAppended {
    std::string text;
    friend bool operator==(const TextAppended&, const TextAppended&) = default;
};
struct GameEnded {
    friend bool operator==(const GameEnded&, const GameEnded&) = default;
};
}  // namespace event

using TurnEvent = std::variant<event::CandyEaten, event::LifeLost, event::LifeGained, event::ObstaclesAdded,
                               event::SelfWriteUnlocked, event::TextAppended, event::GameEnded>;

using KindCounts = std::array<int, kCandyKindCount>;

inline int total(const KindCounts& c) { return std::accumulate(c.begin(), c.end(), 0); }

struct GameState {
    GameConfig config;
    Snake snake;
    std::vector<Candy> candies;
    std::set<GridPosition> obstacles;
    int lives = 0;
    int turn_index = 0;
    Phase phase = phase::AwaitingTexts{};
    Rng rng;
    KindCounts eaten_counts{};
    KindCounts generated_counts{};
    // Text typed for this turn's Yellow candy; engaged only while one is offered.
    std::optional<std::string> self_write_pending;
    bool self_write_unlocked = false;
    int grace_ticks = 0;
    // Obstacles that could not be placed for lack of free tiles.
    int obstacle_shortfall = 0;
    std::optional<GridPosition> vacated_tail;
    std::int64_t tick_count = 0;

    friend bool operator==(const GameState&, const GameState&) = default;
};

struct Transition {
    GameState state;
    std::vector<TurnEvent> events;
};

namespace detail {

inline bool in_bounds(const GameConfig& c, GridPosition p) {
    return p.x >= 0 && p.y >= 0 && p.x < c.map_size && p.y < c.map_size;
}

inline std::size_t tile_index(const GameConfig& c, GridPosition p) {
    return static_cast<std::size_t>(p.y) * static_cast<std::size_t>(c.map_size) + static_cast<std::size_t>(p.x);
}

inline bool on_body(const Snake& s, GridPosition p) {
    return std::find(s.body.begin(), s.body.end(), p) != s.body.end();
}

inline std::optional<std::size_t> candy_at(const GameState& s, GridPosition p) {
    for (std::size_t i = 0; i < s.candies.size(); ++i) {
        if (s.candies[i].position == p) return i;
    }
    return std::nullopt;
}

// Occupancy grid: true where a tile holds body, obstacle, or candy.
inline std::vector<bool> occupied(const GameState& s) {
    std::vector<bool> occ(static_cast<std::size_t>(s.config.map_size * s.config.map_size), false);
    for (const auto& p : s.snake.body) occ[tile_index(s.config, p)] = true;
    for (const auto& p : s.obstacles) occ[tile_index(s.config, p)] = true;
    for (const auto& c : s.candies) occ[tile_index(s.config, c.position)] = true;
    return occ;
}

// Flood fill from the head over tiles free of obstacles and body. Candies
// are passable. The head tile itself is marked reachable.
inline std::vector<bool> reachable_from_head(const GameState& s) {
    const auto& c = s.config;
    std::vector<bool> blocked(static_cast<std::size_t>(c.map_size * c.map_size), false);
    for (const auto& p : s.obstacles) blocked[tile_index(c, p)] = true;
    for (const auto& p : s.snake.body) blocked[tile_index(c, p)] = true;
    std::vector<bool> seen(blocked.size(), false);
    if (s.snake.body.empty()) return seen;
    std::deque<GridPosition> frontier{s.snake.head()};
    seen[tile_index(c, s.snake.head())] = true;
    while (!frontier.empty()) {
        GridPosition p = frontier.front();
        frontier.pop_front();
        for (Direction d : kDirectionOrder) {
            GridPosition q = offset(p, d);
            if (!in_bounds(c, q)) continue;
            auto i = tile_index(c, q);
            if (seen[i] || blocked[i]) continue;
            seen[i] = true;
            frontier.push_back(q);
        }
    }
    return seen;
}

inline std::vector<GridPosition> free_tiles(const GameState& s, bool reachable_only) {
    const auto occ = occupied(s);
    std::vector<bool> reach;
    if (reachable_only) reach = reachable_from_head(s);
    std::vector<GridPosition> out;
    for (int y = 0; y < s.config.map_size; ++y) {
        for (int x = 0; x < s.config.map_size; ++x) {
            GridPosition p{x, y};
            auto i = tile_index(s.config, p);
            if (occ[i]) continue;
            if (reachable_only && !reach[i]) continue;
            out.push_back(p);
        }
    }
    return out;
}

// Depth-first search for a self-avoiding path of `length` tiles starting at
// the head. Left is tried first so an unobstructed board yields the straight
// horizontal layout trailing to the left of the head.
inline bool lay_body(const GameState& s, const std::vector<bool>& blocked, std::vector<GridPosition>& path,
                     std::vector<bool>& used, std::size_t length, int& budget) {
    if (path.size() == length) return true;
    if (--budget < 0) return false;
    static constexpr std::array<Direction, 4> order = {Direction::Left, Direction::Up, Direction::Down,
                                                       Direction::Right};
    for (Direction d : order) {
        GridPosition q = offset(path.back(), d);
        if (!in_bounds(s.config, q)) continue;
        auto i = tile_index(s.config, q);
        if (blocked[i] || used[i]) continue;
        used[i] = true;
        path.push_back(q);
        if (lay_body(s, blocked, path, used, length, budget)) return true;
        path.pop_back();
        used[i] = false;
    }
    return false;
}

// Places a snake of `length` tiles as close to the grid center as the board
// allows, heading Right when that tile is open.
inline Snake place_snake(const GameState& s, std::size_t length) {
    const auto& c = s.config;
    std::vector<bool> blocked(static_cast<std::size_t>(c.map_size * c.map_size), false);
    for (const auto& p : s.obstacles) blocked[tile_index(c, p)] = true;
    for (const auto& cd : s.candies) blocked[tile_index(c, cd.position)] = true;

    const GridPosition center{c.map_size / 2, c.map_size / 2};
    std::vector<GridPosition> heads;
    for (int y = 0; y < c.map_size; ++y) {
        for (int x = 0; x < c.map_size; ++x) {
            if (!blocked[tile_index(c, {x, y})]) heads.push_back({x, y});
        }
    }
    std::stable_sort(heads.begin(), heads.end(), [&](GridPosition a, GridPosition b) {
        return std::abs(a.x - center.x) + std::abs(a.y - center.y) <
               std::abs(b.x - center.x) + std::abs(b.y - center.y);
    });

    for (GridPosition h : heads) {
        std::vector<GridPosition> path{h};
        std::vector<bool> used(blocked.size(), false);
        used[tile_index(c, h)] = true;
        int budget = 4096;
        if (!lay_body(s, blocked, path, used, length, budget)) continue;

        Snake snake{std::move(path), Direction::Right};
        auto open = [&](Direction d) {
            GridPosition q = offset(h, d);
            return in_bounds(c, q) && !blocked[tile_index(c, q)] && !on_body(snake, q);
        };
        if (!open(Direction::Right)) {
            for (Direction d : kDirectionOrder) {
                if (open(d)) {
                    snake.heading = d;
                    break;
                }
            }
        }
        return snake;
    }
    throw EngineJammed("no room to place a snake of length " + std::to_string(length));
}

inline std::optional<LifeLossCause> collision(const GameState& s, GridPosition next) {
    if (!in_bounds(s.config, next)) return LifeLossCause::WallHit;
    if (s.obstacles.count(next)) return LifeLossCause::ObstacleHit;
    const auto& body = s.snake.body;
    // The tail vacates its tile on this tick, so moving into it is legal.
    for (std::size_t i = 0; i + 1 < body.size(); ++i) {
        if (body[i] == next) return LifeLossCause::SelfHit;
    }
    return std::nullopt;
}

inline void grow(GameState& s) {
    if (s.vacated_tail && !on_body(s.snake, *s.vacated_tail) && !s.obstacles.count(*s.vacated_tail)) {
        s.snake.body.push_back(*s.vacated_tail);
        s.vacated_tail.reset();
        return;
    }
    GridPosition tail = s.snake.body.back();
    for (Direction d : kDirectionOrder) {
        GridPosition q = offset(tail, d);
        if (in_bounds(s.config, q) && !on_body(s.snake, q) && !s.obstacles.count(q) && !candy_at(s, q)) {
            s.snake.body.push_back(q);
            return;
        }
    }
    throw ConsistencyError("no tile available to grow the snake");
}

}  // namespace detail

inline bool is_terminal(const GameState& s) { return s.lives == 0; }

inline GameState new_game(const GameConfig& config, std::uint64_t seed) {
    validate(config);
    GameState s;
    s.config = config;
    s.lives = config.initial_lives;
    s.rng.seed(seed);
    s.phase = phase::AwaitingTexts{};
    s.snake = detail::place_snake(s, static_cast<std::size_t>(config.initial_snake_length));
    return s;
}

inline std::vector<GridPosition> free_tiles(const GameState& s) { return detail::free_tiles(s, false); }

inline bool all_candies_reachable(const GameState& s) {
    const auto reach = detail::reachable_from_head(s);
    return std::all_of(s.candies.begin(), s.candies.end(), [&](const Candy& c) {
        return reach[detail::tile_index(s.config, c.position)];
    });
}

// Places up to n obstacles. Each draw picks uniformly among the remaining
// free tiles (row-major order); a tile whose blocking would cut the head off
// from any candy is discarded and the draw repeated. Tiles that cannot be
// placed are added to obstacle_shortfall.
inline GameState add_obstacles(GameState s, int n) {
    auto candidates = detail::free_tiles(s, false);
    int placed = 0;
    while (placed < n && !candidates.empty()) {
        auto idx = static_cast<std::size_t>(draw_below(s.rng, candidates.size()));
        GridPosition tile = candidates[idx];
        candidates.erase(candidates.begin() + static_cast<std::ptrdiff_t>(idx));
        s.obstacles.insert(tile);
        if (!s.candies.empty() && !all_candies_reachable(s)) {
            s.obstacles.erase(tile);
            continue;
        }
        ++placed;
    }
    s.obstacle_shortfall += n - placed;
    return s;
}

// Draw order: pool-1 kind, pool-1 tile, pool-2 kind, pool-2 tile, then the
// Yellow tile when self-writing is offered. Tiles are drawn from the
// row-major list of free tiles reachable from the head, without replacement.
inline GameState spawn_turn_candies(GameState s, const TextOption& option_a, const TextOption& option_b,
                                    const std::optional<std::string>& self_text) {
    if (!std::holds_alternative<phase::AwaitingTexts>(s.phase)) {
        throw PhaseError("candies can only spawn while awaiting texts");
    }
    if (option_a.temperature != s.config.temperature_low || option_b.temperature != s.config.temperature_high) {
        throw PreconditionError("slot 0 must carry the low-temperature text and slot 1 the high-temperature text");
    }
    if (self_text && !s.self_write_unlocked) {
        throw PreconditionError("self-written text is only offered after a Blue candy");
    }
    auto tiles = detail::free_tiles(s, true);
    const std::size_t needed = self_text ? 3 : 2;
    if (tiles.size() < needed) {
        throw EngineJammed("only " + std::to_string(tiles.size()) + " reachable free tiles, need " +
                           std::to_string(needed));
    }
    auto take_tile = [&] {
        auto idx = static_cast<std::size_t>(draw_below(s.rng, tiles.size()));
        GridPosition p = tiles[idx];
        tiles.erase(tiles.begin() + static_cast<std::ptrdiff_t>(idx));
        return p;
    };

    s.candies.clear();
    CandyKind kind_a = kPool1[draw_below(s.rng, kPool1.size())];
    GridPosition pos_a = take_tile();
    CandyKind kind_b = kPool2[draw_below(s.rng, kPool2.size())];
    GridPosition pos_b = take_tile();
    s.candies.push_back({kind_a, pos_a, OptionSlot::Pool1, option_a.text});
    s.candies.push_back({kind_b, pos_b, OptionSlot::Pool2, option_b.text});
    if (self_text) {
        s.candies.push_back({CandyKind::Yellow, take_tile(), OptionSlot::SelfWritten, *self_text});
    }
    // A Yellow candy counts as generated once it carries text (set_self_text).
    for (const auto& c : s.candies) {
        if (!c.inert()) ++s.generated_counts[static_cast<std::size_t>(kind_id(c.kind))];
    }

    s.self_write_unlocked = false;
    s.self_write_pending = self_text;
    const int seconds = self_text ? s.config.self_write_pause_seconds : s.config.pause_seconds;
    s.phase = phase::Paused{static_cast<std::int64_t>(seconds) * 1000, self_text.has_value()};
    return s;
}

// Updates the text carried by this turn's Yellow candy.
inline GameState set_self_text(GameState s, std::string text) {
    if (!s.self_write_pending) throw PhaseError("self-writing is not offered this turn");
    for (auto& c : s.candies) {
        if (c.slot != OptionSlot::SelfWritten) continue;
        const bool was_inert = c.inert();
        c.text = text;
        const auto yellow = static_cast<std::size_t>(kind_id(CandyKind::Yellow));
        if (was_inert && !c.inert()) ++s.generated_counts[yellow];
        if (!was_inert && c.inert()) --s.generated_counts[yellow];
    }
    s.self_write_pending = std::move(text);
    return s;
}

inline GameState tick_pause(GameState s, std::int64_t elapsed_ms) {
    auto* p = std::get_if<phase::Paused>(&s.phase);
    if (!p) throw PhaseError("not paused");
    p->remaining_ms -= elapsed_ms;
    if (p->remaining_ms <= 0) s.phase = phase::Moving{};
    return s;
}

inline GameState end_pause(GameState s) {
    if (!std::holds_alternative<phase::Paused>(s.phase)) throw PhaseError("not paused");
    s.phase = phase::Moving{};
    return s;
}

inline Transition apply_candy_effect(GameState s, const Candy& candy) {
    auto it = std::find(s.candies.begin(), s.candies.end(), candy);
    if (it == s.candies.end()) throw ConsistencyError("candy is not on the map");
    if (s.snake.body.empty() || s.snake.head() != candy.position) {
        throw ConsistencyError("snake head has not reached the candy");
    }
    s.candies.erase(it);
    detail::grow(s);
    ++s.eaten_counts[static_cast<std::size_t>(kind_id(candy.kind))];

    std::vector<TurnEvent> events;
    events.push_back(event::CandyEaten{candy.kind, candy.slot});
    switch (candy.kind) {
        case CandyKind::Black: {
            auto before = s.obstacles.size();
            s = add_obstacles(std::move(s), 3);
            events.push_back(event::ObstaclesAdded{static_cast<int>(s.obstacles.size() - before)});
            break;
        }
        case CandyKind::Red:
            --s.lives;
            events.push_back(event::LifeLost{LifeLossCause::RedCandy});
            if (is_terminal(s)) s.phase = phase::Ended{};
            break;
        case CandyKind::Green:
            ++s.lives;
            events.push_back(event::LifeGained{});
            break;
        case CandyKind::Blue:
            s.self_write_unlocked = true;
            events.push_back(event::SelfWriteUnlocked{});
            break;
        case CandyKind::White:
        case CandyKind::Yellow:
            break;
    }
    events.push_back(event::TextAppended{candy.text});
    return {std::move(s), std::move(events)};
}

inline Transition step(GameState s, std::optional<Direction> steer) {
    if (!std::holds_alternative<phase::Moving>(s.phase)) throw PhaseError("not moving");
    std::vector<TurnEvent> events;
    if (steer && !(s.snake.length() > 1 && *steer == opposite(s.snake.heading))) {
        s.snake.heading = *steer;
    }
    ++s.tick_count;
    const GridPosition next = offset(s.snake.head(), s.snake.heading);

    if (auto cause = detail::collision(s, next)) {
        if (s.grace_ticks > 0) {
            --s.grace_ticks;
            return {std::move(s), std::move(events)};
        }
        --s.lives;
        events.push_back(event::LifeLost{*cause});
        if (is_terminal(s)) {
            s.phase = phase::Ended{};
            events.push_back(event::GameEnded{});
            return {std::move(s), std::move(events)};
        }
        s.snake = detail::place_snake(s, s.snake.length());
        s.vacated_tail.reset();
        s.grace_ticks = 1;
        return {std::move(s), std::move(events)};
    }
    s.grace_ticks = 0;

    s.vacated_tail = s.snake.body.back();
    s.snake.body.pop_back();
    s.snake.body.insert(s.snake.body.begin(), next);

    auto idx = detail::candy_at(s, next);
    if (!idx || s.candies[*idx].inert()) return {std::move(s), std::move(events)};

    Candy eaten = s.candies[*idx];
    s.candies = {eaten};
    auto applied = apply_candy_effect(std::move(s), eaten);
    s = std::move(applied.state);
    events.insert(events.end(), std::make_move_iterator(applied.events.begin()),
                  std::make_move_iterator(applied.events.end()));

    ++s.turn_index;
    s.self_write_pending.reset();
    auto before = s.obstacles.size();
    s = add_obstacles(std::move(s), s.config.obstacles_per_turn);
    events.push_back(event::ObstaclesAdded{static_cast<int>(s.obstacles.size() - before)});
    if (is_terminal(s)) {
        s.phase = phase::Ended{};
        events.push_back(event::GameEnded{});
    } else {
        s.phase = phase::AwaitingTexts{};
    }
    return {std::move(s), std::move(events)};
}

// Returns a description of the first broken state invariant, if any.
inline std::optional<std::string> find_invariant_violation(const GameState& s) {
    const auto& c = s.config;
    if (s.lives < 0) return "negative lives";
    if (std::holds_alternative<phase::Ended>(s.phase) != (s.lives == 0)) return "phase Ended does not match lives == 0";
    if (s.snake.length() != static_cast<std::size_t>(c.initial_snake_length + total(s.eaten_counts))) {
        return "snake length differs from initial length plus candies eaten";
    }
    const int black = s.eaten_counts[static_cast<std::size_t>(kind_id(CandyKind::Black))];
    if (static_cast<int>(s.obstacles.size()) + s.obstacle_shortfall != c.obstacles_per_turn * s.turn_index + 3 * black) {
        return "obstacle count identity broken";
    }
    std::set<GridPosition> body;
    for (const auto& p : s.snake.body) {
        if (!detail::in_bounds(c, p)) return "snake outside the grid";
        if (!body.insert(p).second) return "snake body overlaps itself";
    }
    for (const auto& p : s.obstacles) {
        if (!detail::in_bounds(c, p)) return "obstacle outside the grid";
        if (body.count(p)) return "obstacle under the snake";
    }
    if (s.candies.size() > 3) return "more than three candies";
    std::set<GridPosition> candy_tiles;
    std::array<int, 3> per_slot{};
    for (const auto& cd : s.candies) {
        if (!detail::in_bounds(c, cd.position)) return "candy outside the grid";
        if (!candy_tiles.insert(cd.position).second) return "two candies share a tile";
        if (s.obstacles.count(cd.position)) return "candy on an obstacle";
        // A Yellow candy may sit under the body: it was inert when the snake crossed it.
        if (body.count(cd.position) && cd.slot != OptionSlot::SelfWritten) return "candy under the snake";
        if (!kind_allowed_in_slot(cd.kind, cd.slot)) return "candy kind does not belong to its slot's pool";
        if (++per_slot[static_cast<std::size_t>(slot_id(cd.slot))] > 1) return "two candies in one option slot";
    }
    return std::nullopt;
}

// Canonical text dump of the full state, RNG included. Two states are equal
// exactly when their snapshots are byte-identical.
inline std::string snapshot(const GameState& s) {
    std::ostringstream out;
    const auto& c = s.config;
    out << "config " << c.map_size << ' ' << c.initial_lives << ' ' << c.initial_snake_length << ' '
        << c.tick_interval_ms << ' ' << c.pause_seconds << ' ' << c.self_write_pause_seconds << ' '
        << c.obstacles_per_turn << ' ' << c.option_word_limit << ' ' << c.ending_word_limit << ' '
        << c.temperature_low << ' ' << c.temperature_high << '\n';
    out << "snake " << to_string(s.snake.heading);
    for (const auto& p : s.snake.body) out << ' ' << p.x << ',' << p.y;
    out << "\nobstacles";
    for (const auto& p : s.obstacles) out << ' ' << p.x << ',' << p.y;
    out << "\ncandies " << s.candies.size() << '\n';
    for (const auto& cd : s.candies) {
        out << "  " << kind_id(cd.kind) << ' ' << slot_id(cd.slot) << ' ' << cd.position.x << ',' << cd.position.y
            << ' ' << cd.text.size() << ':' << cd.text << '\n';
    }
    out << "lives " << s.lives << " turn " << s.turn_index << " phase " << phase_name(s.phase);
    if (auto* p = std::get_if<phase::Paused>(&s.phase)) {
        out << ' ' << p->remaining_ms << ' ' << p->self_write_enabled;
    }
    out << "\neaten";
    for (int n : s.eaten_counts) out << ' ' << n;
    out << "\ngenerated";
    for (int n : s.generated_counts) out << ' ' << n;
    out << "\nself_write " << s.self_write_unlocked << ' '
        << (s.self_write_pending ? "1:" + *s.self_write_pending : std::string("0"));
    out << "\ngrace " << s.grace_ticks << " shortfall " << s.obstacle_shortfall << " ticks " << s.tick_count;
    out << "\nvacated " << (s.vacated_tail ? std::to_string(s.vacated_tail->x) + "," + std::to_string(s.vacated_tail->y)
                                           : std::string("-"));
    out << "\nrng " << s.rng << '\n';
    return out.str();
}

}  // namespace snake_story
