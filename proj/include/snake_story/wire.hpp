#pragma once

// wire_v1: the JSON messages exchanged with UIs over the session socket.
// Every server message is an envelope {"v","seq","kind","payload"}; state
// payloads are full snapshots so a client never reconciles deltas.

#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "snake_story/engine.hpp"
#include "snake_story/errors.hpp"
#include "snake_story/orchestrator.hpp"

namespace snake_story::wire {

using nlohmann::json;

inline constexpr std::string_view kVersion = "wire_v1";

enum class Kind { State, Options, Pause, Event, Result, Error, Input };

inline std::string_view to_string(Kind k) {
    switch (k) {
        case Kind::State: return "state";
        case Kind::Options: return "options";
        case Kind::Pause: return "pause";
        case Kind::Event: return "event";
        case Kind::Result: return "result";
        case Kind::Error: return "error";
        case Kind::Input: return "input";
    }
    return "?";
}

inline std::optional<Kind> parse_kind(std::string_view s) {
    for (Kind k : {Kind::State, Kind::Options, Kind::Pause, Kind::Event, Kind::Result, Kind::Error, Kind::Input}) {
        if (to_string(k) == s) return k;
    }
    return std::nullopt;
}

struct Message {
    std::uint64_t seq = 0;
    Kind kind = Kind::State;
    json payload = json::object();
};

inline json envelope(const Message& m) {
    return {{"v", kVersion}, {"seq", m.seq}, {"kind", to_string(m.kind)}, {"payload", m.payload}};
}

inline Message parse_envelope(const json& j) {
    if (!j.is_object()) throw InputError("message must be a JSON object");
    if (j.value("v", "") != kVersion) throw InputError("unsupported wire version");
    auto kind = parse_kind(j.value("kind", ""));
    if (!kind) throw InputError("unknown message kind");
    Message m;
    m.kind = *kind;
    m.seq = j.value("seq", std::uint64_t{0});
    m.payload = j.value("payload", json::object());
    return m;
}

// ---------------------------------------------------------------------------
// Payloads

inline json position(GridPosition p) { return json::array({p.x, p.y}); }

inline json counts(const KindCounts& c) {
    json out = json::object();
    for (CandyKind k : kAllCandyKinds) out[std::string(to_string(k))] = c[static_cast<std::size_t>(kind_id(k))];
    return out;
}

inline json candy(const Candy& c) {
    return {{"kind", to_string(c.kind)}, {"kind_id", kind_id(c.kind)}, {"slot", slot_id(c.slot)},
            {"position", position(c.position)}, {"text", c.text}, {"inert", c.inert()}};
}

inline json game_snapshot(const GameState& g) {
    json snake_body = json::array();
    for (auto p : g.snake.body) snake_body.push_back(position(p));
    json obstacles = json::array();
    for (auto p : g.obstacles) obstacles.push_back(position(p));
    json candies = json::array();
    for (const auto& c : g.candies) candies.push_back(candy(c));
    json out = {{"map_size", g.config.map_size},
                {"lives", g.lives},
                {"turn", g.turn_index},
                {"tick", g.tick_count},
                {"phase", phase_name(g.phase)},
                {"snake", {{"heading", to_string(g.snake.heading)}, {"body", snake_body}}},
                {"obstacles", obstacles},
                {"candies", candies},
                {"eaten", counts(g.eaten_counts)},
                {"generated", counts(g.generated_counts)},
                {"self_write_unlocked", g.self_write_unlocked},
                {"self_write_offered", g.self_write_pending.has_value()}};
    if (const auto* p = std::get_if<phase::Paused>(&g.phase)) out["pause_remaining_ms"] = p->remaining_ms;
    return out;
}

inline json state(const Session& s) {
    json story = json::array();
    for (const auto& f : s.story) story.push_back({{"origin", to_string(f.origin)}, {"text", f.text}});
    json out = {{"session_id", s.id},
                {"version", to_string(s.version)},
                {"status", s.status == SessionStatus::Active ? "active" : "ended"},
                {"story", story}};
    if (s.provider_error) out["provider_error"] = *s.provider_error;
    if (s.game) out["game"] = game_snapshot(*s.game);
    return out;
}

// Options on screen (non-game) or carried by this turn's candies (game).
inline json options(const Session& s) {
    json list = json::array();
    if (s.options) {
        int slot = 0;
        for (const TextOption* o : {&s.options->first, &s.options->second}) {
            json item = {{"slot", slot}, {"temperature", o->temperature}, {"text", o->text}};
            if (s.game) {
                for (const auto& c : s.game->candies) {
                    if (slot_id(c.slot) == slot) {
                        item["kind"] = to_string(c.kind);
                        item["kind_id"] = kind_id(c.kind);
                    }
                }
            }
            list.push_back(std::move(item));
            ++slot;
        }
    }
    const bool self = s.game ? s.game->self_write_pending.has_value() : true;
    return {{"options", list}, {"self_text_allowed", self}};
}

inline json pause(const GameState& g) {
    const auto* p = std::get_if<phase::Paused>(&g.phase);
    if (!p) throw PhaseError("not paused");
    const int total_s = p->self_write_enabled ? g.config.self_write_pause_seconds : g.config.pause_seconds;
    return {{"remaining_ms", p->remaining_ms}, {"total_ms", total_s * 1000}, {"self_write", p->self_write_enabled}};
}

inline json event(const TurnEvent& e) {
    return std::visit(
        [](const auto& v) -> json {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, event::CandyEaten>) {
                return {{"type", "candy_eaten"}, {"kind", to_string(v.kind)}, {"slot", slot_id(v.slot)}};
            } else if constexpr (std::is_same_v<T, event::LifeLost>) {
                return {{"type", "life_lost"}, {"cause", to_string(v.cause)}};
            } else if constexpr (std::is_same_v<T, event::LifeGained>) {
                return {{"type", "life_gained"}};
            } else if constexpr (std::is_same_v<T, event::ObstaclesAdded>) {
                return {{"type", "obstacles_added"}, {"count", v.count}};
            } else if constexpr (std::is_same_v<T, event::SelfWriteUnlocked>) {
                return {{"type", "self_write_unlocked"}};
            } else if constexpr (std::is_same_v<T, event::TextAppended>) {
                return {{"type", "text_appended"}, {"text", v.text}};
            } else {
                return {{"type", "game_ended"}};
            }
        },
        e);
}

inline json result(const Session& s) {
    const StoryResult r = finalize(s);
    json out = {{"full_story", r.full_story}, {"story_word_count", r.story_word_count}, {"ending", s.ending}};
    if (r.snake_length) out["snake_length"] = *r.snake_length;
    if (r.candies_eaten) out["candies_eaten"] = counts(*r.candies_eaten);
    if (s.end_reason) out["end_reason"] = *s.end_reason;
    return out;
}

// Error codes let a UI react without parsing messages.
inline std::string_view error_code(const std::exception& e) {
    if (dynamic_cast<const PhaseError*>(&e)) return "phase";
    if (dynamic_cast<const VersionError*>(&e)) return "version";
    if (dynamic_cast<const SequencingError*>(&e)) return "sequencing";
    if (dynamic_cast<const TerminalError*>(&e)) return "terminal";
    if (dynamic_cast<const InputError*>(&e)) return "bad_input";
    if (dynamic_cast<const ProviderUnavailable*>(&e) || dynamic_cast<const ProviderProtocol*>(&e)) return "provider";
    return "internal";
}

inline json error(std::string_view code, std::string_view message) { return {{"code", code}, {"message", message}}; }

// ---------------------------------------------------------------------------
// Client input

namespace input {
struct Steer {
    Direction direction;
};
struct ChooseSlot {
    int slot;
};
struct SelfText {
    std::string text;
};
struct EndPause {};
struct EndStory {};
}  // namespace input

using Input = std::variant<input::Steer, input::ChooseSlot, input::SelfText, input::EndPause, input::EndStory>;

// Accepts the envelope form {"v","kind":"input","payload":{...}} or the bare
// payload, which must hold exactly one of steer, choose_slot, self_text,
// end_pause or end_story.
inline Input parse_input(const json& j) {
    if (!j.is_object()) throw InputError("input must be a JSON object");
    const json* body = &j;
    if (j.contains("kind")) {
        Message m = parse_envelope(j);
        if (m.kind != Kind::Input) throw InputError("clients may only send input messages");
        body = &j.at("payload");
        if (!body->is_object()) throw InputError("input payload must be an object");
    }
    if (body->size() != 1) throw InputError("input must hold exactly one command");
    const auto& [key, value] = *body->items().begin();
    if (key == "steer") {
        if (!value.is_string()) throw InputError("steer takes a direction name");
        auto d = parse_direction(value.get<std::string>());
        if (!d) throw InputError("unknown direction: " + value.get<std::string>());
        return input::Steer{*d};
    }
    if (key == "choose_slot") {
        if (!value.is_number_integer()) throw InputError("choose_slot takes 0 or 1");
        const int slot = value.get<int>();
        if (slot != 0 && slot != 1) throw InputError("choose_slot takes 0 or 1");
        return input::ChooseSlot{slot};
    }
    if (key == "self_text") {
        if (!value.is_string()) throw InputError("self_text takes a string");
        return input::SelfText{value.get<std::string>()};
    }
    if (key == "end_pause") return input::EndPause{};
    if (key == "end_story") return input::EndStory{};
    throw InputError("unknown command: " + key);
}

inline json to_json(const Input& in) {
    return std::visit(
        [](const auto& v) -> json {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, input::Steer>) return {{"steer", to_string(v.direction)}};
            else if constexpr (std::is_same_v<T, input::ChooseSlot>) return {{"choose_slot", v.slot}};
            else if constexpr (std::is_same_v<T, input::SelfText>) return {{"self_text", v.text}};
            else if constexpr (std::is_same_v<T, input::EndPause>) return {{"end_pause", true}};
            else return {{"end_story", true}};
        },
        in);
}

// ---------------------------------------------------------------------------
// Outbox

// Per-session queue of outgoing messages. Sequence numbers only grow. A state
// message replaces an undelivered state message at the tail, so a slow reader
// sees fewer snapshots (a seq gap) but never an out-of-order one.
class Outbox {
public:
    std::uint64_t push(Kind kind, json payload) {
        if (kind == Kind::State && !queue_.empty() && queue_.back().kind == Kind::State) {
            queue_.back() = {++seq_, kind, std::move(payload)};
            ++coalesced_;
            return seq_;
        }
        queue_.push_back({++seq_, kind, std::move(payload)});
        return seq_;
    }

    std::vector<Message> drain() {
        std::vector<Message> out(std::make_move_iterator(queue_.begin()), std::make_move_iterator(queue_.end()));
        queue_.clear();
        return out;
    }

    void clear() { queue_.clear(); }
    bool empty() const { return queue_.empty(); }
    std::size_t size() const { return queue_.size(); }
    std::uint64_t last_seq() const { return seq_; }
    std::uint64_t coalesced() const { return coalesced_; }

private:
    std::deque<Message> queue_;
    std::uint64_t seq_ = 0;
    std::uint64_t coalesced_ = 0;
};

}  // namespace snake_story::wire
