#pragma once

// Session driver for both versions. A Session is a plain value; the
// Orchestrator turns commands into successor sessions, calling the text
// provider between turns and recording every step in the session log.

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "snake_story/clock.hpp"
#include "snake_story/engine.hpp"
#include "snake_story/errors.hpp"
#include "snake_story/session_log.hpp"
#include "snake_story/text.hpp"
#include "snake_story/text_provider.hpp"

namespace snake_story {

enum class FragmentOrigin { Slot0, Slot1, Self };

inline std::string_view to_string(FragmentOrigin o) {
    switch (o) {
        case FragmentOrigin::Slot0: return "slot0";
        case FragmentOrigin::Slot1: return "slot1";
        case FragmentOrigin::Self: return "self";
    }
    return "?";
}

inline FragmentOrigin origin_of(OptionSlot s) {
    switch (s) {
        case OptionSlot::Pool1: return FragmentOrigin::Slot0;
        case OptionSlot::Pool2: return FragmentOrigin::Slot1;
        case OptionSlot::SelfWritten: return FragmentOrigin::Self;
    }
    return FragmentOrigin::Self;
}

struct Fragment {
    FragmentOrigin origin;
    std::string text;
    friend bool operator==(const Fragment&, const Fragment&) = default;
};

enum class SessionStatus { Active, Ended };

struct Session {
    std::string id;
    SessionVersion version = SessionVersion::NonGame;
    GameConfig config;
    std::uint64_t seed = 0;
    std::vector<Fragment> story;
    std::string ending;
    std::optional<GameState> game;
    std::vector<double> decision_times;
    TimePoint created_at;
    SessionStatus status = SessionStatus::Active;
    SessionTrace log;

    // Options on screen (non-game) or carried by this turn's candies (game).
    std::optional<std::pair<TextOption, TextOption>> options;
    TimePoint options_shown_at;
    // Set while the provider could not deliver; the next command retries.
    std::optional<std::string> provider_error;
    // Game timing.
    TimePoint last_advance;
    std::int64_t move_accum_ms = 0;
    std::optional<std::int64_t> last_pause_unspent_ms;
    // True when the session was rebuilt from a log rather than played.
    bool replayed = false;
    // Why a game ended without life exhaustion (jammed board, abandonment).
    std::optional<std::string> end_reason;

    std::string story_text() const {
        std::string s;
        for (const auto& f : story) s += f.text;
        return s;
    }
};

struct StoryResult {
    std::string full_story;
    std::size_t story_word_count = 0;
    std::optional<int> snake_length;
    std::optional<KindCounts> candies_eaten;

    friend bool operator==(const StoryResult&, const StoryResult&) = default;
};

namespace choice {
struct Slot0 {};
struct Slot1 {};
struct SelfText {
    std::string text;
};
struct EndStory {};
}  // namespace choice

using Choice = std::variant<choice::Slot0, choice::Slot1, choice::SelfText, choice::EndStory>;

struct TickInputs {
    std::optional<Direction> steer;
    bool end_pause = false;
    // Commits (or replaces) the text carried by this turn's Yellow candy.
    std::optional<std::string> self_text;
};

struct GameAdvance {
    Session session;
    std::vector<TurnEvent> events;
};

// Puts a space between story and ending unless one of them already
// provides the separation.
inline std::string separate_ending(std::string_view body, std::string ending) {
    if (!body.empty() && !is_space(body.back()) && !ending.empty() && !is_space(ending.front()) &&
        ending.front() != ',') {
        ending.insert(ending.begin(), ' ');
    }
    return ending;
}

inline StoryResult finalize(const Session& s) {
    if (s.status != SessionStatus::Ended) throw SequencingError("session is still active");
    StoryResult r;
    r.full_story = s.story_text() + s.ending;
    r.story_word_count = story_word_count(r.full_story);
    if (s.version == SessionVersion::Game && s.game) {
        r.candies_eaten = s.game->eaten_counts;
        r.snake_length = s.game->config.initial_snake_length + total(s.game->eaten_counts);
    }
    return r;
}

class Orchestrator {
public:
    Orchestrator(std::shared_ptr<TextProvider> provider, std::shared_ptr<Clock> clock)
        : provider_(std::move(provider)), clock_(std::move(clock)) {}

    TextProvider& provider() const { return *provider_; }
    Clock& clock() const { return *clock_; }

    Session start_session(SessionVersion version, const GameConfig& config, std::uint64_t seed,
                          std::string id = {}) const {
        validate(config);
        Session s;
        s.id = id.empty() ? "session-" + std::to_string(seed) : std::move(id);
        s.version = version;
        s.config = config;
        s.seed = seed;
        s.created_at = clock_->now();
        s.last_advance = s.created_at;
        s.log.version = version;
        if (version == SessionVersion::Game) s.game = new_game(config, seed);
        log(s, log_payload::GameStart{});
        request_options(s);
        return s;
    }

    // Re-attempts option generation after a provider failure.
    Session retry_generation(Session s) const {
        require_active(s);
        if (s.provider_error) request_options(s);
        return s;
    }

    Session submit_choice(Session s, const Choice& c) const {
        if (s.version != SessionVersion::NonGame) throw VersionError("game sessions advance through play, not choices");
        require_active(s);
        if (std::holds_alternative<choice::EndStory>(c)) {
            if (s.story.empty()) throw SequencingError("the story is still empty");
            finish(s, std::nullopt);
            return s;
        }
        if (!s.options) throw SequencingError("options are still being generated");

        const double seconds = elapsed_seconds(s.options_shown_at);
        if (std::holds_alternative<choice::Slot0>(c)) {
            s.story.push_back({FragmentOrigin::Slot0, s.options->first.text});
            log(s, log_payload::Chose{Temperature::of(s.options->first.temperature)});
        } else if (std::holds_alternative<choice::Slot1>(c)) {
            s.story.push_back({FragmentOrigin::Slot1, s.options->second.text});
            log(s, log_payload::Chose{Temperature::of(s.options->second.temperature)});
        } else {
            const auto& text = std::get<choice::SelfText>(c).text;
            if (trim(text).empty()) throw InputError("self-written text is empty");
            s.story.push_back({FragmentOrigin::Self, text});
            log(s, log_payload::AddOwnText{text});
        }
        s.decision_times.push_back(seconds);
        s.options.reset();
        request_options(s);
        return s;
    }

    GameAdvance advance_game(Session s, const TickInputs& in) const {
        if (s.version != SessionVersion::Game) throw VersionError("non-game sessions advance through choices");
        if (s.status == SessionStatus::Ended) throw TerminalError("session has ended");

        const TimePoint now = clock_->now();
        std::int64_t elapsed = std::max<std::int64_t>(0, (now - s.last_advance).count());
        s.last_advance = now;
        std::vector<TurnEvent> events;

        auto& g = *s.game;
        if (in.self_text) {
            if (!g.self_write_pending) throw PhaseError("self-writing is not offered this turn");
            if (trim(*in.self_text).empty()) throw InputError("self-written text is empty");
            g = set_self_text(std::move(g), *in.self_text);
            log(s, log_payload::OptionShown{SlotKind{slot_id(OptionSlot::SelfWritten), kind_id(CandyKind::Yellow)},
                                            *in.self_text});
        }
        if (std::holds_alternative<phase::AwaitingTexts>(g.phase)) {
            request_options(s);
            if (s.status == SessionStatus::Ended) return {std::move(s), std::move(events)};
            elapsed = 0;
        }
        if (auto* p = std::get_if<phase::Paused>(&s.game->phase)) {
            const std::int64_t remaining = p->remaining_ms;
            if (elapsed >= remaining) {
                *s.game = tick_pause(std::move(*s.game), remaining);
                elapsed -= remaining;
                s.last_pause_unspent_ms = 0;
            } else {
                *s.game = tick_pause(std::move(*s.game), elapsed);
                elapsed = 0;
                if (in.end_pause) {
                    s.last_pause_unspent_ms = std::get<phase::Paused>(s.game->phase).remaining_ms;
                    *s.game = end_pause(std::move(*s.game));
                }
            }
            s.move_accum_ms = 0;
        } else if (in.end_pause) {
            throw PhaseError("not paused");
        }

        if (!std::holds_alternative<phase::Moving>(s.game->phase)) {
            if (in.steer) throw PhaseError("not moving");
            return {std::move(s), std::move(events)};
        }

        s.move_accum_ms += elapsed;
        std::optional<Direction> steer = in.steer;
        if (steer && s.move_accum_ms < s.config.tick_interval_ms) {
            // Heading changes take effect immediately even between ticks.
            s.game->snake.heading = apply_steer(s.game->snake, *steer);
            steer.reset();
        }
        while (s.move_accum_ms >= s.config.tick_interval_ms &&
               std::holds_alternative<phase::Moving>(s.game->phase)) {
            s.move_accum_ms -= s.config.tick_interval_ms;
            Transition t;
            try {
                // Copied so a jammed board keeps its last valid state.
                t = step(*s.game, steer);
            } catch (const EngineJammed& e) {
                finish(s, std::string("board jammed: ") + e.what());
                return {std::move(s), std::move(events)};
            }
            steer.reset();
            *s.game = std::move(t.state);
            handle_events(s, t.events);
            events.insert(events.end(), t.events.begin(), t.events.end());
            if (s.status == SessionStatus::Ended) break;
            if (std::holds_alternative<phase::AwaitingTexts>(s.game->phase)) {
                s.move_accum_ms = 0;
                request_options(s);
                break;
            }
        }
        return {std::move(s), std::move(events)};
    }

    // Ends a session the player walked away from.
    Session abandon(Session s, std::string reason) const {
        require_active(s);
        finish(s, std::move(reason));
        return s;
    }

private:
    static Direction apply_steer(const Snake& snake, Direction d) {
        if (snake.length() > 1 && d == opposite(snake.heading)) return snake.heading;
        return d;
    }

    static void require_active(const Session& s) {
        if (s.status == SessionStatus::Ended) throw TerminalError("session has ended");
    }

    double elapsed_seconds(TimePoint since) const {
        return std::chrono::duration<double>(clock_->now() - since).count();
    }

    void log(Session& s, LogPayload p) const { s.log.events.push_back({clock_->now(), std::move(p), 1}); }

    void request_options(Session& s) const {
        std::pair<TextOption, TextOption> opts;
        try {
            opts = provider_->generate_options(s.story_text(), s.config);
        } catch (const ProviderUnavailable& e) {
            s.provider_error = e.what();
            return;
        } catch (const ProviderProtocol& e) {
            s.provider_error = e.what();
            return;
        }
        s.provider_error.reset();
        if (s.version == SessionVersion::NonGame) {
            log(s, log_payload::OptionShown{Temperature::of(opts.first.temperature), opts.first.text});
            log(s, log_payload::OptionShown{Temperature::of(opts.second.temperature), opts.second.text});
        } else {
            auto& g = *s.game;
            std::optional<std::string> self;
            if (g.self_write_unlocked) self = std::string();
            try {
                g = spawn_turn_candies(g, opts.first, opts.second, self);
            } catch (const EngineJammed& e) {
                finish(s, std::string("board jammed: ") + e.what());
                return;
            }
            for (const auto& c : s.game->candies) {
                if (c.slot == OptionSlot::SelfWritten) continue;
                log(s, log_payload::OptionShown{SlotKind{slot_id(c.slot), kind_id(c.kind)}, c.text});
            }
        }
        s.options = std::move(opts);
        s.options_shown_at = clock_->now();
    }

    void handle_events(Session& s, const std::vector<TurnEvent>& events) const {
        std::optional<OptionSlot> eaten_slot;
        for (const auto& e : events) {
            if (const auto* eaten = std::get_if<event::CandyEaten>(&e)) {
                eaten_slot = eaten->slot;
                log(s, log_payload::Chose{SlotKind{slot_id(eaten->slot), kind_id(eaten->kind)}});
                s.decision_times.push_back(elapsed_seconds(s.options_shown_at));
            } else if (const auto* text = std::get_if<event::TextAppended>(&e)) {
                s.story.push_back({origin_of(eaten_slot.value_or(OptionSlot::Pool1)), text->text});
                s.options.reset();
            } else if (std::holds_alternative<event::GameEnded>(e)) {
                finish(s, std::nullopt);
            }
        }
    }

    void finish(Session& s, std::optional<std::string> reason) const {
        s.end_reason = std::move(reason);
        log(s, log_payload::GameEnd{});
        if (s.version == SessionVersion::Game) log(s, log_payload::Ate{total(s.game->eaten_counts)});
        std::string context = s.story_text();
        if (trim(context).empty()) context = build_option_prompt("", provider_->config());
        try {
            s.ending = provider_->generate_ending(context, s.config);
        } catch (const Error& e) {
            s.provider_error = e.what();
            s.ending = enforce_ending("", static_cast<std::size_t>(s.config.ending_word_limit));
        }
        s.ending = separate_ending(s.story_text(), std::move(s.ending));
        s.options.reset();
        s.status = SessionStatus::Ended;
    }

    std::shared_ptr<TextProvider> provider_;
    std::shared_ptr<Clock> clock_;
};

// Rebuilds a session from its log: the story is reassembled from the texts
// recorded in option lines and the choices that follow them. When a provider
// is supplied and the log is complete, the ending is regenerated with it.
inline Session replay(const SessionTrace& trace, TextProvider* provider = nullptr,
                      const GameConfig& config = GameConfig{}) {
    using namespace log_payload;
    Session s;
    s.version = trace.version;
    s.config = config;
    s.log = trace;
    s.replayed = true;
    if (s.version == SessionVersion::Game) s.game = new_game(config, 0);
    if (!trace.events.empty()) s.created_at = trace.events.front().timestamp;

    std::vector<std::pair<OptionCode, std::string>> shown;
    std::optional<TimePoint> turn_started;
    int turn = 1;
    int tally = 0;
    auto find_shown = [&](auto&& match) -> const std::string* {
        for (auto it = shown.rbegin(); it != shown.rend(); ++it) {
            if (match(it->first)) return &it->second;
        }
        return nullptr;
    };
    for (const auto& e : trace.events) {
        if (const auto* o = std::get_if<OptionShown>(&e.payload)) {
            if (!turn_started) turn_started = e.timestamp;
            // A slot shown twice in one turn (edited self-written text) is one candy.
            const auto* sk = std::get_if<SlotKind>(&o->code);
            const bool repeat = sk && std::any_of(shown.begin(), shown.end(), [&](const auto& prev) {
                                    const auto* p = std::get_if<SlotKind>(&prev.first);
                                    return p && p->slot == sk->slot;
                                });
            if (sk && s.game && !repeat) {
                if (auto k = candy_kind_from_id(sk->kind)) ++s.game->generated_counts[static_cast<std::size_t>(*k)];
            }
            shown.emplace_back(o->code, o->text);
        } else if (const auto* c = std::get_if<Chose>(&e.payload)) {
            const std::string* text = nullptr;
            FragmentOrigin origin = FragmentOrigin::Slot0;
            if (const auto* sk = std::get_if<SlotKind>(&c->code)) {
                text = find_shown([&](const OptionCode& oc) {
                    const auto* o2 = std::get_if<SlotKind>(&oc);
                    return o2 && o2->slot == sk->slot;
                });
                if (!text) {
                    throw ReplayError("turn " + std::to_string(turn) + ": slot " + std::to_string(sk->slot) +
                                      " was chosen but has no shown text");
                }
                origin = sk->slot == 0 ? FragmentOrigin::Slot0 : sk->slot == 1 ? FragmentOrigin::Slot1 : FragmentOrigin::Self;
                if (auto k = candy_kind_from_id(sk->kind); k && s.game) ++s.game->eaten_counts[static_cast<std::size_t>(*k)];
            } else {
                const auto& t = std::get<Temperature>(c->code);
                text = find_shown([&](const OptionCode& oc) { return oc == OptionCode{t}; });
                if (!text) {
                    throw ReplayError("turn " + std::to_string(turn) + ": temperature " + t.literal +
                                      " was chosen but has no shown text");
                }
                double lowest = t.value;
                for (const auto& [code, _] : shown) {
                    if (const auto* tt = std::get_if<Temperature>(&code)) lowest = std::min(lowest, tt->value);
                }
                origin = t.value <= lowest ? FragmentOrigin::Slot0 : FragmentOrigin::Slot1;
            }
            s.story.push_back({origin, *text});
            s.decision_times.push_back(
                std::chrono::duration<double>(e.timestamp - turn_started.value_or(e.timestamp)).count());
            ++tally;
            ++turn;
            shown.clear();
            turn_started.reset();
        } else if (const auto* a = std::get_if<AddOwnText>(&e.payload)) {
            s.story.push_back({FragmentOrigin::Self, a->text});
            s.decision_times.push_back(
                std::chrono::duration<double>(e.timestamp - turn_started.value_or(e.timestamp)).count());
            ++turn;
            shown.clear();
            turn_started.reset();
        } else if (const auto* ate = std::get_if<Ate>(&e.payload)) {
            if (ate->count != tally) {
                throw ReplayError("Ate[" + std::to_string(ate->count) + "] does not match the " +
                                  std::to_string(tally) + " candies chosen");
            }
        } else if (std::holds_alternative<GameEnd>(e.payload)) {
            s.status = SessionStatus::Ended;
        }
    }
    if (s.game) {
        s.game->turn_index = tally;
        if (s.status == SessionStatus::Ended) {
            s.game->lives = 0;
            s.game->phase = phase::Ended{};
        }
    }
    if (provider && s.status == SessionStatus::Ended) {
        std::string context = s.story_text();
        if (trim(context).empty()) context = build_option_prompt("", provider->config());
        s.ending = separate_ending(s.story_text(), provider->generate_ending(context, config));
    }
    return s;
}

}  // namespace snake_story
