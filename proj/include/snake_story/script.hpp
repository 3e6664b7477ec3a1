#pragma once

// Scripted offline play: drives one session from a plain-text command list
// under a manual clock, so identical scripts give identical logs.
//
//   wait <ms>        advance the clock
//   choose 0|1       non-game: take a generated option
//   write <text>     self-written text, kept verbatim (non-game choice, or the
//                    Yellow candy text)
//   end              non-game: end the story; game: abandon the session
//   steer <dir>      game: turn up, down, left or right and advance once
//   tick [n]         game: let n ticks pass (default 1)
//   auto [n]         game: n ticks heading for the nearest reachable candy
//   end_pause        game: skip the rest of the pause
//
// Blank lines and lines starting with '#' are ignored.

#include <charconv>
#include <memory>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "snake_story/orchestrator.hpp"
#include "snake_story/policy_sim.hpp"
#include "snake_story/text.hpp"

namespace snake_story {

struct ScriptRun {
    Session session;
    // Commands skipped because the session had already ended.
    int ignored = 0;
};

namespace detail {
inline int script_count(std::string_view arg, int fallback, int line) {
    if (arg.empty()) return fallback;
    int n = 0;
    auto [end, ec] = std::from_chars(arg.data(), arg.data() + arg.size(), n);
    if (ec != std::errc{} || end != arg.data() + arg.size() || n < 0) {
        throw InputError("line " + std::to_string(line) + ": expected a non-negative count, got '" +
                         std::string(arg) + "'");
    }
    return n;
}

// Nearest reachable candy first (Pool 1 on a tie), otherwise the safest move.
inline Direction auto_move(const GameState& g) {
    std::optional<Route> best;
    for (const auto& c : g.candies) {
        if (c.inert()) continue;
        auto r = shortest_route(g, c.position);
        if (r && (!best || r->length < best->length)) best = r;
    }
    return best ? best->first : survival_move(g);
}
}  // namespace detail

inline ScriptRun run_script(SessionVersion version, const GameConfig& config, std::uint64_t seed,
                            std::string_view script, std::string id = {}) {
    ProviderConfig pc;
    pc.offline = true;
    pc.offline_seed = derive_seed(seed, 0x7e47);
    auto clock = std::make_shared<ManualClock>();
    Orchestrator orch(std::make_shared<TextProvider>(pc), clock);
    ScriptRun run{orch.start_session(version, config, seed, std::move(id))};
    Session& s = run.session;
    const bool game = version == SessionVersion::Game;
    const auto tick = std::chrono::milliseconds(config.tick_interval_ms);

    auto advance = [&](TickInputs in) { s = orch.advance_game(s, in).session; };

    std::istringstream lines{std::string(script)};
    std::string raw;
    int line_no = 0;
    while (std::getline(lines, raw)) {
        ++line_no;
        const std::string_view line = trim(raw);
        if (line.empty() || line.front() == '#') continue;
        if (s.status == SessionStatus::Ended) {
            ++run.ignored;
            continue;
        }
        const auto space = line.find(' ');
        const std::string_view cmd = line.substr(0, space);
        // `write` keeps its text verbatim after the one separating space.
        const std::string_view rest = space == std::string_view::npos ? "" : line.substr(space + 1);
        const std::string_view arg = trim(rest);
        auto fail = [&](const std::string& why) -> void {
            throw InputError("line " + std::to_string(line_no) + ": " + why);
        };
        auto game_only = [&] {
            if (!game) fail("'" + std::string(cmd) + "' only applies to game sessions");
        };
        try {
            if (cmd == "wait") {
                clock->advance(std::chrono::milliseconds(detail::script_count(arg, 0, line_no)));
            } else if (cmd == "choose") {
                if (game) fail("game sessions choose by eating a candy");
                if (arg == "0") s = orch.submit_choice(s, choice::Slot0{});
                else if (arg == "1") s = orch.submit_choice(s, choice::Slot1{});
                else fail("choose takes 0 or 1");
            } else if (cmd == "write") {
                if (arg.empty()) fail("write needs text");
                if (game) advance({.self_text = std::string(rest)});
                else s = orch.submit_choice(s, choice::SelfText{std::string(rest)});
            } else if (cmd == "end") {
                if (game) s = orch.abandon(s, "ended by script");
                else s = orch.submit_choice(s, choice::EndStory{});
            } else if (cmd == "steer") {
                game_only();
                auto d = parse_direction(arg);
                if (!d) fail("unknown direction '" + std::string(arg) + "'");
                clock->advance(tick);
                advance({.steer = *d});
            } else if (cmd == "tick" || cmd == "auto") {
                game_only();
                const int n = detail::script_count(arg, 1, line_no);
                for (int i = 0; i < n && s.status == SessionStatus::Active; ++i) {
                    clock->advance(tick);
                    TickInputs in;
                    if (cmd == "auto" && std::holds_alternative<phase::Moving>(s.game->phase)) {
                        in.steer = detail::auto_move(*s.game);
                    }
                    advance(in);
                }
            } else if (cmd == "end_pause") {
                game_only();
                advance({.end_pause = true});
            } else {
                fail("unknown command '" + std::string(cmd) + "'");
            }
        } catch (const InputError&) {
            throw;
        } catch (const Error& e) {
            throw InputError("line " + std::to_string(line_no) + ": " + e.what());
        }
    }

    if (s.status == SessionStatus::Active) {
        if (!game && !s.story.empty()) s = orch.submit_choice(s, choice::EndStory{});
        else s = orch.abandon(s, "script ended");
    }
    return run;
}

}  // namespace snake_story
