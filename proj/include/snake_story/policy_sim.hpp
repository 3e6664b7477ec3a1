#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "snake_story/analysis.hpp"
#include "snake_story/clock.hpp"
#include "snake_story/engine.hpp"
#include "snake_story/errors.hpp"
#include "snake_story/orchestrator.hpp"
#include "snake_story/rng.hpp"
#include "snake_story/text.hpp"
#include "snake_story/text_provider.hpp"

namespace snake_story {

enum class PolicyKind { UniformRandom, GreedyPositive, IgnoreText, TradeOff, Custom };

// What a policy sees at the start of a turn. Distances are shortest-path
// lengths from the head, or nullopt when the candy cannot be reached.
struct TurnView {
    const GameState& state;
    const Candy& pool1;
    const Candy& pool2;
    std::optional<int> distance1;
    std::optional<int> distance2;
};

using Chooser = std::function<OptionSlot(const TurnView&, Rng&)>;

struct Policy {
    PolicyKind kind = PolicyKind::UniformRandom;
    double weight = 0.0;  // TradeOff only: 1 is pure text preference, 0 pure survival
    Chooser custom;
    std::string custom_name;

    static Policy uniform_random() { return {PolicyKind::UniformRandom, 0.0, {}, {}}; }
    static Policy greedy_positive() { return {PolicyKind::GreedyPositive, 0.0, {}, {}}; }
    static Policy ignore_text() { return {PolicyKind::IgnoreText, 0.0, {}, {}}; }
    static Policy trade_off(double w) {
        if (!(w >= 0.0 && w <= 1.0)) throw ConfigError("trade-off weight must lie in [0, 1]");
        return {PolicyKind::TradeOff, w, {}, {}};
    }
    static Policy with_chooser(std::string name, Chooser c) {
        return {PolicyKind::Custom, 0.0, std::move(c), std::move(name)};
    }

    std::string name() const {
        switch (kind) {
            case PolicyKind::UniformRandom: return "uniform";
            case PolicyKind::GreedyPositive: return "greedy";
            case PolicyKind::IgnoreText: return "ignore-text";
            case PolicyKind::TradeOff: {
                char buf[32];
                std::snprintf(buf, sizeof buf, "tradeoff:%g", weight);
                return buf;
            }
            case PolicyKind::Custom: return custom_name.empty() ? "custom" : custom_name;
        }
        return "?";
    }
};

// Accepts "uniform", "greedy", "ignore-text" and "tradeoff:<w>".
inline Policy parse_policy(std::string_view name) {
    if (name == "uniform" || name == "uniform-random") return Policy::uniform_random();
    if (name == "greedy" || name == "greedy-positive") return Policy::greedy_positive();
    if (name == "ignore" || name == "ignore-text") return Policy::ignore_text();
    if (name.starts_with("tradeoff:")) {
        const std::string w(name.substr(9));
        char* end = nullptr;
        const double v = std::strtod(w.c_str(), &end);
        if (w.empty() || *end != '\0') throw ConfigError("bad trade-off weight: " + w);
        return Policy::trade_off(v);
    }
    throw ConfigError("unknown policy: " + std::string(name));
}

// Preference scores in [0, 1].
inline double survival_score(CandyKind k) {
    switch (k) {
        case CandyKind::Green: return 1.0;
        case CandyKind::White:
        case CandyKind::Blue: return 0.5;
        case CandyKind::Black: return 0.25;
        case CandyKind::Red: return 0.0;
        case CandyKind::Yellow: return 0.5;
    }
    return 0.0;
}

inline double positive_score(CandyKind k) {
    switch (k) {
        case CandyKind::Green: return 1.0;
        case CandyKind::Blue: return 0.9;
        case CandyKind::White:
        case CandyKind::Yellow: return 0.5;
        case CandyKind::Black: return 0.2;
        case CandyKind::Red: return 0.0;
    }
    return 0.0;
}

// Stand-in for how good a text reads: its length plus its distinct-token
// count, scaled by the option word limit.
inline double text_quality(std::string_view text, int word_limit) {
    const auto words = story_word_count(text);
    const auto tokens = word_tokens(text);
    const std::set<std::string> distinct(tokens.begin(), tokens.end());
    const double q = static_cast<double>(words + distinct.size()) / (2.0 * std::max(1, word_limit));
    return std::min(1.0, q);
}

namespace detail {
inline OptionSlot choose_by_score(const TurnView& v, double s1, double s2, Rng& rng) {
    if (s1 > s2) return OptionSlot::Pool1;
    if (s2 > s1) return OptionSlot::Pool2;
    if (v.distance1 && v.distance2 && *v.distance1 != *v.distance2) {
        return *v.distance1 < *v.distance2 ? OptionSlot::Pool1 : OptionSlot::Pool2;
    }
    return draw_below(rng, 2) == 0 ? OptionSlot::Pool1 : OptionSlot::Pool2;
}
}  // namespace detail

inline OptionSlot choose_target(const Policy& p, const TurnView& v, Rng& rng) {
    switch (p.kind) {
        case PolicyKind::UniformRandom:
            return draw_below(rng, 2) == 0 ? OptionSlot::Pool1 : OptionSlot::Pool2;
        case PolicyKind::GreedyPositive:
            return detail::choose_by_score(v, positive_score(v.pool1.kind), positive_score(v.pool2.kind), rng);
        case PolicyKind::IgnoreText:
            return detail::choose_by_score(v, survival_score(v.pool1.kind), survival_score(v.pool2.kind), rng);
        case PolicyKind::TradeOff: {
            const int limit = v.state.config.option_word_limit;
            auto blend = [&](const Candy& c) {
                return p.weight * text_quality(c.text, limit) + (1.0 - p.weight) * survival_score(c.kind);
            };
            return detail::choose_by_score(v, blend(v.pool1), blend(v.pool2), rng);
        }
        case PolicyKind::Custom:
            if (!p.custom) throw ConfigError("custom policy has no chooser");
            return p.custom(v, rng);
    }
    return OptionSlot::Pool1;
}

// ---------------------------------------------------------------------------
// Navigation

namespace detail {
// Tiles the snake must not enter on its way to `target`: obstacles, its own
// body (the tail moves away, so it stays open) and every other live candy.
inline std::vector<bool> nav_blocked(const GameState& s, std::optional<GridPosition> target) {
    std::vector<bool> blocked(static_cast<std::size_t>(s.config.map_size * s.config.map_size), false);
    for (const auto& o : s.obstacles) blocked[tile_index(s.config, o)] = true;
    const auto& body = s.snake.body;
    for (std::size_t i = 0; i + 1 < body.size(); ++i) blocked[tile_index(s.config, body[i])] = true;
    for (const auto& c : s.candies) {
        if (!c.inert() && c.position != target) blocked[tile_index(s.config, c.position)] = true;
    }
    return blocked;
}

struct Route {
    Direction first;
    int length;
};

// Breadth-first search from the head; neighbours expand in the order Up,
// Right, Down, Left, so equal-length paths resolve the same way every time.
inline std::optional<Route> shortest_route(const GameState& s, GridPosition target) {
    const auto& c = s.config;
    const auto blocked = nav_blocked(s, target);
    const GridPosition head = s.snake.head();
    std::vector<int> dist(blocked.size(), -1);
    std::vector<int> first(blocked.size(), -1);
    std::deque<GridPosition> q;
    dist[tile_index(c, head)] = 0;
    q.push_back(head);
    while (!q.empty()) {
        const GridPosition p = q.front();
        q.pop_front();
        const auto pi = tile_index(c, p);
        if (p == target) return Route{static_cast<Direction>(first[pi]), dist[pi]};
        for (Direction d : kDirectionOrder) {
            if (p == head && s.snake.length() > 1 && d == opposite(s.snake.heading)) continue;
            const GridPosition n = offset(p, d);
            if (!in_bounds(c, n)) continue;
            const auto ni = tile_index(c, n);
            if (blocked[ni] || dist[ni] >= 0) continue;
            dist[ni] = dist[pi] + 1;
            first[ni] = p == head ? static_cast<int>(d) : first[pi];
            q.push_back(n);
        }
    }
    return std::nullopt;
}

inline int open_area(const GameState& s, GridPosition from, const std::vector<bool>& blocked) {
    const auto& c = s.config;
    std::vector<bool> seen(blocked.size(), false);
    std::deque<GridPosition> q{from};
    seen[tile_index(c, from)] = true;
    int n = 0;
    while (!q.empty()) {
        const GridPosition p = q.front();
        q.pop_front();
        ++n;
        for (Direction d : kDirectionOrder) {
            const GridPosition nb = offset(p, d);
            if (!in_bounds(c, nb)) continue;
            const auto i = tile_index(c, nb);
            if (blocked[i] || seen[i]) continue;
            seen[i] = true;
            q.push_back(nb);
        }
    }
    return n;
}

// No route to any candy: take the safe move with the most room behind it.
inline Direction survival_move(const GameState& s) {
    const auto blocked = nav_blocked(s, std::nullopt);
    std::optional<Direction> best;
    int best_area = -1;
    for (Direction d : kDirectionOrder) {
        if (s.snake.length() > 1 && d == opposite(s.snake.heading)) continue;
        const GridPosition n = offset(s.snake.head(), d);
        if (!in_bounds(s.config, n) || blocked[tile_index(s.config, n)]) continue;
        const int area = open_area(s, n, blocked);
        if (area > best_area) {
            best_area = area;
            best = d;
        }
    }
    return best.value_or(s.snake.heading);
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Simulation

struct SimOptions {
    int max_turns = 200;
    // A turn that runs this many ticks without a candy being eaten ends the
    // session as stalled.
    int max_ticks_per_turn = 5000;
    bool check_invariants = true;
};

struct SessionSim {
    std::uint64_t seed = 0;
    int turns_played = 0;
    int pool1_selections = 0;
    int pool2_selections = 0;
    int fallbacks = 0;
    KindCounts generated{};
    KindCounts selected{};
    std::string end_reason;  // "lives", "jammed", "turn cap" or "stalled"
    SessionTrace log;
};

struct SimResult {
    std::string policy;
    std::uint64_t seed = 0;
    int sessions = 0;
    int turns_played = 0;
    int pool1_selections = 0;
    int pool2_selections = 0;
    double pool1_share = 0.0;
    std::array<std::optional<double>, kCandyKindCount> candy_selection_rates{};
    KindCounts generated{};
    KindCounts selected{};
    double lifespan_turns = 0.0;  // mean turns per session
    int fallbacks = 0;
    std::vector<SessionSim> per_session;
};

inline SessionSim simulate_session(const Policy& policy, const GameConfig& config, std::uint64_t seed,
                                   const SimOptions& opts = {}) {
    ProviderConfig pc;
    pc.offline = true;
    pc.offline_seed = derive_seed(seed, 0x7e47);
    auto provider = std::make_shared<TextProvider>(pc);
    auto clock = std::make_shared<ManualClock>();
    Orchestrator orch(provider, clock);
    Rng choice_rng(derive_seed(seed, 0xc401ce));

    SessionSim out;
    out.seed = seed;
    Session s = orch.start_session(SessionVersion::Game, config, seed, "sim-" + std::to_string(seed));

    auto check = [&](const Session& cur) {
        if (!opts.check_invariants || !cur.game) return;
        if (auto v = find_invariant_violation(*cur.game)) {
            throw ConsistencyError("seed " + std::to_string(seed) + ": " + *v);
        }
    };

    std::optional<OptionSlot> target;
    int target_turn = -1;
    int ticks_this_turn = 0;
    check(s);
    while (s.status == SessionStatus::Active) {
        const GameState& g = *s.game;
        if (g.turn_index >= opts.max_turns) {
            s = orch.abandon(std::move(s), "turn cap");
            break;
        }
        if (std::holds_alternative<phase::Paused>(g.phase)) {
            if (opts.check_invariants && !all_candies_reachable(g)) {
                throw ConsistencyError("seed " + std::to_string(seed) + ": spawned candy is unreachable");
            }
            s = orch.advance_game(std::move(s), TickInputs{std::nullopt, true, std::nullopt}).session;
            check(s);
            continue;
        }
        if (!std::holds_alternative<phase::Moving>(g.phase)) {
            s = orch.advance_game(std::move(s), {}).session;
            continue;
        }

        const Candy* c1 = nullptr;
        const Candy* c2 = nullptr;
        for (const auto& c : g.candies) {
            if (c.slot == OptionSlot::Pool1) c1 = &c;
            if (c.slot == OptionSlot::Pool2) c2 = &c;
        }
        if (!c1 || !c2) throw ConsistencyError("a turn is missing one of its candies");
        auto r1 = detail::shortest_route(g, c1->position);
        auto r2 = detail::shortest_route(g, c2->position);
        if (target_turn != g.turn_index) {
            target_turn = g.turn_index;
            ticks_this_turn = 0;
            TurnView view{g, *c1, *c2, r1 ? std::optional<int>(r1->length) : std::nullopt,
                          r2 ? std::optional<int>(r2->length) : std::nullopt};
            target = choose_target(policy, view, choice_rng);
        }
        std::optional<detail::Route> route = *target == OptionSlot::Pool1 ? r1 : r2;
        if (!route) {
            const auto& other = *target == OptionSlot::Pool1 ? r2 : r1;
            if (other) {
                target = *target == OptionSlot::Pool1 ? OptionSlot::Pool2 : OptionSlot::Pool1;
                route = other;
                ++out.fallbacks;
            }
        }
        const Direction steer = route ? route->first : detail::survival_move(g);

        if (++ticks_this_turn > opts.max_ticks_per_turn) {
            s = orch.abandon(std::move(s), "stalled");
            break;
        }
        clock->advance(std::chrono::milliseconds(config.tick_interval_ms));
        s = orch.advance_game(std::move(s), TickInputs{steer, false, std::nullopt}).session;
        check(s);
    }

    const GameState& g = *s.game;
    out.turns_played = g.turn_index;
    out.generated = g.generated_counts;
    out.selected = g.eaten_counts;
    for (const auto& e : s.log.events) {
        if (const auto* c = std::get_if<log_payload::Chose>(&e.payload)) {
            if (const auto* sk = std::get_if<SlotKind>(&c->code)) {
                if (sk->slot == 0) ++out.pool1_selections;
                if (sk->slot == 1) ++out.pool2_selections;
            }
        }
    }
    if (s.end_reason) {
        out.end_reason = s.end_reason->starts_with("board jammed") ? "jammed" : *s.end_reason;
    } else {
        out.end_reason = "lives";
    }
    out.log = std::move(s.log);
    return out;
}

// Session i of a run plays game seed derive_seed(seed, i).
inline SimResult run_policy(const Policy& policy, const GameConfig& config, std::uint64_t seed, int sessions,
                            const SimOptions& opts = {}) {
    if (sessions < 1) throw PreconditionError("at least one session is required");
    validate(config);
    SimResult r;
    r.policy = policy.name();
    r.seed = seed;
    r.sessions = sessions;
    for (int i = 0; i < sessions; ++i) {
        auto one = simulate_session(policy, config, derive_seed(seed, static_cast<std::uint64_t>(i)), opts);
        r.turns_played += one.turns_played;
        r.pool1_selections += one.pool1_selections;
        r.pool2_selections += one.pool2_selections;
        r.fallbacks += one.fallbacks;
        for (std::size_t k = 0; k < kCandyKindCount; ++k) {
            r.generated[k] += one.generated[k];
            r.selected[k] += one.selected[k];
        }
        one.log.events.clear();  // keep results small; simulate_session returns the log when needed
        r.per_session.push_back(std::move(one));
    }
    const int picks = r.pool1_selections + r.pool2_selections;
    r.pool1_share = picks ? static_cast<double>(r.pool1_selections) / picks : 0.0;
    for (std::size_t k = 0; k < kCandyKindCount; ++k) {
        if (r.generated[k] > 0) r.candy_selection_rates[k] = static_cast<double>(r.selected[k]) / r.generated[k];
    }
    r.lifespan_turns = static_cast<double>(r.turns_played) / sessions;
    return r;
}

struct PolicyComparison {
    std::string policy_a;
    std::string policy_b;
    std::vector<std::uint64_t> seeds;
    std::vector<SimResult> a;
    std::vector<SimResult> b;
    WilcoxonResult test;  // on pool1_share, differences a - b
};

inline constexpr std::size_t kMinComparisonSeeds = 30;

// Policy b runs on seed + b_seed_offset, so an offset of 0 pairs both
// policies on identical boards.
inline PolicyComparison compare_policies(const Policy& a, const Policy& b, const GameConfig& config,
                                         const std::vector<std::uint64_t>& seeds, int sessions_per_seed = 1,
                                         std::uint64_t b_seed_offset = 0, const SimOptions& opts = {}) {
    if (seeds.size() < kMinComparisonSeeds) {
        throw PreconditionError("comparisons need at least " + std::to_string(kMinComparisonSeeds) + " seeds");
    }
    PolicyComparison out;
    out.policy_a = a.name();
    out.policy_b = b.name();
    out.seeds = seeds;
    std::vector<PairedSample> pairs;
    for (auto seed : seeds) {
        out.a.push_back(run_policy(a, config, seed, sessions_per_seed, opts));
        out.b.push_back(run_policy(b, config, seed + b_seed_offset, sessions_per_seed, opts));
        pairs.push_back({std::to_string(seed), out.a.back().pool1_share, out.b.back().pool1_share});
    }
    out.test = wilcoxon_signed_rank(pairs, WilcoxonMethod::Auto);
    return out;
}

}  // namespace snake_story
