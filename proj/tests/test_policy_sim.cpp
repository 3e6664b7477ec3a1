#include <gtest/gtest.h>

#include <numeric>

#include "snake_story/policy_sim.hpp"
#include "snake_story/session_log.hpp"

using namespace snake_story;

namespace {

std::vector<std::uint64_t> seed_range(std::uint64_t first, std::size_t n) {
    std::vector<std::uint64_t> v(n);
    std::iota(v.begin(), v.end(), first);
    return v;
}

struct ViewRig {
    GameState state = new_game(GameConfig{}, 3);
    Candy a{CandyKind::Red, {1, 1}, OptionSlot::Pool1, "a short low text"};
    Candy b{CandyKind::Green, {12, 12}, OptionSlot::Pool2, "a rather longer high text with more words in it"};
    TurnView view(std::optional<int> d1 = 5, std::optional<int> d2 = 9) const { return {state, a, b, d1, d2}; }
};

std::string log_bytes(const Policy& p, std::uint64_t seed) {
    return write_log(simulate_session(p, GameConfig{}, seed).log);
}

}  // namespace

TEST(Policies, Parse) {
    EXPECT_EQ(parse_policy("uniform").kind, PolicyKind::UniformRandom);
    EXPECT_EQ(parse_policy("greedy").kind, PolicyKind::GreedyPositive);
    EXPECT_EQ(parse_policy("ignore-text").kind, PolicyKind::IgnoreText);
    Policy t = parse_policy("tradeoff:0.25");
    EXPECT_EQ(t.kind, PolicyKind::TradeOff);
    EXPECT_DOUBLE_EQ(t.weight, 0.25);
    EXPECT_EQ(t.name(), "tradeoff:0.25");
    EXPECT_THROW(parse_policy("tradeoff:1.5"), ConfigError);
    EXPECT_THROW(parse_policy("tradeoff:"), ConfigError);
    EXPECT_THROW(parse_policy("tradeoff:x"), ConfigError);
    EXPECT_THROW(parse_policy("clever"), ConfigError);
    EXPECT_THROW(Policy::trade_off(-0.1), ConfigError);
}

TEST(Policies, GreedyPrefersGreenOverRed) {
    ViewRig r;
    Rng rng(1);
    for (int i = 0; i < 50; ++i) {
        EXPECT_EQ(choose_target(Policy::greedy_positive(), r.view(), rng), OptionSlot::Pool2);
        EXPECT_EQ(choose_target(Policy::greedy_positive(), r.view(1, 40), rng), OptionSlot::Pool2);
    }
}

TEST(Policies, TiesBreakOnDistance) {
    ViewRig r;
    r.a.kind = CandyKind::White;
    r.b.kind = CandyKind::White;
    Rng rng(1);
    EXPECT_EQ(choose_target(Policy::ignore_text(), r.view(3, 8), rng), OptionSlot::Pool1);
    EXPECT_EQ(choose_target(Policy::ignore_text(), r.view(8, 3), rng), OptionSlot::Pool2);
}

TEST(Policies, TradeOffEndpoints) {
    ViewRig r;
    r.a.kind = CandyKind::Green;
    r.b.kind = CandyKind::Red;
    Rng rng(1);
    // Pure survival takes the Green candy, pure text takes the richer text.
    EXPECT_EQ(choose_target(Policy::trade_off(0.0), r.view(), rng), OptionSlot::Pool1);
    EXPECT_EQ(choose_target(Policy::trade_off(1.0), r.view(), rng), OptionSlot::Pool2);
}

TEST(Simulation, GreedyNeverChoosesRedWhenGreenIsOnTheMap) {
    int green_red_turns = 0;
    auto greedy = Policy::greedy_positive();
    auto watched = Policy::with_chooser("watched-greedy", [&](const TurnView& v, Rng& rng) {
        const OptionSlot pick = choose_target(greedy, v, rng);
        if (v.pool1.kind == CandyKind::Red && v.pool2.kind == CandyKind::Green) {
            ++green_red_turns;
            EXPECT_EQ(pick, OptionSlot::Pool2);
        }
        return pick;
    });
    run_policy(watched, GameConfig{}, 77, 40);
    EXPECT_GT(green_red_turns, 10);
}

TEST(Simulation, UniformShareNearHalf) {
    SimResult r = run_policy(Policy::uniform_random(), GameConfig{}, 5, 90);
    ASSERT_GE(r.turns_played, 1000);
    EXPECT_GE(r.pool1_share, 0.45);
    EXPECT_LE(r.pool1_share, 0.55);
    EXPECT_EQ(r.pool1_selections + r.pool2_selections, r.turns_played);
}

TEST(Simulation, TradeOffZeroMatchesIgnoreText) {
    for (std::uint64_t seed : {11u, 12u, 13u}) {
        EXPECT_EQ(log_bytes(Policy::trade_off(0.0), seed), log_bytes(Policy::ignore_text(), seed));
    }
}

TEST(Simulation, TradeOffOneMatchesTextOnlyChoice) {
    auto text_only = Policy::with_chooser("text-only", [](const TurnView& v, Rng& rng) {
        const int limit = v.state.config.option_word_limit;
        return detail::choose_by_score(v, text_quality(v.pool1.text, limit), text_quality(v.pool2.text, limit), rng);
    });
    for (std::uint64_t seed : {11u, 12u, 13u}) {
        EXPECT_EQ(log_bytes(Policy::trade_off(1.0), seed), log_bytes(text_only, seed));
    }
}

TEST(Simulation, Deterministic) {
    SimResult a = run_policy(Policy::trade_off(0.5), GameConfig{}, 9, 5);
    SimResult b = run_policy(Policy::trade_off(0.5), GameConfig{}, 9, 5);
    EXPECT_EQ(a.turns_played, b.turns_played);
    EXPECT_EQ(a.pool1_selections, b.pool1_selections);
    EXPECT_EQ(a.generated, b.generated);
    EXPECT_EQ(a.selected, b.selected);
    EXPECT_EQ(a.fallbacks, b.fallbacks);
    EXPECT_EQ(log_bytes(Policy::uniform_random(), 4), log_bytes(Policy::uniform_random(), 4));
    EXPECT_NE(log_bytes(Policy::uniform_random(), 4), log_bytes(Policy::uniform_random(), 5));
}

TEST(Simulation, ResultsStayInRange) {
    SimResult r = run_policy(Policy::ignore_text(), GameConfig{}, 21, 10);
    EXPECT_GE(r.pool1_share, 0.0);
    EXPECT_LE(r.pool1_share, 1.0);
    for (std::size_t k = 0; k < kCandyKindCount; ++k) {
        EXPECT_LE(r.selected[k], r.generated[k]);
        if (r.candy_selection_rates[k]) {
            EXPECT_GE(*r.candy_selection_rates[k], 0.0);
            EXPECT_LE(*r.candy_selection_rates[k], 1.0);
        }
    }
    EXPECT_FALSE(r.candy_selection_rates[kind_id(CandyKind::Yellow)].has_value());
    EXPECT_DOUBLE_EQ(r.lifespan_turns, static_cast<double>(r.turns_played) / 10);
    for (const auto& s : r.per_session) {
        EXPECT_TRUE(s.end_reason == "lives" || s.end_reason == "jammed" || s.end_reason == "turn cap") << s.end_reason;
    }
}

TEST(Simulation, RejectsBadArguments) {
    EXPECT_THROW(run_policy(Policy::uniform_random(), GameConfig{}, 1, 0), PreconditionError);
    GameConfig bad;
    bad.map_size = 0;
    EXPECT_THROW(run_policy(Policy::uniform_random(), bad, 1, 1), ConfigError);
}

TEST(Comparison, GreedyLowersPoolOneShare) {
    auto c = compare_policies(Policy::greedy_positive(), Policy::uniform_random(), GameConfig{},
                              seed_range(1000, 100));
    double greedy = 0, uniform = 0;
    KindCounts gen{}, sel{};
    for (const auto& r : c.a) {
        greedy += r.pool1_share;
        for (std::size_t k = 0; k < kCandyKindCount; ++k) {
            gen[k] += r.generated[k];
            sel[k] += r.selected[k];
        }
    }
    for (const auto& r : c.b) uniform += r.pool1_share;
    EXPECT_LT(greedy, uniform);
    EXPECT_LT(c.test.p_value, 0.01);
    EXPECT_LT(c.test.w_plus, c.test.w_minus);
    const auto g = static_cast<std::size_t>(kind_id(CandyKind::Green));
    const auto red = static_cast<std::size_t>(kind_id(CandyKind::Red));
    EXPECT_GT(static_cast<double>(sel[g]) / gen[g], static_cast<double>(sel[red]) / gen[red]);
}

TEST(Comparison, Preconditions) {
    EXPECT_THROW(compare_policies(Policy::uniform_random(), Policy::greedy_positive(), GameConfig{},
                                  seed_range(1, kMinComparisonSeeds - 1)),
                 PreconditionError);
    EXPECT_THROW(compare_policies(Policy::uniform_random(), Policy::uniform_random(), GameConfig{},
                                  seed_range(1, kMinComparisonSeeds)),
                 AllZeroError);
}

TEST(Comparison, NullRunsRarelyLookSignificant) {
    int significant = 0;
    const int repeats = 10;
    for (int i = 0; i < repeats; ++i) {
        auto c = compare_policies(Policy::uniform_random(), Policy::uniform_random(), GameConfig{},
                                  seed_range(5000 + 100 * i, kMinComparisonSeeds), 1, 1'000'000);
        significant += c.test.p_value < 0.05;
    }
    EXPECT_LE(significant, 3);
}
